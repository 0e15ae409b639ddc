#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "mftlab/oracle.hpp"
#include "mftlab/policy_eval.hpp"
#include "mftlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

using namespace mft;
using mft::testing::merton_spec;
using mft::testing::vec;

namespace {

MarketSpec one_stock(double a_tilde) {
    MarketSpec s = MarketSpec::zeros(1, 0, 0, 0);
    s.K = 4.0;
    s.a = CoefficientFunction::constant(vec({0.01 + a_tilde}));
    s.r = CoefficientFunction::constant(Mat::Constant(1, 1, 0.01));
    s.v = CoefficientFunction::constant(Mat::Constant(1, 1, 0.2));
    return s;
}

std::shared_ptr<const BellmanSolution> merton_solution(const Utility& U) {
    const MarketSpec s = merton_spec();
    return std::make_shared<const BellmanSolution>(solve_bellman(s, U, default_grid(s, 41, 41, 21)));
}

}  // namespace

TEST_CASE("merton_oracle: single-stock examples") {
    const MertonOracle lg = merton_oracle(one_stock(0.04), Utility::log());
    CHECK(lg.fraction[0] == doctest::Approx(1.0));
    const MertonOracle pw = merton_oracle(one_stock(0.04), Utility::power(0.5));
    CHECK(pw.fraction[0] == doctest::Approx(2.0));
    CHECK(merton_oracle(one_stock(0.0), Utility::log()).fraction[0] == 0.0);
}

TEST_CASE("merton_oracle: refuses non-constant coefficients and other utilities") {
    const Scenario idx = preset("index");
    CHECK_FALSE(merton_oracle_available(idx.spec, idx.utility));
    CHECK_THROWS_AS(merton_oracle(idx.spec, idx.utility), InputError);
    CHECK_THROWS_AS(merton_oracle(merton_spec(), Utility::constant(1.0, Domain::positive)), InputError);
    CHECK(merton_oracle_available(merton_spec(), Utility::log()));
}

TEST_CASE("evaluate: zero strategy returns U(X0) exactly") {
    const EvalResult r = evaluate(merton_spec(), zero_strategy(), Utility::power(0.5), 50, 2000, 9);
    CHECK(r.mean_utility == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(r.std_error == 0.0);
    CHECK(r.path_count == 2000);
    CHECK(r.excluded_paths == 0);
    CHECK_FALSE(r.flagged);
}

TEST_CASE("evaluate: Merton fraction hits the oracle within 3 SE") {
    const MarketSpec s = merton_spec();
    const EvalResult r =
        evaluate(s, constant_fraction_strategy(vec({1.5, 1.6})), Utility::log(), 50, 20000, 11);
    CHECK(r.std_error > 0.0);
    CHECK(std::abs(r.mean_utility - 0.125) <= 3.0 * r.std_error);
    CHECK(r.max_control_norm == doctest::Approx(std::hypot(1.5, 1.6)));

    const EvalResult over =
        evaluate(s, constant_fraction_strategy(vec({15.0, 16.0})), Utility::log(), 50, 20000, 11);
    // expected terminal log-wealth -10
    CHECK(over.mean_utility < r.mean_utility - 3.0 * (r.std_error + over.std_error));
    CHECK(std::abs(over.mean_utility + 10.0) <= 3.0 * over.std_error);
}

TEST_CASE("evaluate: common random numbers and thread invariance") {
    const MarketSpec s = merton_spec();
    const Strategy a = constant_fraction_strategy(vec({1.5, 1.6}));
    const Strategy b = constant_fraction_strategy(vec({1.65, 1.76}));
    EvalOptions one, three;
    one.threads = 1;
    three.threads = 3;
    const EvalResult ra = evaluate(s, a, Utility::log(), 40, 5000, 3, one);
    const EvalResult ra3 = evaluate(s, a, Utility::log(), 40, 5000, 3, three);
    CHECK(ra.mean_utility == ra3.mean_utility);
    CHECK(ra.path_utility == ra3.path_utility);
    const EvalResult rb = evaluate(s, b, Utility::log(), 40, 5000, 3, one);
    const auto [d, se] = paired_difference(rb, ra);
    CHECK(d == doctest::Approx(rb.mean_utility - ra.mean_utility).epsilon(1e-12));
    CHECK(se < 0.2 * (ra.std_error + rb.std_error));
    const EvalResult other = evaluate(s, a, Utility::log(), 40, 5000, 4, one);
    CHECK(other.mean_utility != ra.mean_utility);
}

TEST_CASE("perturbed_strategy: orthogonal to the fund span with the requested size") {
    const MarketSpec s = merton_spec();
    const Vec base_u = vec({1.5, 1.6});
    const Strategy base = constant_fraction_strategy(base_u);
    const CoefficientSet c = eval_coefficients(s, Vec(), Vec(), 0.0);
    for (PerturbationPattern p : {PerturbationPattern::constant_plus, PerturbationPattern::constant_minus,
                                  PerturbationPattern::time_flip, PerturbationPattern::wealth_flip,
                                  PerturbationPattern::banded}) {
        const Strategy pert = perturbed_strategy(base, s, p, 0, 0.5);
        for (double x : {-0.7, 0.0, 0.4})
            for (double t : {0.1, 0.6}) {
                const Vec empty;
                Vec u;
                pert({x, &empty, &empty, t}, c, u);
                const Vec w = u - base_u;
                CHECK(std::abs(w.dot(base_u)) <= 1e-12);
                CHECK(w.norm() == doctest::Approx(0.5 * base_u.norm()));
            }
    }
    const Scenario one = {"", one_stock(0.04), Utility::log(), {}, {}, {}};
    CHECK_THROWS_AS(perturbed_strategy(base, one.spec, PerturbationPattern::constant_plus), InputError);
}

TEST_CASE("fund_rule and grid_policy strategies reproduce the log Merton fraction") {
    const MarketSpec s = merton_spec();
    const auto sol = merton_solution(Utility::log());
    const CoefficientSet c = eval_coefficients(s, Vec(), Vec(), 0.0);
    const Vec empty;
    for (const Strategy& st : {fund_rule_strategy(sol, s), grid_policy_strategy(sol, s)}) {
        Vec u;
        st({0.3, &empty, &empty, 0.5}, c, u);
        CHECK(u[0] == doctest::Approx(1.5).epsilon(1e-9));
        CHECK(u[1] == doctest::Approx(1.6).epsilon(1e-9));
    }
}

TEST_CASE("epsilon_optimality_report: structure on log Merton") {
    const MarketSpec s = merton_spec();
    const auto sol = merton_solution(Utility::log());
    ReportOptions o;
    o.paths = 4000;
    o.steps = 40;
    o.perturbations = 3;
    o.perturbation_scale = 1.0;
    const EpsilonReport r = epsilon_optimality_report(s, Utility::log(), sol, 0.0, o);
    REQUIRE(r.rows.size() == 6);
    CHECK(r.rows.front().label.find("fund policy") != std::string::npos);
    CHECK(r.rows[1].label.find("oracle") != std::string::npos);
    CHECK(r.rows.back().label.find("zero") != std::string::npos);
    REQUIRE(r.oracle_gap.has_value());
    CHECK(*r.oracle_gap <= 1e-9);
    CHECK(r.perturbations_tested == 3);
    CHECK(r.passed());
    std::ostringstream csv;
    r.write_csv(csv);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') >= 7);
    CHECK(r.to_text().find("PASS") != std::string::npos);
}
