#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "mftlab/hjb.hpp"
#include "mftlab/oracle.hpp"
#include "mftlab/scenario.hpp"

#include <cmath>
#include <memory>
#include <sstream>

using namespace mft;
using mft::testing::merton_spec;
using mft::testing::vec;

namespace {

Grid box2(int nx, int ny) {
    Grid g;
    g.x = {-1.0, 1.0, nx};
    g.y = {Axis{-0.5, 1.5, ny}};
    g.t_steps = 10;
    return g;
}

std::vector<double> sample(const Grid& g, double (*f)(double, double)) {
    std::vector<double> J(g.node_count());
    for (std::size_t i = 0; i < J.size(); ++i) {
        double x;
        Vec y, z;
        g.coordinates(i, x, y, z);
        J[i] = f(x, y[0]);
    }
    return J;
}

const MarketSpec& merton() {
    static const MarketSpec s = merton_spec();
    return s;
}

}  // namespace

TEST_CASE("stencils: quadratics are exact everywhere, including the boundary") {
    const Grid g = box2(9, 7);
    const auto J = sample(g, [](double x, double y) { return 3 * x * x - 2 * x * y + y * y + x; });
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        double x;
        Vec y, z;
        g.coordinates(i, x, y, z);
        const NodeDerivatives d = derivatives_at(J, g, i);
        CHECK(d.Jx == doctest::Approx(6 * x - 2 * y[0] + 1).epsilon(1e-10));
        CHECK(d.Jxx == doctest::Approx(6.0).epsilon(1e-9));
        CHECK(d.Jxy[0] == doctest::Approx(-2.0).epsilon(1e-9));
        CHECK(d.Jyy(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(d.Jy[0] == doctest::Approx(-2 * x + 2 * y[0]).epsilon(1e-10));
    }
}

TEST_CASE("stencils: second-order accuracy on a smooth function") {
    auto err = [](int nodes) {
        const Grid g = box2(nodes, nodes);
        const auto J = sample(g, [](double x, double y) { return std::sin(x + 0.5 * y); });
        double e = 0.0;
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            double x;
            Vec y, z;
            g.coordinates(i, x, y, z);
            const NodeDerivatives d = derivatives_at(J, g, i);
            e = std::max(e, std::abs(d.Jxx + std::sin(x + 0.5 * y[0])));
            e = std::max(e, std::abs(d.Jx - std::cos(x + 0.5 * y[0])));
            e = std::max(e, std::abs(d.Jxy[0] + 0.5 * std::sin(x + 0.5 * y[0])));
        }
        return e;
    };
    const double order = std::log2(err(21) / err(41));
    CHECK(order > 1.8);
    CHECK(order < 2.3);
}

TEST_CASE("derivative_stencils agrees with derivatives_at") {
    const Grid g = box2(7, 5);
    const auto J = sample(g, [](double x, double y) { return std::exp(x) * std::cos(y); });
    const DerivativeFields f = derivative_stencils(J, g);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const NodeDerivatives d = derivatives_at(J, g, i);
        CHECK(f.Jx[i] == d.Jx);
        CHECK(f.Jxx[i] == d.Jxx);
        CHECK(f.Jxy[i] == d.Jxy[0]);
        CHECK(f.Jyy[i] == d.Jyy(0, 0));
    }
}

TEST_CASE("default_grid: far-field box and odd node counts") {
    const Grid g = default_grid(merton(), 40, 41, 21);
    CHECK(g.x.nodes == 41);
    CHECK(g.x.lo <= std::log(1.0 / 8.0));
    CHECK(g.x.hi >= std::log(8.0));
    CHECK(g.dim() == 1);
    CHECK(g.dt() <= stable_time_step(merton(), g));
    const std::vector<int> st = g.stored_steps();
    CHECK(st.front() == 0);
    CHECK(st.back() == g.t_steps);
}

TEST_CASE("solve_bellman: terminal slice equals the utility") {
    const Grid g = default_grid(merton(), 41, 41, 21);
    const Utility U = Utility::power(0.5);
    const BellmanSolution sol = solve_bellman(merton(), U, g);
    const auto& last = sol.value.J.back();
    CHECK(sol.value.times.back() == doctest::Approx(1.0));
    for (std::size_t i = 0; i < last.size(); ++i) {
        double x;
        Vec y, z;
        g.coordinates(i, x, y, z);
        CHECK(last[i] == U.at_coordinate(x));
    }
}

TEST_CASE("solve_bellman: constant utility gives a constant value and zero policy") {
    const Grid g = default_grid(merton(), 41, 41, 21);
    const BellmanSolution sol = solve_bellman(merton(), Utility::constant(2.5, Domain::positive), g);
    for (const auto& slice : sol.value.J)
        for (double v : slice) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));
    for (double u : sol.policy.u.front()) CHECK(u == 0.0);
}

TEST_CASE("solve_bellman: log utility matches the closed form") {
    const Grid g = default_grid(merton(), 81, 41, 21);
    const BellmanSolution sol = solve_bellman(merton(), Utility::log(), g);
    const MertonOracle o = merton_oracle(merton(), Utility::log());
    CHECK(o.value(0.0, 0.0) == doctest::Approx(0.125).epsilon(1e-15));
    const auto& J0 = sol.value.J.front();
    for (std::size_t i = 0; i < J0.size(); ++i) {
        double x;
        Vec y, z;
        g.coordinates(i, x, y, z);
        CHECK(J0[i] == doctest::Approx(o.value(x, 0.0)).epsilon(1e-11));
        if (g.interior(i)) {
            CHECK(sol.policy.u.front()[2 * i] == doctest::Approx(1.5).epsilon(1e-9));
            CHECK(sol.policy.u.front()[2 * i + 1] == doctest::Approx(1.6).epsilon(1e-9));
        }
    }
}

TEST_CASE("solve_bellman: power utilities near the closed form") {
    struct Case { double delta, J0; };
    // frozen from the closed-form oracle
    for (Case c : {Case{0.5, 2.26629690613365}, Case{-1.0, -0.939413062813476}}) {
        const Utility U = Utility::power(c.delta);
        CHECK(merton_oracle(merton(), U).value(0.0, 0.0) == doctest::Approx(c.J0).epsilon(1e-13));
        const Grid g = default_grid(merton(), 161, 41, 21);
        const BellmanSolution sol = solve_bellman(merton(), U, g);
        const std::size_t mid = g.x.nodes / 2;
        double x;
        Vec y, z;
        g.coordinates(mid, x, y, z);
        REQUIRE(std::abs(x) < 1e-12);
        CHECK(sol.value.J.front()[mid] == doctest::Approx(c.J0).epsilon(1e-3));
        const Vec expected = vec({1.5, 1.6}) / (1.0 - c.delta);
        CHECK(sol.policy.u.front()[2 * mid] == doctest::Approx(expected[0]).epsilon(1e-2));
        CHECK(sol.policy.u.front()[2 * mid + 1] == doctest::Approx(expected[1]).epsilon(1e-2));
    }
}

TEST_CASE("solve_bellman: monotone and concave in wealth, policy feasible") {
    MarketSpec spec = merton_spec(1.0);
    const Grid g = default_grid(spec, 81, 41, 21);
    const BellmanSolution sol = solve_bellman(spec, Utility::power(0.5), g);
    const auto& J0 = sol.value.J.front();
    const double h = g.x.step();
    for (int i = 1; i + 1 < g.x.nodes; ++i) {
        CHECK(J0[i + 1] > J0[i]);
        // concavity in wealth X = e^q: J_qq - J_q <= 0
        const double Jq = (J0[i + 1] - J0[i - 1]) / (2 * h);
        const double Jqq = (J0[i + 1] - 2 * J0[i] + J0[i - 1]) / (h * h);
        CHECK(Jqq - Jq <= 1e-10);
    }
    const auto& u = sol.policy.u.front();
    for (int i = 0; i < g.x.nodes; ++i) {
        const double s2 = std::pow(0.2 * u[2 * i], 2) + std::pow(0.25 * u[2 * i + 1], 2);
        CHECK(s2 <= 1.0 + 1e-12);
    }
}

TEST_CASE("backward_step: one-step consistency with stored slices") {
    Grid g = default_grid(merton(), 41, 41, 21);
    g.store_every = 1;
    const BellmanSolution sol = solve_bellman(merton(), Utility::power(0.5), g);
    const std::size_t k = sol.value.J.size() - 1;
    const auto stepped = backward_step(merton(), g, sol.value.slice(k), sol.value.times[k], g.dt());
    REQUIRE(stepped.size() == sol.value.J[k - 1].size());
    for (std::size_t i = 0; i < stepped.size(); ++i) CHECK(stepped[i] == sol.value.J[k - 1][i]);
}

TEST_CASE("solve_bellman: unstable time step is refused") {
    Grid g = default_grid(merton(), 161, 41, 21);
    g.t_steps = 2;
    g.store_every = 1;
    try {
        solve_bellman(merton(), Utility::log(), g);
        FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
        CHECK(e.required_steps > 2);
        CHECK(e.required_dt <= stable_time_step(merton(), g));
    }
}

TEST_CASE("GridField: exact on multilinear data and clamped outside") {
    const Grid g = box2(5, 5);
    std::vector<std::vector<double>> data(2, std::vector<double>(g.node_count()));
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        double x;
        Vec y, z;
        g.coordinates(i, x, y, z);
        data[0][i] = 1 + 2 * x + 3 * y[0] + x * y[0];
        data[1][i] = data[0][i] + 10;
    }
    const std::vector<double> times{0.0, 1.0};
    const GridField f(g, times, data, 1);
    Vec out;
    f.evaluate(0.3, vec({0.2}), Vec(), 0.25, out);
    CHECK(out[0] == doctest::Approx(1 + 0.6 + 0.6 + 0.06 + 2.5));
    f.evaluate(5.0, vec({0.2}), Vec(), 0.0, out);
    CHECK(out[0] == doctest::Approx(1 + 2 + 0.6 + 0.2));
    f.evaluate(0.0, vec({0.0}), Vec(), 7.0, out);
    CHECK(out[0] == doctest::Approx(11.0));
}

TEST_CASE("binary writers round-trip") {
    const Grid g = default_grid(merton(), 21, 41, 21);
    const BellmanSolution sol = solve_bellman(merton(), Utility::log(), g);
    std::stringstream vs, ps;
    write_value_binary(sol.value, vs);
    write_policy_binary(sol.policy, ps);
    const BinaryGrid v = read_grid_binary(vs);
    CHECK(v.kind == 0);
    CHECK(v.axes.size() == 1);
    CHECK(v.axes[0].nodes == 21);
    CHECK(v.times == sol.value.times);
    CHECK(v.components == 1);
    CHECK(v.data.size() == sol.value.J.size() * 21);
    CHECK(v.data[21 * (v.times.size() - 1) + 7] == sol.value.J.back()[7]);
    const BinaryGrid p = read_grid_binary(ps);
    CHECK(p.kind == 1);
    CHECK(p.components == 2 + 0 + 3);
    CHECK(p.data[1] == sol.policy.u.front()[1]);
    std::stringstream bad("NOTAGRID");
    CHECK_THROWS(read_grid_binary(bad));
}

TEST_CASE("extract_fund_policy: log Merton uses one fund with coefficient one") {
    const Grid g = default_grid(merton(), 41, 41, 21);
    const BellmanSolution sol = solve_bellman(merton(), Utility::log(), g);
    const FundPolicyReport r = extract_fund_policy(sol, merton());
    CHECK(r.mu == 1);
    CHECK(r.max_relative_residual <= 1e-10);
    CHECK(r.max_factor_residual <= 1e-10);
    for (double hb : sol.policy.hbar.front()) CHECK(hb == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("index preset: two funds, argmax in their span") {
    const Scenario s = preset("index");
    const Grid g = default_grid(s.spec, 41, 21, 21);
    const BellmanSolution sol = solve_bellman(s.spec, s.utility, g);
    const FundPolicyReport r = extract_fund_policy(sol, s.spec);
    CHECK(r.mu == 2);
    CHECK(r.max_relative_residual <= 1e-10);
    const ArgmaxReport a = unrestricted_argmax_check(sol.value, s.spec, 60, 7);
    CHECK(a.samples == 60);
    CHECK(a.informative > 0);
    CHECK(a.fraction_within() == 1.0);
}

TEST_CASE("unrestricted_argmax_check: flat value is uninformative") {
    const Grid g = default_grid(merton(), 21, 41, 21);
    const BellmanSolution sol = solve_bellman(merton(), Utility::constant(1.0, Domain::positive), g);
    const ArgmaxReport a = unrestricted_argmax_check(sol.value, merton(), 20, 1);
    CHECK(a.samples == 20);
    CHECK(a.informative == 0);
    CHECK(a.fraction_within() == 1.0);
}

TEST_CASE("convergence_study: log exact, power second order") {
    auto grids = [](const MarketSpec& s) {
        std::vector<Grid> gs;
        for (int nx : {41, 81, 161}) gs.push_back(default_grid(s, nx, 41, 21));
        return gs;
    };
    const ConvergenceStudy lg = convergence_study(merton(), Utility::log(), grids(merton()));
    CHECK(lg.exact);
    CHECK(std::isinf(lg.value_order));
    const ConvergenceStudy pw = convergence_study(merton(), Utility::power(0.5), grids(merton()));
    CHECK_FALSE(pw.exact);
    CHECK(pw.value_order > 1.7);
    CHECK(pw.rows.back().value_error < pw.rows.front().value_error);
    CHECK(pw.to_text().find("order") != std::string::npos);
}
