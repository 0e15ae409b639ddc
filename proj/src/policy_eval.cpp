#include "mftlab/policy_eval.hpp"

#include "mftlab/funds.hpp"
#include "mftlab/oracle.hpp"
#include "mftlab/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace mft {

namespace {

bool directions_constant(const MarketSpec& spec) {
    return spec.a.is_constant() && spec.v.is_constant() && spec.r.is_constant() &&
           spec.beta_eta.is_constant();
}

void project_onto_constraint(const CoefficientSet& c, double K, Vec& u) {
    const double q = (c.v.transpose() * u).squaredNorm();
    if (q > K) u *= std::sqrt(K / q);
}

}  // namespace

Strategy zero_strategy() {
    return Strategy(Strategy::Kind::zero, "zero",
                    [](const StatePoint&, const CoefficientSet&, Vec& u) { u.setZero(); });
}

Strategy constant_fraction_strategy(const Vec& pi) {
    return Strategy(Strategy::Kind::constant_fraction, "constant",
                    [pi](const StatePoint&, const CoefficientSet&, Vec& u) { u = pi; });
}

Strategy grid_policy_strategy(std::shared_ptr<const BellmanSolution> sol, const MarketSpec& spec) {
    if (!sol) throw InputError("grid_policy_strategy: no solution");
    if (sol->policy.n != spec.n) throw InputError("grid_policy_strategy: dimension mismatch");
    auto field = std::make_shared<GridField>(sol->policy.grid, sol->policy.times, sol->policy.u,
                                             spec.n);
    const double K = spec.K;
    return Strategy(Strategy::Kind::grid_policy, "grid_policy",
                    [sol, field, K](const StatePoint& s, const CoefficientSet& c, Vec& u) {
                        field->evaluate(s.x, *s.y, *s.z, s.t, u);
                        project_onto_constraint(c, K, u);
                    });
}

Strategy fund_rule_strategy(std::shared_ptr<const BellmanSolution> sol, const MarketSpec& spec) {
    if (!sol) throw InputError("fund_rule_strategy: no solution");
    if (sol->policy.n != spec.n || sol->policy.m != spec.m)
        throw InputError("fund_rule_strategy: dimension mismatch");
    const int m = spec.m;
    auto field =
        std::make_shared<GridField>(sol->policy.grid, sol->policy.times, sol->policy.hbar, m + 1);
    std::shared_ptr<const Mat> fixed;
    if (directions_constant(spec))
        fixed = std::make_shared<const Mat>(
            factor_directions(eval_coefficients(spec, spec.eta0, spec.zeta0, 0.0)));
    const double K = spec.K;
    return Strategy(Strategy::Kind::fund_rule, "fund_rule",
                    [sol, field, fixed, K, m](const StatePoint& s, const CoefficientSet& c, Vec& u) {
                        thread_local Vec hbar;
                        hbar.resize(m + 1);
                        field->evaluate(s.x, *s.y, *s.z, s.t, hbar);
                        if (fixed) u.noalias() = *fixed * hbar;
                        else u.noalias() = factor_directions(c) * hbar;
                        project_onto_constraint(c, K, u);
                    });
}

const char* to_string(PerturbationPattern p) {
    switch (p) {
        case PerturbationPattern::constant_plus: return "constant+";
        case PerturbationPattern::constant_minus: return "constant-";
        case PerturbationPattern::time_flip: return "time-flip";
        case PerturbationPattern::wealth_flip: return "wealth-flip";
        case PerturbationPattern::banded: return "banded";
    }
    return "?";
}

namespace {

Vec complement_direction(const Mat& psi, int component) {
    const int n = static_cast<int>(psi.rows()), k = static_cast<int>(psi.cols());
    Eigen::HouseholderQR<Mat> qr(psi);
    const Mat Q = qr.householderQ() * Mat::Identity(n, n);
    return Q.col(k + component % (n - k));
}

double pattern_sign(PerturbationPattern p, const StatePoint& s, double T, double x_center) {
    switch (p) {
        case PerturbationPattern::constant_plus: return 1.0;
        case PerturbationPattern::constant_minus: return -1.0;
        case PerturbationPattern::time_flip: return s.t < 0.5 * T ? 1.0 : -1.0;
        case PerturbationPattern::wealth_flip: return s.x >= x_center ? 1.0 : -1.0;
        case PerturbationPattern::banded:
            return static_cast<int>(std::floor(10.0 * s.t / T)) % 2 == 0 ? 1.0 : -1.0;
    }
    return 1.0;
}

}  // namespace

Strategy perturbed_strategy(Strategy base, const MarketSpec& spec, PerturbationPattern pattern,
                            int component, double scale, double x_center) {
    if (spec.m + 1 >= spec.n)
        throw InputError("perturbed_strategy: fund span is all of R^n, no off-span direction");
    std::shared_ptr<const Vec> fixed;
    if (directions_constant(spec))
        fixed = std::make_shared<const Vec>(complement_direction(
            factor_directions(eval_coefficients(spec, spec.eta0, spec.zeta0, 0.0)), component));
    const double T = spec.T;
    std::string name = base.name() + "+w[" + to_string(pattern) + "]";
    return Strategy(Strategy::Kind::perturbed, std::move(name),
                    [base = std::move(base), fixed, pattern, component, scale, T,
                     x_center](const StatePoint& s, const CoefficientSet& c, Vec& u) {
                        base(s, c, u);
                        const double size = scale * u.norm() * pattern_sign(pattern, s, T, x_center);
                        if (fixed) u += size * *fixed;
                        else u += size * complement_direction(factor_directions(c), component);
                    });
}

EvalResult evaluate(const MarketSpec& spec, const Strategy& strategy, const Utility& utility,
                    int steps, int paths, std::uint64_t seed, const EvalOptions& opts) {
    if (utility.domain() != spec.domain)
        throw InputError("evaluate: utility domain does not match the market domain");
    const PathBundle b = simulate_paths(spec, strategy, steps, paths, seed, {false, opts.threads});

    EvalResult r;
    r.strategy = strategy.name();
    r.seed = seed;
    r.max_control_norm = b.max_control_norm;
    r.path_utility.assign(paths, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> vals;
    vals.reserve(paths);
    for (int p = 0; p < paths; ++p) {
        if (b.excluded[p]) {
            ++r.excluded_paths;
            continue;
        }
        const double u = utility.at_coordinate(b.terminal_coord[p]);
        if (!std::isfinite(u)) {
            ++r.excluded_paths;
            continue;
        }
        r.path_utility[p] = u;
        vals.push_back(u);
    }
    r.path_count = static_cast<int>(vals.size());
    r.flagged = r.excluded_paths > opts.flag_fraction * paths;
    if (vals.empty()) {
        r.mean_utility = std::numeric_limits<double>::quiet_NaN();
        r.std_error = std::numeric_limits<double>::quiet_NaN();
        r.flagged = true;
        return r;
    }
    // Shifted sums keep the mean exact when every path ends at the same value.
    const double shift = vals.front();
    std::vector<double> d(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) d[i] = vals[i] - shift;
    const double n = static_cast<double>(vals.size());
    const double mean_d = pairwise_sum(d.data(), d.size()) / n;
    r.mean_utility = shift + mean_d;
    if (vals.size() > 1) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - mean_d) * (d[i] - mean_d);
        const double var = pairwise_sum(d.data(), d.size()) / (n - 1.0);
        r.std_error = std::sqrt(var / n);
    }
    return r;
}

std::pair<double, double> paired_difference(const EvalResult& a, const EvalResult& b) {
    if (a.path_utility.size() != b.path_utility.size())
        throw InputError("paired_difference: path counts differ");
    std::vector<double> d;
    for (std::size_t p = 0; p < a.path_utility.size(); ++p)
        if (std::isfinite(a.path_utility[p]) && std::isfinite(b.path_utility[p]))
            d.push_back(a.path_utility[p] - b.path_utility[p]);
    if (d.size() < 2) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    const double n = static_cast<double>(d.size());
    const double mean = pairwise_sum(d.data(), d.size()) / n;
    for (double& x : d) x = (x - mean) * (x - mean);
    return {mean, std::sqrt(pairwise_sum(d.data(), d.size()) / (n - 1.0) / n)};
}

EpsilonReport epsilon_optimality_report(const MarketSpec& spec, const Utility& utility,
                                        std::shared_ptr<const BellmanSolution> sol, double c_disc,
                                        const ReportOptions& opts) {
    if (!sol) throw InputError("epsilon_optimality_report: no solution");
    EpsilonReport rep;
    rep.spec_hash = spec.hash();
    rep.grid = sol->value.grid.describe();
    rep.seed = opts.seed;
    rep.steps = opts.steps;
    rep.paths = opts.paths;
    rep.h = sol->value.grid.x.step();
    rep.dt = sol->dt;
    rep.c_disc = c_disc;
    const EvalOptions eo{opts.threads};

    auto run = [&](const Strategy& s) {
        return evaluate(spec, s, utility, opts.steps, opts.paths, opts.seed, eo);
    };

    const Strategy fund = fund_rule_strategy(sol, spec);
    ReportRow a{"(a) fund policy", run(fund), 0.0, 0.0, ""};
    a.verdict = "reference";
    const EvalResult Va = a.result;
    rep.rows.push_back(std::move(a));

    if (merton_oracle_available(spec, utility)) {
        const MertonOracle o = merton_oracle(spec, utility);
        ReportRow b{"(b) oracle", run(constant_fraction_strategy(o.fraction)), 0.0, 0.0, ""};
        b.delta = b.result.mean_utility - Va.mean_utility;
        b.delta_se = b.result.std_error + Va.std_error;
        const double budget = 3.0 * b.delta_se + c_disc * (rep.h + rep.dt);
        rep.epsilon_budget = budget;
        rep.oracle_gap = std::abs(b.delta);
        rep.budget_pass = *rep.oracle_gap <= budget;
        b.verdict = std::string("|V_policy - V_oracle| <= eps_budget: ") +
                    (rep.budget_pass ? "PASS" : "FAIL");
        rep.rows.push_back(b);
    }

    if (spec.m + 1 < spec.n) {
        const double xc = spec.domain == Domain::positive ? std::log(spec.x0) : spec.x0;
        const PerturbationPattern patterns[] = {
            PerturbationPattern::constant_plus, PerturbationPattern::constant_minus,
            PerturbationPattern::time_flip, PerturbationPattern::wealth_flip,
            PerturbationPattern::banded};
        for (int k = 0; k < opts.perturbations; ++k) {
            const PerturbationPattern pat = patterns[k % 5];
            const int comp = k % (spec.n - spec.m - 1);
            const Strategy s = perturbed_strategy(fund, spec, pat, comp, opts.perturbation_scale, xc);
            ReportRow row{"(c) off-span " + std::string(to_string(pat)) + " #" + std::to_string(comp),
                          run(s), 0.0, 0.0, ""};
            row.delta = row.result.mean_utility - Va.mean_utility;
            row.delta_se = row.result.std_error + Va.std_error;
            const bool lower = -row.delta > 3.0 * row.delta_se;
            ++rep.perturbations_tested;
            if (lower) ++rep.perturbations_lower;
            row.verdict = lower ? "lower by > 3 SE: PASS" : "not lower by > 3 SE: FAIL";
            rep.rows.push_back(row);
        }
    }

    ReportRow z{"(d) zero floor", run(zero_strategy()), 0.0, 0.0, ""};
    z.delta = z.result.mean_utility - Va.mean_utility;
    z.delta_se = z.result.std_error + Va.std_error;
    z.verdict = "floor U(X0)";
    rep.rows.push_back(z);
    return rep;
}

std::string EpsilonReport::to_text() const {
    std::ostringstream os;
    char buf[320];
    os << "epsilon-optimality report\n";
    os << "spec hash: " << spec_hash << "\nseed: " << seed << "\ngrid: " << grid << '\n';
    std::snprintf(buf, sizeof buf, "mc: steps=%d paths=%d  h=%.6g dt=%.6g C_disc=%.6g\n", steps,
                  paths, h, dt, c_disc);
    os << buf;
    os << "row                                   V            SE          delta      verdict\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-32s %12.8f %12.3e %12.3e  %s%s\n", r.label.c_str(),
                      r.result.mean_utility, r.result.std_error, r.delta, r.verdict.c_str(),
                      r.result.flagged ? " [flagged: excluded paths]" : "");
        os << buf;
    }
    if (epsilon_budget) {
        std::snprintf(buf, sizeof buf, "oracle gap %.6e vs eps_budget %.6e: %s\n", *oracle_gap,
                      *epsilon_budget, budget_pass ? "PASS" : "FAIL");
        os << buf;
    }
    os << "off-span perturbations lower: " << perturbations_lower << "/" << perturbations_tested
       << '\n';
    os << "overall: " << (passed() ? "PASS" : "FAIL") << '\n';
    return os.str();
}

void EpsilonReport::write_csv(std::ostream& os) const {
    os << "# spec_hash=" << spec_hash << " seed=" << seed << " grid=" << grid << '\n';
    os << "row,mean_utility,std_error,paths,excluded,delta,delta_se,max_control_norm,verdict\n";
    char buf[320];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "\"%s\",%.17g,%.17g,%d,%d,%.17g,%.17g,%.17g,\"%s\"\n",
                      r.label.c_str(), r.result.mean_utility, r.result.std_error,
                      r.result.path_count, r.result.excluded_paths, r.delta, r.delta_se,
                      r.result.max_control_norm, r.verdict.c_str());
        os << buf;
    }
}

}  // namespace mft
