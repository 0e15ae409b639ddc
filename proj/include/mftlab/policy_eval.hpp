#pragma once

#include "mftlab/hjb.hpp"
#include "mftlab/simulation.hpp"
#include "mftlab/utility.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mft {

Strategy zero_strategy();
Strategy constant_fraction_strategy(const Vec& u);

/// Interpolated grid policy u(x, y, z, t) from a solved Bellman problem,
/// rescaled onto the constraint boundary where interpolation leaves it.
Strategy grid_policy_strategy(std::shared_ptr<const BellmanSolution> sol, const MarketSpec& spec);

/// u = sum_k Hbar_k psi_k with Hbar interpolated from the grid and the fund
/// directions psi_k evaluated at the simulated state.
Strategy fund_rule_strategy(std::shared_ptr<const BellmanSolution> sol, const MarketSpec& spec);

enum class PerturbationPattern { constant_plus, constant_minus, time_flip, wealth_flip, banded };

const char* to_string(PerturbationPattern p);

/// base + w with w orthogonal to span{psi_1..psi_{m+1}} and |w| = scale |u_base|.
/// The sign of w follows `pattern`; `component` picks the complement direction
/// (modulo its dimension). Requires m + 1 < n.
Strategy perturbed_strategy(Strategy base, const MarketSpec& spec, PerturbationPattern pattern,
                            int component = 0, double scale = 0.5, double x_center = 0.0);

struct EvalOptions {
    unsigned threads = 0;
    double flag_fraction = 1e-3;  ///< excluded / paths above this flags the result
};

struct EvalResult {
    std::string strategy;
    double mean_utility = 0.0;
    double std_error = 0.0;
    int path_count = 0;      ///< paths that entered the average
    int excluded_paths = 0;
    std::uint64_t seed = 0;
    bool flagged = false;
    double max_control_norm = 0.0;  ///< empirical sup of |u| (|pi|/X on the positive domain)
    std::vector<double> path_utility;  ///< per path, NaN when excluded
};

/// Monte Carlo estimate of E U(X(T)). The same seed gives the same Gaussian
/// draws for every strategy, so differences between strategies use common
/// random numbers.
EvalResult evaluate(const MarketSpec& spec, const Strategy& strategy, const Utility& utility,
                    int steps, int paths, std::uint64_t seed, const EvalOptions& opts = {});

/// Mean and standard error of the per-path difference a - b over paths valid in both.
std::pair<double, double> paired_difference(const EvalResult& a, const EvalResult& b);

struct ReportOptions {
    int steps = 250;
    int paths = 100000;
    std::uint64_t seed = 20240601;
    int perturbations = 5;
    double perturbation_scale = 0.5;
    unsigned threads = 0;
};

struct ReportRow {
    std::string label;
    EvalResult result;
    double delta = 0.0;     ///< V(row) - V(fund policy)
    double delta_se = 0.0;  ///< SE(row) + SE(fund policy)
    std::string verdict;
};

struct EpsilonReport {
    std::string spec_hash;
    std::string grid;
    std::uint64_t seed = 0;
    int steps = 0;
    int paths = 0;
    double h = 0.0;
    double dt = 0.0;
    double c_disc = 0.0;
    std::optional<double> epsilon_budget;  ///< set when an oracle is available
    std::optional<double> oracle_gap;      ///< |V_a - V_b|
    bool budget_pass = true;
    int perturbations_tested = 0;
    int perturbations_lower = 0;
    std::vector<ReportRow> rows;

    bool passed() const { return budget_pass && perturbations_lower == perturbations_tested; }
    std::string to_text() const;
    void write_csv(std::ostream& os) const;
};

/// Rows: (a) fund policy from the grid, (b) Merton oracle when available,
/// off-span perturbations of (a), and the zero strategy as a floor.
/// epsilon_budget = 3 (SE_a + SE_b) + c_disc (h + dt).
EpsilonReport epsilon_optimality_report(const MarketSpec& spec, const Utility& utility,
                                        std::shared_ptr<const BellmanSolution> sol, double c_disc,
                                        const ReportOptions& opts = {});

}  // namespace mft
