#pragma once

#include "mftlab/market_model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mft {

/// State seen by a strategy: the wealth coordinate (wealth on the reals,
/// q = ln X on the positive domain), the factors and time.
struct StatePoint {
    double x = 0.0;
    const Vec* y = nullptr;
    const Vec* z = nullptr;
    double t = 0.0;
};

/// A feedback rule u(x, y, z, t). On the reals u is the discounted amount held
/// in each stock; on the positive domain it is the fraction of wealth.
class Strategy {
public:
    enum class Kind { zero, constant_fraction, grid_policy, fund_rule, perturbed, custom };
    using Rule = std::function<void(const StatePoint&, const CoefficientSet&, Vec& u)>;

    Strategy(Kind kind, std::string name, Rule rule) :
        kind_(kind), name_(std::move(name)), rule_(std::move(rule)) {}

    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    void operator()(const StatePoint& s, const CoefficientSet& c, Vec& u) const { rule_(s, c, u); }

private:
    Kind kind_;
    std::string name_;
    Rule rule_;
};

/// Independent stream for one path; identical for a given (seed, path) no
/// matter which thread runs it.
std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path);

struct SimulationOptions {
    bool record_paths = true;
    unsigned threads = 0;  ///< 0: hardware concurrency
};

struct PathBundle {
    Domain domain = Domain::positive;
    int n = 0, m = 0, M = 0;
    int paths = 0;
    int steps = 0;
    std::uint64_t seed = 0;
    std::vector<double> times;           ///< steps + 1 points ending at T
    std::vector<double> states;          ///< [path][step][1+m+M] when recorded
    std::vector<double> controls;        ///< [path][step][n] for step < steps, when recorded
    std::vector<double> terminal_coord;  ///< wealth coordinate at T per path
    std::vector<char> excluded;          ///< 1 when the path hit a non-finite state
    int excluded_count = 0;
    double max_control_norm = 0.0;  ///< sup |u| over all simulated steps

    bool recorded() const { return !states.empty(); }
    int state_dim() const { return 1 + m + M; }
    double terminal_wealth(int path) const;
    double state(int path, int step, int component) const;

    void write_csv(std::ostream& os) const;
};

/// Euler-Maruyama for (wealth coordinate, eta, zeta), driven by n + N
/// independent Gaussian increments per step. On the positive domain the
/// log-wealth dynamics dq = (u'a~ - |v'u|^2/2) dt + u'v dw are used.
PathBundle simulate_paths(const MarketSpec& spec, const Strategy& strategy, int steps, int paths,
                          std::uint64_t seed, const SimulationOptions& opts = {});

}  // namespace mft
