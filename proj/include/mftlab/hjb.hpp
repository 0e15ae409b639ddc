#pragma once

#include "mftlab/funds.hpp"
#include "mftlab/market_model.hpp"
#include "mftlab/quad_opt.hpp"
#include "mftlab/utility.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mft {

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int nodes = 3;

    double step() const { return (hi - lo) / (nodes - 1); }
    double node(int i) const { return i == nodes - 1 ? hi : lo + i * step(); }
};

/// Tensor grid over (x, y_1..y_m, z_1..z_M) with x the wealth coordinate
/// (wealth on the reals, q = ln X on the positive domain). Node tensors are
/// stored row-major with x as the slowest axis.
struct Grid {
    Axis x;
    std::vector<Axis> y;
    std::vector<Axis> z;
    int t_steps = 100;
    double T = 1.0;
    int store_every = 1;     ///< keep every k-th time slice (0 and T always kept)
    int max_state_dim = 3;

    int dim() const { return 1 + static_cast<int>(y.size() + z.size()); }
    const Axis& axis(int a) const;
    std::vector<int> shape() const;
    std::size_t node_count() const;
    std::size_t factor_node_count() const;  ///< nodes of the (y, z) sub-grid
    double dt() const { return T / t_steps; }
    std::vector<int> stored_steps() const;

    /// Multi-index of a flat node id, axes in (x, y..., z...) order.
    void unflatten(std::size_t node, int* idx) const;
    std::size_t flatten(const int* idx) const;
    bool interior(std::size_t node) const;
    void coordinates(std::size_t node, double& x, Vec& y, Vec& z) const;

    void check(const MarketSpec& spec) const;
    std::string describe() const;
};

/// Box grid per the far-field rule: wealth covers at least [X0/8, 8 X0]
/// (widened by 3 sqrt(K T) in the solver coordinate), factor axes cover at
/// least 4 simulated standard deviations around their path means.
/// `t_steps` = 0 selects the smallest stable step count.
Grid default_grid(const MarketSpec& spec, int x_nodes, int y_nodes, int z_nodes, int t_steps = 0,
                  int max_stored_slices = 101);

/// Value and first/second derivatives of one grid slice at a node.
struct NodeDerivatives {
    double J = 0.0;
    double Jx = 0.0;
    double Jxx = 0.0;
    Vec Jy, Jz, Jxy;
    Mat Jyy, Jzz, Jyz;
};

/// Central second-order differences inside, one-sided second-order at the
/// boundary, mixed terms as nested first differences.
NodeDerivatives derivatives_at(std::span<const double> J, const Grid& grid, std::size_t node);

struct DerivativeFields {
    std::vector<double> Jx, Jxx;
    std::vector<double> Jy, Jz, Jxy;  ///< node-major, m or M per node
    std::vector<double> Jyy, Jzz, Jyz;  ///< node-major, row-major blocks
};

DerivativeFields derivative_stencils(std::span<const double> J, const Grid& grid);

struct ValueGrid {
    Grid grid;
    std::vector<double> times;              ///< ascending stored slice times
    std::vector<std::vector<double>> J;     ///< one tensor per stored slice

    std::span<const double> slice(std::size_t k) const { return J[k]; }
};

struct PolicyGrid {
    Grid grid;
    int n = 0, m = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> u;      ///< node-major, n per node
    std::vector<std::vector<double>> hbar;   ///< node-major, m+1 per node
    std::vector<std::vector<double>> kappa;  ///< NaN where undefined
    std::vector<std::vector<std::uint8_t>> case_tag;  ///< BallCase per node
};

struct BellmanSolution {
    ValueGrid value;
    PolicyGrid policy;
    double dt = 0.0;
    double dt_max = 0.0;
    std::size_t degenerate_nodes = 0;
};

class StabilityError : public InputError {
public:
    StabilityError(const std::string& what, double required_dt, int required_steps) :
        InputError(what), required_dt(required_dt), required_steps(required_steps) {}
    double required_dt;
    int required_steps;
};

/// Largest explicit time step: 0.9 / (sum_a c_aa / h_a^2 + sum_{a != b} |c_ab| / (2 h_a h_b))
/// with c the diffusion matrix of the controlled state, maximized over the
/// constraint set and the factor nodes.
double stable_time_step(const MarketSpec& spec, const Grid& grid);

struct SolveOptions {
    unsigned threads = 0;
};

/// Backward explicit Euler for the Bellman equation with terminal value U,
/// pointwise control maximization by solve_G0 and linear extrapolation at
/// the box boundary.
BellmanSolution solve_bellman(const MarketSpec& spec, const Utility& utility, const Grid& grid,
                              const SolveOptions& opts = {});

/// One explicit backward step of length dt applied to a slice; boundary
/// nodes are filled by linear extrapolation.
std::vector<double> backward_step(const MarketSpec& spec, const Grid& grid,
                                  std::span<const double> J_next, double t_next, double dt);

/// Multilinear interpolation of a node-major field in (x, y, z), linear in t
/// between stored slices, clamped to the box.
class GridField {
public:
    GridField(const Grid& grid, const std::vector<double>& times,
              const std::vector<std::vector<double>>& data, int components);

    void evaluate(double x, const Vec& y, const Vec& z, double t, Vec& out) const;
    int components() const { return components_; }

private:
    const Grid* grid_;
    const std::vector<double>* times_;
    const std::vector<std::vector<double>>* data_;
    int components_;
};

struct FundPolicyReport {
    int mu = 0;
    FundBasis basis = FundBasis::factor_funds;
    std::vector<std::vector<double>> fund_coeffs;  ///< node-major, mu per node
    double max_relative_residual = 0.0;   ///< u against the fund set
    double max_factor_residual = 0.0;     ///< u against sum_k hbar_k psi_k
    double max_hbar_mismatch = 0.0;       ///< hbar vs kappa * recomputed derivatives
    std::size_t nodes_checked = 0;
    std::size_t degenerate_nodes = 0;
};

FundPolicyReport extract_fund_policy(const BellmanSolution& sol, const MarketSpec& spec);

struct ArgmaxSample {
    std::size_t slice = 0;
    std::size_t node = 0;
    bool informative = false;
    double relative_residual = 0.0;
    double objective_gap = 0.0;  ///< closed-form value minus numerical value
};

struct ArgmaxReport {
    int samples = 0;
    int informative = 0;
    int within_tolerance = 0;
    double tolerance = 1e-4;
    double max_residual = 0.0;
    double fraction_within() const {
        return informative == 0 ? 1.0 : static_cast<double>(within_tolerance) / informative;
    }
    std::vector<ArgmaxSample> records;
};

/// Maximizes the control-dependent integrand over the constraint set at random
/// interior nodes by directional sampling and projected gradient refinement,
/// without the closed form, and measures how far each numerical argmax lies
/// from the span of the fund directions.
ArgmaxReport unrestricted_argmax_check(const ValueGrid& value, const MarketSpec& spec,
                                       int samples, std::uint64_t seed, double tolerance = 1e-4);

struct ConvergenceRow {
    Grid grid;
    double h = 0.0;
    double dt = 0.0;
    double value_error = 0.0;     ///< max |J - J*| over the reporting region at t = 0
    double policy_error = 0.0;    ///< max |u - u*| / |u*| over the reporting region at t = 0
    double center_value = 0.0;
    double center_relative_error = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double value_order = 0.0;
    double policy_order = 0.0;
    bool exact = false;   ///< every error at round-off level; orders reported as +inf
    double c_disc = 0.0;  ///< max value_error / (h + dt)

    std::string to_text() const;
};

/// Solves the oracle problem on each grid and fits error ~ h^order.
/// `reporting_halfwidth` bounds the region |x - x0| around the initial
/// coordinate where errors are measured.
ConvergenceStudy convergence_study(const MarketSpec& spec, const Utility& utility,
                                   const std::vector<Grid>& grids,
                                   double reporting_halfwidth = 2.0794415416798357);

void write_value_csv(const ValueGrid& v, std::ostream& os);
void write_policy_csv(const PolicyGrid& p, std::ostream& os);

/// Little-endian binary layout:
///   "MFTGRID1" | u32 kind (0 value, 1 policy) | u32 dims
///   dims x (f64 lo, f64 hi, u64 nodes) | u64 slices | f64 times[slices]
///   u64 components | f64 data[slices][nodes][components], row-major nodes
void write_value_binary(const ValueGrid& v, std::ostream& os);
void write_policy_binary(const PolicyGrid& p, std::ostream& os);

struct BinaryGrid {
    std::uint32_t kind = 0;
    std::vector<Axis> axes;
    std::vector<double> times;
    std::uint64_t components = 0;
    std::vector<double> data;
};

BinaryGrid read_grid_binary(std::istream& is);

}  // namespace mft
