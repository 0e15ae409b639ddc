#pragma once

#include "mftlab/coefficients.hpp"

#include <optional>

namespace mft {

/// maximize  -alpha |p|^2 + p' b   subject to  |p| <= rho
struct BallProblem {
    double alpha = 0.0;
    Vec b;
    double rho = 1.0;

    double objective(const Vec& p) const { return -alpha * p.squaredNorm() + p.dot(b); }
};

enum class BallCase { interior, boundary_along_b, degenerate_boundary, zero };

const char* to_string(BallCase c);

struct BallSolution {
    Vec p;
    std::optional<double> k;  ///< p = k b; empty only in the degenerate case
    BallCase case_tag = BallCase::zero;
    double objective_value = 0.0;
};

/// Global maximizer in closed form. `tiebreak` is the direction used when
/// alpha < 0 and b = 0 (every boundary point is optimal); it is normalized
/// internally and e_1 is used when it is empty or zero.
BallSolution solve_ball(const BallProblem& problem, const Vec& tiebreak = Vec());

struct BruteForceResult {
    Vec p;
    double objective = 0.0;
    double pitch = 0.0;      ///< grid spacing h
    double error_bound = 0.0;  ///< L h with L = 2|alpha| rho + |b|
};

/// Exhaustive search over a uniform cube grid of [-rho, rho]^n, with points
/// outside the ball projected radially onto its boundary. Supports n <= 3.
BruteForceResult brute_force_ball(const BallProblem& problem, int grid_per_axis);

struct G0Solution {
    Vec u;                    ///< optimal control in the original coordinates
    Vec p;                    ///< v' u
    Vec b;                    ///< linear coefficient in p-space
    double alpha = 0.0;
    std::optional<double> kappa;  ///< u = kappa (v')^{-1} b when defined
    double value = 0.0;       ///< attained supremum of the control-dependent term
    BallCase case_tag = BallCase::zero;
};

/// Pointwise maximizer of the control-dependent part of the Bellman operator
///   sup_{u' v v' u <= K}  J_x u'a~ + 1/2 J_xx u'vv'u + u' v beta_eta' J_xy
/// (on the positive domain, with the extra -1/2 J_x u'vv'u of the log-wealth
/// dynamics). The change of variables p = v' u reduces it to a ball problem
/// with b = J_x v^{-1} a~ + beta_eta' J_xy and radius sqrt(K).
G0Solution solve_G0(double J_x, double J_xx, const Vec& J_xy, const CoefficientSet& coeffs,
                    double K, Domain domain, const Vec& tiebreak = Vec());

/// Same as solve_G0 but reuses an LU factorization of v' supplied by the caller.
G0Solution solve_G0(double J_x, double J_xx, const Vec& J_xy, const CoefficientSet& coeffs,
                    const Eigen::PartialPivLU<Mat>& vt_lu, double K, Domain domain,
                    const Vec& tiebreak = Vec());

/// The control-dependent integrand at a given u, evaluated directly.
double g0_integrand(double J_x, double J_xx, const Vec& J_xy, const CoefficientSet& coeffs,
                    Domain domain, const Vec& u);

}  // namespace mft
