#include "mftlab/quad_opt.hpp"

#include <cmath>
#include <limits>

namespace mft {

const char* to_string(BallCase c) {
    switch (c) {
        case BallCase::interior: return "interior";
        case BallCase::boundary_along_b: return "boundary_along_b";
        case BallCase::degenerate_boundary: return "degenerate_boundary";
        case BallCase::zero: return "zero";
    }
    return "?";
}

BallSolution solve_ball(const BallProblem& pr, const Vec& tiebreak) {
    if (!(pr.rho > 0.0)) throw InputError("solve_ball: rho must be > 0");
    if (!pr.b.allFinite() || !std::isfinite(pr.alpha))
        throw InputError("solve_ball: non-finite problem data");

    const Eigen::Index n = pr.b.size();
    const double bnorm = pr.b.norm();
    BallSolution s;

    if (bnorm == 0.0) {
        if (pr.alpha >= 0.0) {
            s.case_tag = pr.alpha > 0.0 ? BallCase::interior : BallCase::zero;
            s.k = pr.alpha > 0.0 ? 1.0 / (2.0 * pr.alpha) : 0.0;
            s.p = Vec::Zero(n);
        } else {
            Vec d = tiebreak;
            if (d.size() != n || !(d.norm() > 0.0)) d = Vec::Unit(n, 0);
            s.case_tag = BallCase::degenerate_boundary;
            s.p = (pr.rho / d.norm()) * d;
        }
    } else {
        // |b| vs 2 alpha rho without tolerance: both formulas agree at equality.
        if (pr.alpha > 0.0 && bnorm <= 2.0 * pr.alpha * pr.rho) {
            s.case_tag = BallCase::interior;
            s.k = 1.0 / (2.0 * pr.alpha);
        } else {
            s.case_tag = BallCase::boundary_along_b;
            s.k = pr.rho / bnorm;
        }
        s.p = *s.k * pr.b;
    }
    s.objective_value = pr.objective(s.p);
    return s;
}

BruteForceResult brute_force_ball(const BallProblem& pr, int g) {
    const int n = static_cast<int>(pr.b.size());
    if (n < 1 || n > 3) throw InputError("brute_force_ball: only 1 <= n <= 3 is supported");
    if (g < 11) throw InputError("brute_force_ball: grid_per_axis must be >= 11");
    if (!(pr.rho > 0.0)) throw InputError("brute_force_ball: rho must be > 0");

    BruteForceResult out;
    out.pitch = 2.0 * pr.rho / (g - 1);
    out.error_bound = (2.0 * std::abs(pr.alpha) * pr.rho + pr.b.norm()) * out.pitch;
    out.objective = -std::numeric_limits<double>::infinity();

    Vec p(n);
    int idx[3] = {0, 0, 0};
    const int total = n == 1 ? g : (n == 2 ? g * g : g * g * g);
    for (int flat = 0; flat < total; ++flat) {
        int rem = flat;
        for (int d = 0; d < n; ++d) {
            idx[d] = rem % g;
            rem /= g;
        }
        for (int d = 0; d < n; ++d) p[d] = -pr.rho + idx[d] * out.pitch;
        const double norm = p.norm();
        if (norm > pr.rho) p *= pr.rho / norm;
        const double f = pr.objective(p);
        if (f > out.objective) {
            out.objective = f;
            out.p = p;
        }
    }
    return out;
}

namespace {

double alpha_for(double J_x, double J_xx, Domain domain) {
    // Positive domain: the log-wealth drift adds -1/2 J_x |p|^2.
    return domain == Domain::reals ? -0.5 * J_xx : 0.5 * (J_x - J_xx);
}

}  // namespace

G0Solution solve_G0(double J_x, double J_xx, const Vec& J_xy, const CoefficientSet& c,
                    const Eigen::PartialPivLU<Mat>& vt_lu, double K, Domain domain,
                    const Vec& tiebreak) {
    if (!(K > 0.0)) throw InputError("solve_G0: K must be > 0");
    if (!std::isfinite(J_x) || !std::isfinite(J_xx) || !J_xy.allFinite())
        throw NumericalError("solve_G0: non-finite value-function derivatives");
    if (J_xy.size() != c.m()) throw InputError("solve_G0: J_xy must have length m");

    G0Solution g;
    g.alpha = alpha_for(J_x, J_xx, domain);
    // vt_lu factors P v' = L U, so v = U' L' P.
    const Mat& lu = vt_lu.matrixLU();
    Vec w = lu.triangularView<Eigen::Upper>().transpose().solve(c.a_tilde);
    w = lu.triangularView<Eigen::UnitLower>().transpose().solve(w);
    g.b = J_x * (vt_lu.permutationP().transpose() * w);
    if (c.m() > 0) g.b.noalias() += c.beta_eta.transpose() * J_xy;
    if (!g.b.allFinite()) throw NumericalError("solve_G0: non-finite linear term");

    const BallSolution s = solve_ball(BallProblem{g.alpha, g.b, std::sqrt(K)}, tiebreak);
    g.p = s.p;
    g.kappa = s.k;
    g.case_tag = s.case_tag;
    g.value = s.objective_value;
    g.u = vt_lu.solve(g.p);
    return g;
}

G0Solution solve_G0(double J_x, double J_xx, const Vec& J_xy, const CoefficientSet& c, double K,
                    Domain domain, const Vec& tiebreak) {
    const Mat vt = c.v.transpose();
    Eigen::JacobiSVD<Mat> svd(vt);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv[sv.size() - 1] > 1e-12 * sv[0]))
        throw NumericalError("solve_G0: volatility matrix is singular");
    const Eigen::PartialPivLU<Mat> lu(vt);
    return solve_G0(J_x, J_xx, J_xy, c, lu, K, domain, tiebreak);
}

double g0_integrand(double J_x, double J_xx, const Vec& J_xy, const CoefficientSet& c,
                    Domain domain, const Vec& u) {
    const Vec p = c.v.transpose() * u;
    const double quad = p.squaredNorm();
    double val = J_x * u.dot(c.a_tilde) + 0.5 * J_xx * quad;
    if (domain == Domain::positive) val -= 0.5 * J_x * quad;
    if (c.m() > 0) val += p.dot(c.beta_eta.transpose() * J_xy);
    return val;
}

}  // namespace mft
