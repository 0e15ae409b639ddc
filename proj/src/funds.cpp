#include "mftlab/funds.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace mft {

namespace {

constexpr double kResidualFloor = 1e-30;

void check_conditioning(const Mat& v, double max_cond, const char* who) {
    if (v.rows() != v.cols() || v.rows() == 0)
        throw InputError(std::string(who) + ": volatility must be square and non-empty");
    Eigen::JacobiSVD<Mat> svd(v);
    const auto& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    const double cond = smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
    if (!(cond <= max_cond)) {
        std::ostringstream os;
        os << who << ": volatility matrix ill-conditioned (cond = " << cond
           << ", smallest singular value = " << smin << ", threshold = " << max_cond << ")";
        throw NumericalError(os.str());
    }
}

}  // namespace

int mu_of(int m, int n) {
    if (n < 1 || m < 0) throw InputError("mu_of: need n >= 1 and m >= 0");
    return std::min(m + 1, n);
}

Mat compute_Q(const Mat& v, double max_cond) {
    check_conditioning(v, max_cond, "compute_Q");
    const Mat vvt = v * v.transpose();
    Mat Q = vvt.llt().solve(Mat::Identity(v.rows(), v.rows()));
    return 0.5 * (Q + Q.transpose());
}

Mat q_columns(const Mat& v, double max_cond) {
    check_conditioning(v, max_cond, "q_columns");
    return v.transpose().partialPivLu().inverse();
}

Mat factor_directions(const CoefficientSet& c) {
    const int n = c.n(), m = c.m();
    Mat psi(n, m + 1);
    const Mat q = q_columns(c.v);
    if (m > 0) psi.leftCols(m) = q * c.beta_eta.transpose();
    psi.col(m) = compute_Q(c.v) * c.a_tilde;
    return psi;
}

FundPoint fund_directions(const CoefficientSet& c) {
    FundPoint f;
    f.mu = mu_of(c.m(), c.n());
    if (c.m() + 1 >= c.n()) {
        // The factor construction only reduces dimension when m + 1 < n.
        q_columns(c.v);
        f.basis = FundBasis::standard_basis;
        f.directions = Mat::Identity(c.n(), c.n());
        return f;
    }
    f.basis = FundBasis::factor_funds;
    f.directions = factor_directions(c);
    return f;
}

SpanDecomposition decompose(const Vec& u, const Mat& funds) {
    if (funds.cols() < 1) throw InputError("decompose: need at least one fund");
    if (funds.rows() != u.size()) throw InputError("decompose: dimension mismatch");
    SpanDecomposition d;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(funds);
    d.coefficients = cod.solve(u);
    d.residual_norm = (u - funds * d.coefficients).norm();
    const double un = u.norm();
    d.relative_residual = un > kResidualFloor ? d.residual_norm / un : 0.0;
    return d;
}

}  // namespace mft
