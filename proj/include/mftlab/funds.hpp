#pragma once

#include "mftlab/coefficients.hpp"

namespace mft {

/// min(m + 1, n): the number of fund processes that span optimal portfolios.
int mu_of(int m, int n);

/// Q = (v v')^{-1}. Throws NumericalError when cond(v) exceeds `max_cond`.
Mat compute_Q(const Mat& v, double max_cond = 1e12);

/// Columns q_1..q_n of (v')^{-1}; equivalently Q v_i = q_i for each column v_i.
Mat q_columns(const Mat& v, double max_cond = 1e12);

enum class FundBasis { factor_funds, standard_basis };

/// Fund directions at one point, one per column.
struct FundPoint {
    int mu = 0;
    Mat directions;  ///< n x mu
    FundBasis basis = FundBasis::factor_funds;
};

/// psi_k = (v')^{-1} beta_eta_k' (k <= m) and psi_{m+1} = Q a~, always m + 1
/// columns regardless of n. These are the directions the Bellman maximizer is
/// written in.
Mat factor_directions(const CoefficientSet& c);

/// The mu fund directions: factor directions when m + 1 < n, otherwise the
/// standard basis e_1..e_n.
FundPoint fund_directions(const CoefficientSet& c);

struct SpanDecomposition {
    Vec coefficients;
    double residual_norm = 0.0;
    double relative_residual = 0.0;
};

/// Least-squares (minimum-norm for rank-deficient sets) coefficients of u in
/// the span of the columns of `funds`.
SpanDecomposition decompose(const Vec& u, const Mat& funds);

}  // namespace mft
