#pragma once

#include "mftlab/coefficients.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mft {

/// Parametric description of one factor-diffusion market.
///
/// Stocks: dS_i = S_i (a_i dt + sum_j v_ij dw_j). The factors follow
///   d eta  = f_eta dt + beta_eta dw + beta_eta_tilde dw~
///   d zeta = f_zeta dt + beta_zeta_tilde dw~
/// with w (n-dim) and w~ (N-dim) independent. All coefficients are functions
/// of (eta, zeta, t).
struct MarketSpec {
    int n = 1;
    int m = 0;
    int M = 0;
    int N = 0;
    double K = 1.0;   ///< constraint level for u' v v' u <= K
    double T = 1.0;   ///< horizon, years
    double x0 = 1.0;  ///< initial discounted wealth
    Vec eta0;
    Vec zeta0;
    Domain domain = Domain::positive;

    CoefficientFunction a;                ///< appreciation rates, n x 1
    CoefficientFunction v;                ///< volatility, n x n
    CoefficientFunction r;                ///< short rate, 1 x 1
    CoefficientFunction f_eta;            ///< m x 1
    CoefficientFunction beta_eta;         ///< m x n
    CoefficientFunction beta_eta_tilde;   ///< m x N
    CoefficientFunction f_zeta;           ///< M x 1
    CoefficientFunction beta_zeta_tilde;  ///< M x N

    /// Builds a spec with every coefficient zero except v = I.
    static MarketSpec zeros(int n, int m, int M, int N);

    /// Throws InputError when dimensions or coefficient shapes are inconsistent.
    void check() const;

    /// True when every coefficient except the factor drifts is constant, so
    /// a, v and r do not move with the factors.
    bool has_constant_market_coefficients() const;

    /// Stable textual digest of all fields.
    std::string hash() const;
};

CoefficientSet eval_coefficients(const MarketSpec& spec, const Vec& y, const Vec& z, double t);

/// Allocation-free variant for inner loops; `out` is resized on first use.
void eval_coefficients_into(const MarketSpec& spec, const Vec& y, const Vec& z, double t,
                            CoefficientSet& out);

/// B = [beta_eta | beta_eta_tilde ; 0 | beta_zeta_tilde], (m+M) x (n+N).
Mat build_B(const CoefficientSet& c);

/// Diffusion matrix of the controlled (wealth, eta, zeta) system:
/// first row (u' v, 0), remaining rows B. Shape (1+m+M) x (n+N).
Mat build_A(const CoefficientSet& c, const Vec& u);

struct EllipticityWitness {
    double lambda_min = 0.0;
    Vec u;
    bool conclusive = true;
};

/// Finds u on the boundary of {u' v v' u <= K} with beta_eta v' u = 0 and
/// reports lambda_min(A(u) A(u)'). For m >= n no such u exists in general and
/// a sampled search over the boundary is used instead; the result is marked
/// inconclusive if every sample gives a non-positive lambda_min.
EllipticityWitness check_ellipticity(const CoefficientSet& c, double K,
                                     std::uint64_t seed = 0x5eed);

struct SampledPoint {
    Vec y;
    Vec z;
    double t = 0.0;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
    std::vector<std::string> notes;
    int samples = 0;
    double min_lambda_BBt = 0.0;  ///< c1 estimate; +inf when m = M = 0
    double max_lipschitz = 0.0;
    double max_growth = 0.0;      ///< max |F| / (1 + |y| + |z|)
    double constant_C = 0.0;      ///< max(max_lipschitz, max_growth)
    double max_vinv_norm = 0.0;
    double min_r = 0.0;
    double min_witness_margin = 0.0;  ///< min over samples of lambda_min(AA')/min(K, c1)
    double det_bound_c = 0.0;         ///< calibrated c in |u|^2+|u| <= c det(AA')^{1/(n+1)}
    bool det_positive = true;
    std::optional<SampledPoint> offending_point;

    std::string to_text() const;
};

/// Sampled check of the standing assumptions (r >= 0, invertible bounded v,
/// Lipschitz / linear growth, B B' >= c1 I) around the initial factor state.
ValidationReport validate_spec(const MarketSpec& spec, int sample_count, std::uint64_t seed,
                               double sample_radius = 3.0);

struct DeterminantCalibration {
    double c = 0.0;           ///< max of (|u|^2+|u|) / det(AA')^{1/(n+1)}
    double min_det = 0.0;     ///< over sampled nonzero u
    int nonpositive = 0;      ///< samples with det(AA') <= 0 and u != 0
};

/// Calibration pass for the bound |u|^2 + |u| <= c det(A A')^{1/(n+1)} on
/// u in the constraint set, at the given coefficients.
DeterminantCalibration calibrate_determinant_bound(const CoefficientSet& c, double K, int samples,
                                                   std::uint64_t seed);

}  // namespace mft
