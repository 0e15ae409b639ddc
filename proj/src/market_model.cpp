#include "mftlab/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace mft {

namespace {

constexpr double kSingularCond = 1e12;

void write_matrix(std::ostream& os, const Mat& x) {
    os << '[' << x.rows() << 'x' << x.cols();
    for (Eigen::Index i = 0; i < x.size(); ++i) os << ' ' << x.data()[i];
    os << ']';
}

void describe(std::ostream& os, const CoefficientFunction& f) {
    os << f.family_name();
    std::visit(
        [&](const auto& form) {
            using T = std::decay_t<decltype(form)>;
            if constexpr (std::is_same_v<T, CoefficientFunction::Constant>) {
                write_matrix(os, form.value);
            } else if constexpr (std::is_same_v<T, CoefficientFunction::Affine>) {
                write_matrix(os, form.value);
                for (const auto& d : form.dy) write_matrix(os, d);
                os << '|';
                for (const auto& d : form.dz) write_matrix(os, d);
            } else if constexpr (std::is_same_v<T, CoefficientFunction::BoundedSmooth>) {
                write_matrix(os, form.value);
                write_matrix(os, form.amplitude);
                write_matrix(os, form.gain_y);
                write_matrix(os, form.gain_z);
            } else {
                write_matrix(os, form.rate);
                write_matrix(os, form.level);
            }
        },
        f.form());
    os << ';';
}

double cond_number(const Mat& v) {
    Eigen::JacobiSVD<Mat> svd(v);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    const double smin = s[s.size() - 1];
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s[0] / smin;
}

double min_eigenvalue(const Mat& sym) {
    if (sym.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

/// Stacked norm of all seven coefficient functions at one point.
double stacked_norm(const CoefficientSet& c) {
    return std::sqrt(c.a_tilde.squaredNorm() + c.v.squaredNorm() + c.f_eta.squaredNorm() +
                     c.beta_eta.squaredNorm() + c.beta_eta_tilde.squaredNorm() +
                     c.f_zeta.squaredNorm() + c.beta_zeta_tilde.squaredNorm());
}

double stacked_distance(const CoefficientSet& p, const CoefficientSet& q) {
    return std::sqrt((p.a_tilde - q.a_tilde).squaredNorm() + (p.v - q.v).squaredNorm() +
                     (p.f_eta - q.f_eta).squaredNorm() + (p.beta_eta - q.beta_eta).squaredNorm() +
                     (p.beta_eta_tilde - q.beta_eta_tilde).squaredNorm() +
                     (p.f_zeta - q.f_zeta).squaredNorm() +
                     (p.beta_zeta_tilde - q.beta_zeta_tilde).squaredNorm());
}

std::string format_point(const SampledPoint& p) {
    std::ostringstream os;
    os << "(y=" << p.y.transpose().format(Eigen::IOFormat(6, Eigen::DontAlignCols, ",", ","))
       << ", z=" << p.z.transpose().format(Eigen::IOFormat(6, Eigen::DontAlignCols, ",", ","))
       << ", t=" << p.t << ")";
    return os.str();
}

}  // namespace

MarketSpec MarketSpec::zeros(int n, int m, int M, int N) {
    MarketSpec s;
    s.n = n;
    s.m = m;
    s.M = M;
    s.N = N;
    s.eta0 = Vec::Zero(m);
    s.zeta0 = Vec::Zero(M);
    s.a = CoefficientFunction::zeros(n, 1);
    s.v = CoefficientFunction::constant(Mat::Identity(n, n));
    s.r = CoefficientFunction::zeros(1, 1);
    s.f_eta = CoefficientFunction::zeros(m, 1);
    s.beta_eta = CoefficientFunction::zeros(m, n);
    s.beta_eta_tilde = CoefficientFunction::zeros(m, N);
    s.f_zeta = CoefficientFunction::zeros(M, 1);
    s.beta_zeta_tilde = CoefficientFunction::zeros(M, N);
    return s;
}

void MarketSpec::check() const {
    if (n < 1) throw InputError("n must be >= 1");
    if (m < 0 || M < 0 || N < 0) throw InputError("m, M, N must be >= 0");
    if (!(K > 0.0)) throw InputError("K must be > 0");
    if (!(T > 0.0)) throw InputError("horizon T must be > 0");
    if (domain == Domain::positive && !(x0 > 0.0))
        throw InputError("initial wealth must be > 0 on the positive domain");
    if (!std::isfinite(x0)) throw InputError("initial wealth must be finite");
    if (eta0.size() != m) throw InputError("initial eta must have length m");
    if (zeta0.size() != M) throw InputError("initial zeta must have length M");
    a.check_shape("a", n, 1, m, M, -1);
    v.check_shape("v", n, n, m, M, -1);
    r.check_shape("r", 1, 1, m, M, -1);
    f_eta.check_shape("f_eta", m, 1, m, M, m);
    beta_eta.check_shape("beta_eta", m, n, m, M, -1);
    beta_eta_tilde.check_shape("beta_eta_tilde", m, N, m, M, -1);
    f_zeta.check_shape("f_zeta", M, 1, m, M, M);
    beta_zeta_tilde.check_shape("beta_zeta_tilde", M, N, m, M, -1);
}

bool MarketSpec::has_constant_market_coefficients() const {
    return a.is_constant() && v.is_constant() && r.is_constant();
}

std::string MarketSpec::hash() const {
    std::ostringstream os;
    os << std::setprecision(17) << n << ',' << m << ',' << M << ',' << N << ',' << K << ',' << T
       << ',' << x0 << ',' << to_string(domain) << ';';
    write_matrix(os, eta0);
    write_matrix(os, zeta0);
    for (const auto* f : {&a, &v, &r, &f_eta, &beta_eta, &beta_eta_tilde, &f_zeta,
                          &beta_zeta_tilde})
        describe(os, *f);
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << std::hash<std::string>{}(os.str());
    return hex.str();
}

void eval_coefficients_into(const MarketSpec& spec, const Vec& y, const Vec& z, double t,
                            CoefficientSet& out) {
    if (y.size() != spec.m || z.size() != spec.M)
        throw InputError("eval_coefficients: state dimension mismatch");
    if (!(t >= 0.0 && t <= spec.T * (1.0 + 1e-12)))
        throw InputError("eval_coefficients: t outside [0, T]");
    const Vec none;
    out.a.resize(spec.n);
    out.a_tilde.resize(spec.n);
    out.v.resize(spec.n, spec.n);
    out.f_eta.resize(spec.m);
    out.beta_eta.resize(spec.m, spec.n);
    out.beta_eta_tilde.resize(spec.m, spec.N);
    out.f_zeta.resize(spec.M);
    out.beta_zeta_tilde.resize(spec.M, spec.N);

    spec.a.evaluate(y, z, none, out.a);
    spec.v.evaluate(y, z, none, out.v);
    Eigen::Matrix<double, 1, 1> r;
    spec.r.evaluate(y, z, none, r);
    out.r = r(0, 0);
    spec.f_eta.evaluate(y, z, y, out.f_eta);
    spec.beta_eta.evaluate(y, z, none, out.beta_eta);
    spec.beta_eta_tilde.evaluate(y, z, none, out.beta_eta_tilde);
    spec.f_zeta.evaluate(y, z, z, out.f_zeta);
    spec.beta_zeta_tilde.evaluate(y, z, none, out.beta_zeta_tilde);
    out.a_tilde = out.a.array() - out.r;
}

CoefficientSet eval_coefficients(const MarketSpec& spec, const Vec& y, const Vec& z, double t) {
    CoefficientSet c;
    eval_coefficients_into(spec, y, z, t, c);
    return c;
}

Mat build_B(const CoefficientSet& c) {
    const int m = c.m(), M = c.M(), n = c.n(), N = c.N();
    Mat B = Mat::Zero(m + M, n + N);
    B.topLeftCorner(m, n) = c.beta_eta;
    B.topRightCorner(m, N) = c.beta_eta_tilde;
    B.bottomRightCorner(M, N) = c.beta_zeta_tilde;
    return B;
}

Mat build_A(const CoefficientSet& c, const Vec& u) {
    const int n = c.n(), N = c.N(), d = c.m() + c.M();
    if (u.size() != n) throw InputError("build_A: u must have length n");
    Mat A = Mat::Zero(1 + d, n + N);
    A.block(0, 0, 1, n) = u.transpose() * c.v;
    A.bottomRows(d) = build_B(c);
    return A;
}

EllipticityWitness check_ellipticity(const CoefficientSet& c, double K, std::uint64_t seed) {
    const int n = c.n(), m = c.m();
    if (!(K > 0.0)) throw InputError("check_ellipticity: K must be > 0");
    Eigen::PartialPivLU<Mat> vt(c.v.transpose());
    if (cond_number(c.v) > kSingularCond)
        throw NumericalError("check_ellipticity: volatility not invertible");

    auto lambda_of = [&](const Vec& u) {
        const Mat A = build_A(c, u);
        return min_eigenvalue(A * A.transpose());
    };

    EllipticityWitness w;
    if (m < n) {
        // p = v' u must lie in the null space of beta_eta with |p|^2 = K.
        Vec p;
        if (m == 0 || c.beta_eta.isZero(0.0)) {
            p = Vec::Unit(n, n - 1);
        } else {
            Eigen::JacobiSVD<Mat> svd(c.beta_eta, Eigen::ComputeFullV);
            p = svd.matrixV().col(n - 1);
        }
        Eigen::Index imax = 0;
        p.cwiseAbs().maxCoeff(&imax);
        if (p[imax] < 0.0) p = -p;
        p *= std::sqrt(K) / p.norm();
        w.u = vt.solve(p);
        w.lambda_min = lambda_of(w.u);
        return w;
    }

    // m >= n: best of sampled boundary points.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    w.lambda_min = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < 4096; ++s) {
        Vec p(n);
        for (int i = 0; i < n; ++i) p[i] = gauss(rng);
        p *= std::sqrt(K) / p.norm();
        const Vec u = vt.solve(p);
        const double lam = lambda_of(u);
        if (lam > w.lambda_min) {
            w.lambda_min = lam;
            w.u = u;
        }
    }
    w.conclusive = w.lambda_min > 0.0;
    return w;
}

DeterminantCalibration calibrate_determinant_bound(const CoefficientSet& c, double K, int samples,
                                                   std::uint64_t seed) {
    const int n = c.n();
    Eigen::PartialPivLU<Mat> vt(c.v.transpose());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    DeterminantCalibration out;
    out.min_det = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Vec p(n);
        for (int i = 0; i < n; ++i) p[i] = gauss(rng);
        const double radius = std::sqrt(K) * std::pow(unif(rng), 1.0 / n);
        p *= radius / p.norm();
        const Vec u = vt.solve(p);
        const Mat A = build_A(c, u);
        const double det = (A * A.transpose()).determinant();
        out.min_det = std::min(out.min_det, det);
        const double lhs = u.squaredNorm() + u.norm();
        if (det <= 0.0) {
            if (lhs > 0.0) ++out.nonpositive;
            continue;
        }
        out.c = std::max(out.c, lhs / std::pow(det, 1.0 / (n + 1)));
    }
    return out;
}

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "status: " << (ok ? "OK" : "FAILED") << '\n';
    os << "samples: " << samples << '\n';
    os << "min_lambda_BBt (c1): " << min_lambda_BBt << '\n';
    os << "max_lipschitz_quotient: " << max_lipschitz << '\n';
    os << "max_growth_quotient: " << max_growth << '\n';
    os << "constant_C: " << constant_C << '\n';
    os << "max_vinv_norm: " << max_vinv_norm << '\n';
    os << "min_r: " << min_r << '\n';
    os << "min_ellipticity_witness_margin: " << min_witness_margin << '\n';
    os << "determinant_bound_c: " << det_bound_c << '\n';
    os << "determinant_positive: " << (det_positive ? "yes" : "no") << '\n';
    for (const auto& n : notes) os << "note: " << n << '\n';
    for (const auto& v : violations) os << "violation: " << v << '\n';
    return os.str();
}

ValidationReport validate_spec(const MarketSpec& spec, int sample_count, std::uint64_t seed,
                               double sample_radius) {
    if (sample_count < 1) throw InputError("validate_spec: sample_count must be >= 1");
    spec.check();

    ValidationReport rep;
    rep.samples = sample_count;
    rep.min_lambda_BBt = std::numeric_limits<double>::infinity();
    rep.min_r = std::numeric_limits<double>::infinity();
    rep.min_witness_margin = std::numeric_limits<double>::infinity();
    if (spec.m + spec.M == 0) rep.notes.emplace_back("no factors: ellipticity holds vacuously");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&]() {
        SampledPoint p;
        p.y = spec.eta0;
        p.z = spec.zeta0;
        for (Eigen::Index k = 0; k < p.y.size(); ++k) p.y[k] += sample_radius * unif(rng);
        for (Eigen::Index k = 0; k < p.z.size(); ++k) p.z[k] += sample_radius * unif(rng);
        p.t = spec.T * unit(rng);
        return p;
    };

    bool v_failed = false, r_failed = false, ell_failed = false, lip_failed = false;
    auto fail = [&](const std::string& msg, const SampledPoint& p) {
        rep.ok = false;
        rep.violations.push_back(msg + " at " + format_point(p));
        if (!rep.offending_point) rep.offending_point = p;
    };

    CoefficientSet c1, c2;
    for (int s = 0; s < sample_count; ++s) {
        const SampledPoint p = draw();
        eval_coefficients_into(spec, p.y, p.z, p.t, c1);

        if (!(c1.r >= 0.0)) {
            if (!r_failed) fail("short rate r >= 0 assumption violated (r = " +
                                    std::to_string(c1.r) + ")", p);
            r_failed = true;
        }
        rep.min_r = std::min(rep.min_r, c1.r);

        const double cond = cond_number(c1.v);
        if (!(cond < kSingularCond)) {
            if (!v_failed) fail("volatility not invertible (v block singular)", p);
            v_failed = true;
            continue;
        }
        const Mat vinv = c1.v.inverse();
        rep.max_vinv_norm = std::max(rep.max_vinv_norm, vinv.norm());

        if (spec.m + spec.M > 0) {
            const Mat B = build_B(c1);
            const double lam = min_eigenvalue(B * B.transpose());
            rep.min_lambda_BBt = std::min(rep.min_lambda_BBt, lam);
            if (!(lam > 1e-12)) {
                if (!ell_failed) fail("factor diffusion B B' is not uniformly elliptic", p);
                ell_failed = true;
            } else {
                const EllipticityWitness w = check_ellipticity(c1, spec.K);
                if (w.conclusive) {
                    rep.min_witness_margin =
                        std::min(rep.min_witness_margin, w.lambda_min / std::min(spec.K, lam));
                }
                const DeterminantCalibration dc = calibrate_determinant_bound(
                    c1, spec.K, 8, seed ^ (0x9e3779b97f4a7c15ULL * (s + 1)));
                rep.det_bound_c = std::max(rep.det_bound_c, dc.c);
                if (dc.nonpositive > 0) rep.det_positive = false;
            }
        }

        rep.max_growth =
            std::max(rep.max_growth, stacked_norm(c1) / (1.0 + p.y.norm() + p.z.norm()));

        // Lipschitz quotient against a second point at the same t.
        SampledPoint q = draw();
        q.t = p.t;
        eval_coefficients_into(spec, q.y, q.z, q.t, c2);
        const double dist = (p.y - q.y).norm() + (p.z - q.z).norm();
        if (dist > 0.0) {
            const double quot = stacked_distance(c1, c2) / dist;
            if (!std::isfinite(quot)) {
                if (!lip_failed) fail("coefficient Lipschitz quotient is not finite", p);
                lip_failed = true;
            } else {
                rep.max_lipschitz = std::max(rep.max_lipschitz, quot);
            }
        }
    }
    rep.constant_C = std::max(rep.max_lipschitz, rep.max_growth);
    if (spec.m + spec.M > 0 && !rep.det_positive)
        rep.notes.emplace_back(
            "det(A A') vanished for some nonzero u: the wealth row lies in the span of the "
            "factor rows");
    if (!std::isfinite(rep.min_witness_margin)) rep.min_witness_margin = 1.0;
    return rep;
}

}  // namespace mft
