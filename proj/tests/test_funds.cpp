#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "mftlab/funds.hpp"

#include <random>

using namespace mft;
using mft::testing::mat;
using mft::testing::vec;

namespace {

Mat random_well_conditioned(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    Mat v = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v(i, j) += 0.2 * g(rng);
    return v;
}

CoefficientSet coeffs(const Mat& v, const Vec& a_tilde, const Mat& beta_eta) {
    CoefficientSet c;
    c.a = c.a_tilde = a_tilde;
    c.v = v;
    c.f_eta = Vec::Zero(beta_eta.rows());
    c.beta_eta = beta_eta;
    c.beta_eta_tilde = Mat::Zero(beta_eta.rows(), 0);
    c.f_zeta = Vec();
    c.beta_zeta_tilde = Mat(0, 0);
    return c;
}

}  // namespace

TEST_CASE("mu_of") {
    CHECK(mu_of(1, 5) == 2);
    CHECK(mu_of(0, 1) == 1);
    CHECK(mu_of(9, 4) == 4);
}

TEST_CASE("compute_Q: examples") {
    CHECK(compute_Q(Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3)));
    const Mat Q = compute_Q(mat({{2, 0}, {0, 4}}));
    CHECK(Q(0, 0) == doctest::Approx(1.0 / 4.0));
    CHECK(Q(1, 1) == doctest::Approx(1.0 / 16.0));
    CHECK(Q(0, 1) == 0.0);
    CHECK_THROWS_AS(compute_Q(mat({{1, 0}, {0, 1e-14}})), NumericalError);

    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
        const Mat v = random_well_conditioned(rng, 1 + k % 5);
        const Mat I = compute_Q(v) * (v * v.transpose());
        CHECK((I - Mat::Identity(v.rows(), v.cols())).norm() <= 1e-10);
        const Mat Q = compute_Q(v);
        CHECK((Q - Q.transpose()).norm() == 0.0);
    }
}

TEST_CASE("q_columns: examples") {
    CHECK(q_columns(Mat::Identity(3, 3)) == Mat::Identity(3, 3));
    const Mat q = q_columns(mat({{1, 1}, {0, 1}}));
    CHECK(q.isApprox(mat({{1, 0}, {-1, 1}})));
    std::mt19937_64 rng(2);
    for (int k = 0; k < 50; ++k) {
        const Mat v = random_well_conditioned(rng, 2 + k % 4);
        const Mat qc = q_columns(v);
        CHECK((compute_Q(v) * v - qc).norm() <= 1e-10 * qc.norm());
    }
}

TEST_CASE("fund_directions: classical fund") {
    const Mat v = mat({{0.2, 0}, {0, 0.25}});
    const FundPoint f = fund_directions(coeffs(v, vec({0.06, 0.1}), Mat(0, 2)));
    CHECK(f.mu == 1);
    CHECK(f.basis == FundBasis::factor_funds);
    const Mat psi = factor_directions(coeffs(v, vec({0.06, 0.1}), Mat(0, 2)));
    CHECK(psi(0, 0) == doctest::Approx(1.5));
    CHECK(psi(1, 0) == doctest::Approx(1.6));

    const FundPoint f3 = fund_directions(coeffs(Mat::Identity(3, 3) * 0.2, vec({0.06, 0.1, 0.0}), Mat(0, 3)));
    CHECK(f3.mu == 1);
    CHECK(f3.basis == FundBasis::factor_funds);
}

TEST_CASE("fund_directions: factor loading directions") {
    const FundPoint f = fund_directions(coeffs(Mat::Identity(3, 3), vec({0.1, 0.2, 0.3}), mat({{1, 0, 0}})));
    CHECK(f.mu == 2);
    CHECK(f.directions.col(0) == vec({1, 0, 0}));

    const Mat psi = factor_directions(coeffs(mat({{1, 1}, {0, 1}}), vec({0.0, 0.0}), mat({{1, 2}})));
    CHECK(psi(0, 0) == doctest::Approx(1.0));
    CHECK(psi(1, 0) == doctest::Approx(1.0));
    CHECK(psi.col(1).isZero(0.0));

    const FundPoint sb = fund_directions(coeffs(Mat::Identity(2, 2), vec({0.1, 0.2}), mat({{1, 2}})));
    CHECK(sb.basis == FundBasis::standard_basis);
    CHECK(sb.directions == Mat::Identity(2, 2));
}

TEST_CASE("fund_directions: two routes to the Merton fund, scaling") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int k = 0; k < 50; ++k) {
        const Mat v = random_well_conditioned(rng, 4);
        const Vec at = vec({g(rng), g(rng), g(rng), g(rng)});
        const Mat be = mat({{g(rng), g(rng), g(rng), g(rng)}});
        const Mat psi = factor_directions(coeffs(v, at, be));
        const Vec two = v.transpose().partialPivLu().solve(v.partialPivLu().solve(at));
        CHECK((psi.col(1) - two).norm() <= 1e-10 * two.norm());
        const Mat scaled = factor_directions(coeffs(v, 2.5 * at, be));
        CHECK((scaled.col(1) - 2.5 * psi.col(1)).norm() <= 1e-12 * psi.col(1).norm());
        CHECK(scaled.col(0) == psi.col(0));
        Eigen::JacobiSVD<Mat> svd(psi);
        CHECK(svd.singularValues()(1) > 0.0);
    }
}

TEST_CASE("decompose: examples") {
    const Mat funds = mat({{1, 0}, {1, 1}, {0, 2}});
    const SpanDecomposition d = decompose(3.0 * funds.col(0), funds);
    CHECK(d.coefficients[0] == doctest::Approx(3.0));
    CHECK(std::abs(d.coefficients[1]) <= 1e-14);
    CHECK(d.residual_norm <= 1e-14);

    const Mat ortho = mat({{1, 0}, {0, 1}, {0, 0}});
    const SpanDecomposition o = decompose(vec({0, 0, 1}), ortho);
    CHECK(o.residual_norm == doctest::Approx(1.0));
    CHECK(o.relative_residual == doctest::Approx(1.0));

    const SpanDecomposition two = decompose(2.0 * funds.col(0) + 5.0 * funds.col(1), funds);
    CHECK(two.coefficients[0] == doctest::Approx(2.0));
    CHECK(two.coefficients[1] == doctest::Approx(5.0));
    CHECK(two.residual_norm <= 1e-12);

    CHECK(decompose(Vec::Zero(3), funds).relative_residual == 0.0);
    const SpanDecomposition rd = decompose(vec({1, 1, 0}), mat({{1, 2}, {1, 2}, {0, 0}}));
    CHECK(rd.residual_norm <= 1e-14);
    CHECK_THROWS_AS(decompose(vec({1, 2}), mat({{1}, {0}, {0}})), InputError);
}

TEST_CASE("decompose: round trip recovers coefficients") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int k = 0; k < 100; ++k) {
        Mat f(5, 3);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 3; ++j) f(i, j) = g(rng);
        const Vec nu = vec({g(rng), g(rng), g(rng)});
        const SpanDecomposition d = decompose(f * nu, f);
        CHECK((d.coefficients - nu).cwiseAbs().maxCoeff() <= 1e-9);
    }
}
