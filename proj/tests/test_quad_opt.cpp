#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "mftlab/funds.hpp"
#include "mftlab/quad_opt.hpp"

#include <cmath>
#include <random>

using namespace mft;
using mft::testing::mat;
using mft::testing::vec;

namespace {

BallProblem random_problem(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> alpha(-2.0, 2.0), rho(0.1, 3.0), len(0.0, 5.0);
    std::normal_distribution<double> g;
    Vec b(n);
    for (int i = 0; i < n; ++i) b[i] = g(rng);
    b *= len(rng) / b.norm();
    return BallProblem{alpha(rng), b, rho(rng)};
}

CoefficientSet coeffs(const Mat& v, const Vec& a_tilde, const Mat& beta_eta) {
    CoefficientSet c;
    c.a = a_tilde;
    c.a_tilde = a_tilde;
    c.v = v;
    c.f_eta = Vec::Zero(beta_eta.rows());
    c.beta_eta = beta_eta;
    c.beta_eta_tilde = Mat::Zero(beta_eta.rows(), 0);
    c.f_zeta = Vec();
    c.beta_zeta_tilde = Mat(0, 0);
    return c;
}

}  // namespace

TEST_CASE("solve_ball: interior with alpha = 1/2") {
    const BallSolution s = solve_ball({0.5, vec({0.3, -0.4}), 1.0});
    CHECK(s.case_tag == BallCase::interior);
    CHECK(s.p == vec({0.3, -0.4}));
    CHECK(*s.k == 1.0);
}

TEST_CASE("solve_ball: boundary along b with alpha = 1/2") {
    const BallSolution s = solve_ball({0.5, vec({3.0, 4.0}), 2.0});
    CHECK(s.case_tag == BallCase::boundary_along_b);
    CHECK(s.p[0] == doctest::Approx(1.2));
    CHECK(s.p[1] == doctest::Approx(1.6));
}

TEST_CASE("solve_ball: zero problem") {
    const BallSolution s = solve_ball({0.0, Vec::Zero(3), 1.5});
    CHECK(s.case_tag == BallCase::zero);
    CHECK(s.p.isZero(0.0));
    CHECK(s.objective_value == 0.0);
}

TEST_CASE("solve_ball: degenerate boundary uses the tie-break") {
    const BallSolution s = solve_ball({-1.0, Vec::Zero(3), 2.0}, vec({1.0, 0.0, 0.0}));
    CHECK(s.case_tag == BallCase::degenerate_boundary);
    CHECK_FALSE(s.k.has_value());
    CHECK(s.p == vec({2.0, 0.0, 0.0}));
    CHECK(s.objective_value == doctest::Approx(4.0));

    const BallSolution t = solve_ball({-1.0, Vec::Zero(2), 1.0}, vec({0.0, -3.0}));
    CHECK(t.p == vec({0.0, -1.0}));
    const BallSolution e = solve_ball({-1.0, Vec::Zero(2), 1.0});
    CHECK(e.p == vec({1.0, 0.0}));
}

TEST_CASE("solve_ball: nonpositive radius") {
    CHECK_THROWS_AS(solve_ball({1.0, vec({1.0}), 0.0}), InputError);
    CHECK_THROWS_AS(solve_ball({1.0, vec({1.0}), -1.0}), InputError);
}

TEST_CASE("brute_force_ball: examples") {
    const BruteForceResult z = brute_force_ball({0.5, Vec::Zero(2), 1.0}, 21);
    CHECK(z.p.norm() <= z.pitch);
    const BruteForceResult b = brute_force_ball({-1.0, vec({1.0, 0.0}), 1.0}, 41);
    CHECK(b.p[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.objective == doctest::Approx(2.0).epsilon(1e-9));
    CHECK_THROWS_AS(brute_force_ball({1.0, Vec::Zero(4), 1.0}, 11), InputError);
    CHECK_THROWS_AS(brute_force_ball({1.0, Vec::Zero(2), 1.0}, 10), InputError);
}

TEST_CASE("solve_ball: closed form against brute force and random feasible points") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + trial % 3;
        const BallProblem pr = random_problem(rng, n);
        const BallSolution s = solve_ball(pr);
        CHECK(s.p.norm() <= pr.rho + 1e-12);
        if (s.case_tag != BallCase::degenerate_boundary) {
            REQUIRE(s.k.has_value());
            CHECK((s.p - *s.k * pr.b).norm() == 0.0);
        }
        const BruteForceResult bf = brute_force_ball(pr, n == 3 ? 41 : 101);
        CHECK(s.objective_value >= bf.objective - 1e-12);
        CHECK(s.objective_value - bf.objective <= bf.error_bound);
        for (int k = 0; k < 200; ++k) {
            Vec q(n);
            for (int i = 0; i < n; ++i) q[i] = g(rng);
            q *= pr.rho * std::pow(u01(rng), 1.0 / n) / q.norm();
            CHECK(s.objective_value >= pr.objective(q) - 1e-12);
        }
    }
}

TEST_CASE("solve_ball: scale covariance and monotonicity in rho") {
    const BallProblem pr{0.8, vec({0.2, -0.1, 0.3}), 1.0};
    const BallSolution s = solve_ball(pr);
    REQUIRE(s.case_tag == BallCase::interior);
    const BallSolution s2 = solve_ball({0.8, 1.5 * pr.b, 1.0});
    CHECK((s2.p - 1.5 * s.p).norm() <= 1e-15);

    for (double alpha : {-1.0, 0.0, 0.3}) {
        double prev = -1e300;
        for (double rho = 0.1; rho < 3.0; rho += 0.1) {
            const double v = solve_ball({alpha, vec({1.0, 2.0}), rho}).objective_value;
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("solve_G0: interior control equals a~ with v = I") {
    const CoefficientSet c = coeffs(Mat::Identity(2, 2), vec({0.3, 0.1}), Mat(0, 2));
    const G0Solution g = solve_G0(1.0, -1.0, Vec(), c, 100.0, Domain::reals);
    CHECK(g.u[0] == doctest::Approx(0.3));
    CHECK(g.u[1] == doctest::Approx(0.1));
    CHECK(*g.kappa == doctest::Approx(1.0));
}

TEST_CASE("solve_G0: zero derivatives") {
    const CoefficientSet c = coeffs(mat({{0.2, 0.0}, {0.1, 0.3}}), vec({0.05, 0.02}), mat({{0.1, 0.2}}));
    const G0Solution g = solve_G0(0.0, 0.0, vec({0.0}), c, 1.0, Domain::reals);
    CHECK(g.u.isZero(0.0));
    CHECK(g.value == 0.0);
}

TEST_CASE("solve_G0: log utility in log-wealth coordinates gives Q a~") {
    const Mat v = mat({{0.2, 0.0}, {0.05, 0.25}});
    const Vec at = vec({0.06, 0.1});
    const CoefficientSet c = coeffs(v, at, Mat(0, 2));
    const G0Solution g = solve_G0(1.0, 0.0, Vec(), c, 100.0, Domain::positive);
    CHECK(g.alpha == doctest::Approx(0.5));
    const Vec expected = compute_Q(v) * at;
    CHECK((g.u - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("solve_G0: value matches the direct integrand") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        Mat v = Mat::Identity(3, 3) * 0.3;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < i; ++j) v(i, j) = 0.05 * g(rng);
        const CoefficientSet c = coeffs(v, vec({0.05 * g(rng), 0.05 * g(rng), 0.05 * g(rng)}),
                                        mat({{g(rng), g(rng), g(rng)}}));
        const double Jx = std::abs(g(rng)), Jxx = g(rng);
        const Vec Jxy = vec({g(rng)});
        for (Domain d : {Domain::reals, Domain::positive}) {
            const G0Solution s = solve_G0(Jx, Jxx, Jxy, c, 2.0, d);
            CHECK(s.value == doctest::Approx(g0_integrand(Jx, Jxx, Jxy, c, d, s.u)).epsilon(1e-9));
            CHECK((c.v.transpose() * s.u).squaredNorm() <= 2.0 * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("solve_G0: maximizer lies in span of psi_1..psi_m, Q a~ and the tie-break") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 200; ++trial) {
        Mat v = Mat::Identity(4, 4) * 0.25;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) v(i, j) = 0.03 * g(rng);
        Mat be(1, 4);
        for (int i = 0; i < 4; ++i) be(0, i) = 0.2 * g(rng);
        const CoefficientSet c = coeffs(v, vec({0.05, 0.03, -0.02, 0.04}), be);
        const Vec tb = vec({g(rng), g(rng), g(rng), g(rng)});
        const G0Solution s = solve_G0(g(rng), g(rng), vec({g(rng)}), c, 1.5, Domain::positive, tb);
        Mat funds(4, 3);
        funds.leftCols(2) = factor_directions(c);
        funds.col(2) = c.v.transpose().partialPivLu().solve(tb);
        CHECK(decompose(s.u, funds).relative_residual <= 1e-10);
    }
}

TEST_CASE("solve_G0: errors") {
    const CoefficientSet c = coeffs(Mat::Identity(2, 2), vec({0.1, 0.1}), Mat(0, 2));
    CHECK_THROWS_AS(solve_G0(1.0, 0.0, Vec(), c, 0.0, Domain::reals), InputError);
    CHECK_THROWS_AS(solve_G0(std::nan(""), 0.0, Vec(), c, 1.0, Domain::reals), NumericalError);
}
