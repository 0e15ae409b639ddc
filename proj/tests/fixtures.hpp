#pragma once

#include "mftlab/market_model.hpp"

namespace mft::testing {

/// Two uncorrelated stocks, v = diag(0.2, 0.25), a~ = (0.06, 0.1):
/// theta = (0.3, 0.4), |theta|^2 = 0.25, Q a~ = (1.5, 1.6).
inline MarketSpec merton_spec(double K = 4.0) {
    MarketSpec s = MarketSpec::zeros(2, 0, 0, 0);
    s.K = K;
    s.T = 1.0;
    s.x0 = 1.0;
    s.a = CoefficientFunction::constant((Vec(2) << 0.08, 0.12).finished());
    s.r = CoefficientFunction::constant(Mat::Constant(1, 1, 0.02));
    Mat v = Mat::Zero(2, 2);
    v(0, 0) = 0.2;
    v(1, 1) = 0.25;
    s.v = CoefficientFunction::constant(v);
    return s;
}

inline Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double x : r) m(i, j++) = x;
        ++i;
    }
    return m;
}

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

}  // namespace mft::testing
