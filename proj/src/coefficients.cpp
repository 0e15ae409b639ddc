#include "mftlab/coefficients.hpp"

#include <cmath>
#include <sstream>

namespace mft {

std::string to_string(Domain d) { return d == Domain::reals ? "reals" : "positive"; }

Domain domain_from_string(const std::string& s) {
    if (s == "reals") return Domain::reals;
    if (s == "positive") return Domain::positive;
    throw InputError("unknown domain '" + s + "' (expected reals or positive)");
}

CoefficientFunction::CoefficientFunction(Form form) : form_(std::move(form)) {}

CoefficientFunction CoefficientFunction::zeros(Eigen::Index rows, Eigen::Index cols) {
    return constant(Mat::Zero(rows, cols));
}

CoefficientFunction CoefficientFunction::constant(Mat value) {
    return CoefficientFunction(Constant{std::move(value)});
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Eigen::Index CoefficientFunction::rows() const {
    return std::visit(overloaded{[](const MeanReverting& f) { return f.rate.size(); },
                                 [](const auto& f) { return f.value.rows(); }},
                      form_);
}

Eigen::Index CoefficientFunction::cols() const {
    return std::visit(overloaded{[](const MeanReverting&) { return Eigen::Index{1}; },
                                 [](const auto& f) { return f.value.cols(); }},
                      form_);
}

const char* CoefficientFunction::family_name() const {
    return std::visit(overloaded{[](const Constant&) { return "constant"; },
                                 [](const Affine&) { return "affine"; },
                                 [](const BoundedSmooth&) { return "tanh"; },
                                 [](const MeanReverting&) { return "ou"; }},
                      form_);
}

bool CoefficientFunction::is_constant() const {
    if (std::holds_alternative<Constant>(form_)) return true;
    if (const auto* f = std::get_if<Affine>(&form_)) {
        for (const auto& d : f->dy)
            if (!d.isZero(0.0)) return false;
        for (const auto& d : f->dz)
            if (!d.isZero(0.0)) return false;
        return true;
    }
    if (const auto* f = std::get_if<BoundedSmooth>(&form_)) {
        return f->amplitude.isZero(0.0) || (f->gain_y.isZero(0.0) && f->gain_z.isZero(0.0));
    }
    return false;
}

void CoefficientFunction::check_shape(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                      int m, int M, int own_state_dim) const {
    auto fail = [&](const std::string& what) {
        std::ostringstream os;
        os << "coefficient '" << name << "' (" << family_name() << "): " << what;
        throw InputError(os.str());
    };
    auto shape_ok = [&](const Mat& x) { return x.rows() == rows && x.cols() == cols; };
    auto expect_shape = [&](const Mat& x, const char* part) {
        if (!shape_ok(x)) {
            std::ostringstream os;
            os << part << " has shape " << x.rows() << "x" << x.cols() << ", expected " << rows
               << "x" << cols;
            fail(os.str());
        }
    };
    std::visit(overloaded{[&](const Constant& f) { expect_shape(f.value, "value"); },
                          [&](const Affine& f) {
                              expect_shape(f.value, "value");
                              if (static_cast<int>(f.dy.size()) != m)
                                  fail("dy must list one matrix per eta component");
                              if (static_cast<int>(f.dz.size()) != M)
                                  fail("dz must list one matrix per zeta component");
                              for (const auto& d : f.dy) expect_shape(d, "dy entry");
                              for (const auto& d : f.dz) expect_shape(d, "dz entry");
                          },
                          [&](const BoundedSmooth& f) {
                              expect_shape(f.value, "value");
                              expect_shape(f.amplitude, "amplitude");
                              if (f.gain_y.size() != m) fail("gain_y must have length m");
                              if (f.gain_z.size() != M) fail("gain_z must have length M");
                          },
                          [&](const MeanReverting& f) {
                              if (own_state_dim < 0)
                                  fail("mean-reverting family is only valid for f_eta and f_zeta");
                              if (f.rate.size() != own_state_dim || f.level.size() != own_state_dim)
                                  fail("rate and level must match the factor dimension");
                              if (cols != 1) fail("mean-reverting family must be vector valued");
                          }},
               form_);
}

void CoefficientFunction::evaluate(const Vec& y, const Vec& z, const Vec& own_state,
                                   Eigen::Ref<Mat> out) const {
    std::visit(overloaded{[&](const Constant& f) { out = f.value; },
                          [&](const Affine& f) {
                              out = f.value;
                              for (Eigen::Index k = 0; k < y.size(); ++k) out += y[k] * f.dy[k];
                              for (Eigen::Index j = 0; j < z.size(); ++j) out += z[j] * f.dz[j];
                          },
                          [&](const BoundedSmooth& f) {
                              const double s = std::tanh(f.gain_y.dot(y) + f.gain_z.dot(z));
                              out = f.value;
                              out += s * f.amplitude;
                          },
                          [&](const MeanReverting& f) {
                              out = f.rate.cwiseProduct(f.level - own_state);
                          }},
               form_);
}

}  // namespace mft
