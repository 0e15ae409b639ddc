#pragma once

#include "mftlab/types.hpp"

#include <variant>
#include <vector>

namespace mft {

/// One coefficient function F(y, z, t) of the factor market, drawn from a
/// closed catalogue of parametric families. Values are stored as matrices;
/// vector coefficients are (k x 1) and the short rate is (1 x 1).
class CoefficientFunction {
public:
    struct Constant {
        Mat value;
    };
    /// F0 + sum_k y_k * dy[k] + sum_j z_j * dz[j]
    struct Affine {
        Mat value;
        std::vector<Mat> dy;
        std::vector<Mat> dz;
    };
    /// F0 + F1 * tanh(gain_y . y + gain_z . z), entrywise amplitude.
    struct BoundedSmooth {
        Mat value;
        Mat amplitude;
        Vec gain_y;
        Vec gain_z;
    };
    /// rate o (level - state); only valid for the factor drifts, where
    /// `state` is eta (for f_eta) or zeta (for f_zeta).
    struct MeanReverting {
        Vec rate;
        Vec level;
    };
    using Form = std::variant<Constant, Affine, BoundedSmooth, MeanReverting>;

    CoefficientFunction() = default;
    explicit CoefficientFunction(Form form);

    static CoefficientFunction zeros(Eigen::Index rows, Eigen::Index cols);
    static CoefficientFunction constant(Mat value);

    const Form& form() const { return form_; }
    Eigen::Index rows() const;
    Eigen::Index cols() const;
    const char* family_name() const;
    bool is_constant() const;

    /// Checks internal shapes against (rows, cols) and the factor dimensions.
    /// `own_state_dim` is the dimension of the state a mean-reverting drift
    /// acts on, or -1 when mean reversion is not allowed for this slot.
    void check_shape(const std::string& name, Eigen::Index rows, Eigen::Index cols, int m, int M,
                     int own_state_dim) const;

    /// Writes F(y, z) into `out`, which must already have shape rows() x cols().
    /// `own_state` is the state used by a mean-reverting family.
    void evaluate(const Vec& y, const Vec& z, const Vec& own_state, Eigen::Ref<Mat> out) const;

private:
    Form form_{Constant{}};
};

/// All market coefficients evaluated at one (y, z, t).
struct CoefficientSet {
    Vec a;
    Vec a_tilde;
    Mat v;
    double r = 0.0;
    Vec f_eta;
    Mat beta_eta;
    Mat beta_eta_tilde;
    Vec f_zeta;
    Mat beta_zeta_tilde;

    int n() const { return static_cast<int>(a.size()); }
    int m() const { return static_cast<int>(f_eta.size()); }
    int M() const { return static_cast<int>(f_zeta.size()); }
    int N() const { return static_cast<int>(beta_eta_tilde.cols()); }
};

}  // namespace mft
