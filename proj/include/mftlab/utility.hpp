#pragma once

#include "mftlab/types.hpp"

#include <cstdint>
#include <string>

namespace mft {

/// Terminal utility U of discounted wealth.
///
///   log                        U(x) = ln x                     (positive domain)
///   power(delta)               U(x) = x^delta / delta          (positive domain, delta < 1, != 0)
///   capped_linear_quadratic    U(x) = y - lambda y^2 / 2, y = min(x, cap), cap <= 1/lambda
///                              (either domain)
///   constant(c)                U(x) = c
class Utility {
public:
    enum class Family { log, power, capped_linear_quadratic, constant };

    static Utility log();
    static Utility power(double delta);
    static Utility capped_linear_quadratic(double lambda, double cap, Domain domain);
    static Utility constant(double c, Domain domain);

    Family family() const { return family_; }
    Domain domain() const { return domain_; }
    double delta() const { return p1_; }
    double lambda() const { return p1_; }
    double cap() const { return p2_; }
    double constant_value() const { return p1_; }
    std::string describe() const;

    /// U at discounted wealth x.
    double operator()(double x) const;

    /// U at the solver's wealth coordinate: x itself on the reals, e^q on the
    /// positive domain.
    double at_coordinate(double coord) const;

    /// Sampled membership check: max(0, U) <= c (1 + |x|), concavity of the
    /// sampled second differences, monotonicity. Returns an empty string when
    /// all checks pass, otherwise the first failing condition.
    std::string check_membership(int samples, std::uint64_t seed) const;

private:
    Utility(Family f, Domain d, double p1, double p2) : family_(f), domain_(d), p1_(p1), p2_(p2) {}

    Family family_;
    Domain domain_;
    double p1_;
    double p2_;
};

}  // namespace mft
