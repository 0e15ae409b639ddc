#include "mftlab/utility.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace mft {

Utility Utility::log() { return Utility(Family::log, Domain::positive, 0.0, 0.0); }

Utility Utility::power(double delta) {
    if (!(delta < 1.0) || delta == 0.0 || !std::isfinite(delta))
        throw InputError("power utility needs delta < 1 and delta != 0");
    return Utility(Family::power, Domain::positive, delta, 0.0);
}

Utility Utility::capped_linear_quadratic(double lambda, double cap, Domain domain) {
    if (!(lambda > 0.0)) throw InputError("capped_linear_quadratic: lambda must be > 0");
    if (!(cap * lambda <= 1.0 + 1e-12))
        throw InputError("capped_linear_quadratic: cap must be <= 1/lambda for monotonicity");
    return Utility(Family::capped_linear_quadratic, domain, lambda, cap);
}

Utility Utility::constant(double c, Domain domain) {
    return Utility(Family::constant, domain, c, 0.0);
}

std::string Utility::describe() const {
    std::ostringstream os;
    switch (family_) {
        case Family::log: os << "log"; break;
        case Family::power: os << "power(delta=" << p1_ << ")"; break;
        case Family::capped_linear_quadratic:
            os << "capped_linear_quadratic(lambda=" << p1_ << ",cap=" << p2_ << ")";
            break;
        case Family::constant: os << "constant(" << p1_ << ")"; break;
    }
    os << " on " << to_string(domain_);
    return os.str();
}

double Utility::operator()(double x) const {
    switch (family_) {
        case Family::log: return std::log(x);
        case Family::power: return std::pow(x, p1_) / p1_;
        case Family::capped_linear_quadratic: {
            const double y = std::min(x, p2_);
            return y - 0.5 * p1_ * y * y;
        }
        case Family::constant: return p1_;
    }
    return std::nan("");
}

double Utility::at_coordinate(double coord) const {
    if (domain_ == Domain::reals) return (*this)(coord);
    switch (family_) {
        case Family::log: return coord;
        case Family::power: return std::exp(p1_ * coord) / p1_;
        default: return (*this)(std::exp(coord));
    }
}

std::string Utility::check_membership(int samples, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-6.0, 6.0);
    double growth = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double x = domain_ == Domain::positive ? std::exp(unif(rng)) : 20.0 * unif(rng);
        const double h = 1e-3 * std::max(1.0, std::abs(x));
        const double lo = domain_ == Domain::positive ? x * std::exp(-1e-3) : x - h;
        const double hi = domain_ == Domain::positive ? x * std::exp(1e-3) : x + h;
        const double fl = (*this)(lo), fm = (*this)(x), fh = (*this)(hi);
        if (!std::isfinite(fm)) return "U is not finite on its domain";
        if (fh < fm - 1e-12 * std::abs(fm) || fm < fl - 1e-12 * std::abs(fl))
            return "U is not nondecreasing";
        // Second difference on a possibly non-uniform triple.
        const double s1 = (fm - fl) / (x - lo), s2 = (fh - fm) / (hi - x);
        if (s2 > s1 + 1e-9 * (std::abs(s1) + 1.0)) return "U is not concave";
        growth = std::max(growth, std::max(0.0, fm) / (1.0 + std::abs(x)));
    }
    auto quotient = [&](double x) { return std::max(0.0, (*this)(x)) / (1.0 + std::abs(x)); };
    if (!std::isfinite(growth) || quotient(1e8) > 2.0 * quotient(1e4) + 1e-12)
        return "max(0, U) is not of linear growth";
    return {};
}

}  // namespace mft
