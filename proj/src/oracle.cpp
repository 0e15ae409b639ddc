#include "mftlab/oracle.hpp"

#include "mftlab/funds.hpp"

#include <cmath>

namespace mft {

double MertonOracle::value(double q, double t) const {
    const double th2 = theta.squaredNorm();
    if (utility.family() == Utility::Family::log) return q + 0.5 * th2 * (T - t);
    const double d = utility.delta();
    return std::exp(d * q) / d * std::exp(d * th2 * (T - t) / (2.0 * (1.0 - d)));
}

double MertonOracle::value_at_wealth(double x, double t) const { return value(std::log(x), t); }

bool merton_oracle_available(const MarketSpec& spec, const Utility& utility) {
    return spec.has_constant_market_coefficients() && spec.domain == Domain::positive &&
           utility.domain() == Domain::positive &&
           (utility.family() == Utility::Family::log || utility.family() == Utility::Family::power);
}

MertonOracle merton_oracle(const MarketSpec& spec, const Utility& utility) {
    if (!spec.has_constant_market_coefficients())
        throw InputError("merton_oracle: a, v and r must be constant");
    if (!merton_oracle_available(spec, utility))
        throw InputError("merton_oracle: needs the positive domain with log or power utility");
    const CoefficientSet c = eval_coefficients(spec, spec.eta0, spec.zeta0, 0.0);
    MertonOracle o{Vec(), Vec(), spec.T, utility};
    o.theta = c.v.partialPivLu().solve(c.a_tilde);
    o.fraction = compute_Q(c.v) * c.a_tilde;
    if (utility.family() == Utility::Family::power) o.fraction /= (1.0 - utility.delta());
    return o;
}

}  // namespace mft
