#pragma once

#include "mftlab/market_model.hpp"
#include "mftlab/utility.hpp"

namespace mft {

/// Closed-form optimum for constant a, v, r (the classical Merton problem),
/// stated in the log-wealth coordinate q = ln X.
///   log:       fraction Q a~,            J(q, t) = q + |theta|^2 (T - t) / 2
///   power(d):  fraction Q a~ / (1 - d),  J(q, t) = e^{d q}/d exp(d |theta|^2 (T - t) / (2 (1 - d)))
/// with theta = v^{-1} a~.
struct MertonOracle {
    Vec fraction;
    Vec theta;
    double T = 1.0;
    Utility utility;

    double value(double q, double t) const;
    double value_at_wealth(double x, double t) const;
};

/// Throws InputError unless a, v, r are constant, the domain is positive and
/// the utility is log or power.
MertonOracle merton_oracle(const MarketSpec& spec, const Utility& utility);

/// True when merton_oracle would accept the inputs.
bool merton_oracle_available(const MarketSpec& spec, const Utility& utility);

}  // namespace mft
