#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace levsim {

enum class DerivRegime { kBelowCap, kAboveCap };

/// Per-wealth demand derivative dD/dm at one mispricing level.
struct DerivativePoint {
    double m = 0.0;
    double dDdm_per_wealth = 0.0;
    DerivRegime regime = DerivRegime::kBelowCap;
};

/// Closed-form rate of buying/selling under an infinitesimal mispricing
/// change, for a fund in the self-financing state (position value beta*m*W
/// below the cap, lambda_max*W above it):
///   m <  m_crit:  beta (V - beta m^2) / (V - m)^2
///   m >= m_crit:  lambda_max (1 - lambda_max) / (V - m)^2
/// An infinite lambda_max never caps, so the below-cap branch applies for all
/// m. Ties at m_crit report the above-cap branch, matching the demand rule.
inline DerivativePoint demand_derivative(double m, double beta, double lambda_max, double V) {
    if (!(m >= 0) || !(m < V))
        throw std::invalid_argument("demand_derivative: need 0 <= m < V");
    const double denom = (V - m) * (V - m);
    if (std::isfinite(lambda_max) && m >= lambda_max / beta)
        return {m, lambda_max * (1.0 - lambda_max) / denom, DerivRegime::kAboveCap};
    return {m, beta * (V - beta * m * m) / denom, DerivRegime::kBelowCap};
}

/// Below-cap volatility damping relative to noise traders alone:
/// 1 / (1 + (beta/N)(C + D V)). Absent outside the formula's validity region
/// (non-positive denominator).
inline std::optional<double> damping_factor(double beta, double N, double C, double D,
                                            double V) {
    if (!(N > 0)) throw std::invalid_argument("damping_factor: N must be > 0");
    const double denom = 1.0 + beta / N * (C + D * V);
    if (!(denom > 0)) return std::nullopt;
    return 1.0 / denom;
}

/// At-cap volatility amplification: 1 / (1 - lambda_max V / N), read with the
/// dimensionless grouping lambda_max*V/N. Absent at or beyond the pole.
inline std::optional<double> amplification_factor(double lambda_max, double V, double N) {
    if (!(N > 0)) throw std::invalid_argument("amplification_factor: N must be > 0");
    const double x = lambda_max * V / N;
    if (x >= 1.0) return std::nullopt;
    return 1.0 / (1.0 - x);
}

}  // namespace levsim
