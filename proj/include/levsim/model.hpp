#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace levsim {

/// Raised when a configuration value violates a model invariant. The message
/// always starts with the offending key.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Per-fund strategy parameters. A fund buys beta * m dollars of the asset
/// per unit of wealth when the mispricing is m, until the position value hits
/// lambda_max times its wealth.
struct FundParams {
    double beta = 10.0;
    double lambda_max = 10.0;

    /// Mispricing at which the leverage cap starts to bind.
    double m_crit() const { return lambda_max / beta; }
};

enum class PolicyKind { kFixed, kVolatilityAdjusted };

/// How the lender sets the leverage cap each period. The adjusted variant
/// shrinks the cap when trailing volatility is high: cap = max(1,
/// lambda_max / (1 + kappa * sigma2_tau)).
struct LeveragePolicy {
    PolicyKind kind = PolicyKind::kFixed;
    double kappa = 100.0;
    long tau = 10;
};

/// Which trailing series feeds sigma2_tau for the adjusted policy.
enum class VarianceMode { kLogReturns, kPriceLevels };

/// Whether investor flows react to the price being solved for (the literal
/// composition of the wealth update) or to last period's information only.
enum class FlowMode { kFixedPoint, kLaggedPrice };

/// All exogenous parameters of a run.
struct ModelConfig {
    double V = 1.0;                  // perceived fundamental value
    double N = 1000.0;               // total asset supply (shares)
    double sigma = 0.035;            // noise volatility, log-cash units
    double rho = 0.99;               // mean reversion of the noise process
    std::vector<FundParams> funds = default_roster();
    double a = 0.1;                  // performance EMA weight
    double b = 0.15;                 // flow sensitivity
    double r_b = 0.005;              // benchmark return per timestep
    double W0 = 2.0;                 // initial fund wealth
    double survival_fraction = 0.1;  // default threshold as fraction of W0
    long T_reintro = 100;            // reintroduction delay, timesteps
    LeveragePolicy policy;
    long T = 100000;                 // horizon, timesteps
    std::uint64_t seed = 1;
    VarianceMode variance_mode = VarianceMode::kLogReturns;
    FlowMode flow_mode = FlowMode::kFixedPoint;

    /// The canonical roster: ten funds with aggression 5,10,...,50.
    static std::vector<FundParams> default_roster(double lambda_max = 10.0) {
        std::vector<FundParams> fs;
        for (int i = 1; i <= 10; ++i) fs.push_back({5.0 * i, lambda_max});
        return fs;
    }

    double survival_threshold() const { return survival_fraction * W0; }

    void validate() const {
        auto req = [](bool ok, const char* msg) {
            if (!ok) throw ConfigError(msg);
        };
        req(std::isfinite(V) && V > 0, "V: must be finite and > 0");
        req(std::isfinite(N) && N > 0, "N: must be finite and > 0");
        req(std::isfinite(sigma) && sigma >= 0, "sigma: must be finite and >= 0");
        req(std::isfinite(rho) && rho > 0 && rho <= 1, "rho: must lie in (0,1]");
        req(std::isfinite(a) && a > 0 && a < 1, "a: must lie in (0,1)");
        req(std::isfinite(b) && b >= 0, "b: must be finite and >= 0");
        req(std::isfinite(r_b), "r_b: must be finite");
        req(std::isfinite(W0) && W0 > 0, "W0: must be finite and > 0");
        req(std::isfinite(survival_fraction) && survival_fraction >= 0 && survival_fraction < 1,
            "survival_fraction: must lie in [0,1)");
        req(T_reintro >= 0, "T_reintro: must be >= 0");
        req(T >= 0, "T: must be >= 0");
        for (std::size_t h = 0; h < funds.size(); ++h) {
            const auto& f = funds[h];
            if (!(std::isfinite(f.beta) && f.beta > 0))
                throw ConfigError("funds[" + std::to_string(h) + "].beta: must be finite and > 0");
            if (!(std::isfinite(f.lambda_max) && f.lambda_max >= 1))
                throw ConfigError("funds[" + std::to_string(h) +
                                  "].lambda_max: must be >= 1 (cap below 1)");
        }
        if (policy.kind == PolicyKind::kVolatilityAdjusted) {
            req(std::isfinite(policy.kappa) && policy.kappa >= 0, "policy.kappa: must be >= 0");
            req(policy.tau >= 2, "policy.tau: must be >= 2");
        }
    }
};

enum class FundStatus { kActive, kDefaulted };

/// One fund's balance-sheet state as of the last settled period.
/// Invariant while active: wealth = shares * price + cash at the settlement
/// price (cash < 0 is a collateralized loan).
struct FundState {
    FundParams params;
    double wealth = 0.0;
    double shares = 0.0;
    double cash = 0.0;
    double r_perf = 0.0;
    FundStatus status = FundStatus::kActive;
    long reentry_time = 0;  // meaningful while defaulted

    static FundState fresh(const FundParams& p, double w0) {
        FundState f;
        f.params = p;
        f.wealth = w0;
        f.cash = w0;  // born fully in cash; wealth = shares*p + cash holds
        return f;
    }
};

/// Noise-trader state: the cash value spent on the asset.
struct NoiseTraderState {
    double xi = 0.0;
};

// ---------------------------------------------------------------------------
// Update rules (pure functions)
// ---------------------------------------------------------------------------

/// Advance the noise traders' cash: a mean-reverting random walk in logs with
/// fixed point V*N. Strictly positive for any finite inputs.
inline double noise_trader_step(double xi_prev, double chi, const ModelConfig& cfg) {
    if (!(std::isfinite(xi_prev) && xi_prev > 0))
        throw std::invalid_argument("noise_trader_step: xi_prev must be finite and > 0");
    if (!std::isfinite(chi)) throw std::invalid_argument("noise_trader_step: chi must be finite");
    return std::exp(cfg.rho * std::log(xi_prev) + cfg.sigma * chi +
                    (1.0 - cfg.rho) * std::log(cfg.V * cfg.N));
}

/// Dollar value of the position a fund wants at mispricing m = V - p: zero
/// when the asset is overpriced, beta*m*wealth below the cap, cap*wealth from
/// m = cap/beta on (ties go to the cap). The min keeps the value at or below
/// cap*wealth in floating point too, so settled cash of an unlevered fund is
/// never negative.
inline double fund_position_value(double m, double wealth, const FundParams& params,
                                  double cap) {
    if (m <= 0.0 || wealth <= 0.0) return 0.0;
    return std::min(params.beta * m * wealth, cap * wealth);
}

/// A fund's demand in shares: the position value at this price.
inline double fund_demand(double m, double wealth, double p, const FundParams& params,
                          double cap) {
    if (!(p > 0)) throw std::invalid_argument("fund_demand: price must be > 0");
    return fund_position_value(m, wealth, params, cap) / p;
}

/// Leverage ratio D*p / W. Undefined for non-positive wealth; the empty
/// optional signals the caller to route the fund to the default path.
inline std::optional<double> leverage_ratio(double shares, double p, double wealth) {
    if (!(wealth > 0)) return std::nullopt;
    return shares * p / wealth;
}

/// Exponential moving average of per-period returns.
inline double performance_update(double r_perf_prev, double r, double a) {
    return (1.0 - a) * r_perf_prev + a * r;
}

/// Investor flow into (positive) or out of (negative) the fund, proportional
/// to how the performance EMA compares with the benchmark and floored so
/// investors can never withdraw more than the fund holds.
inline double capital_flow(double r_perf, double fund_value, const ModelConfig& cfg) {
    return std::max(cfg.b * (r_perf - cfg.r_b) * fund_value, -fund_value);
}

/// Mark-to-market wealth update: carry gains on last period's position plus
/// the investor flow.
inline double wealth_update(double W_prev, double shares_prev, double p, double p_prev,
                            double flow) {
    return W_prev + (p - p_prev) * shares_prev + flow;
}

/// Apply survival/reintroduction rules. An active fund whose settled wealth
/// falls below the survival threshold is liquidated (shares sold at this
/// period's clearing price, loan repaid, shortfall borne by the lender) and
/// scheduled for rebirth; a defaulted fund whose delay has elapsed re-enters
/// with fresh wealth W0, no position and no track record.
inline FundState lifecycle_step(const FundState& fund, double W_new, long t,
                                const ModelConfig& cfg) {
    FundState out = fund;
    if (fund.status == FundStatus::kActive) {
        if (W_new < cfg.survival_threshold()) {
            out.status = FundStatus::kDefaulted;
            out.reentry_time = t + cfg.T_reintro;
            out.wealth = 0.0;
            out.shares = 0.0;
            out.cash = 0.0;
            out.r_perf = 0.0;
        } else {
            out.wealth = W_new;
        }
    } else if (fund.reentry_time <= t) {
        out = FundState::fresh(fund.params, cfg.W0);
    }
    return out;
}

/// This period's leverage cap for one fund under the configured policy.
/// Monotone non-increasing in sigma2_tau and always in [1, lambda_max].
inline double effective_cap(const FundParams& params, const LeveragePolicy& policy,
                            double sigma2_tau) {
    if (policy.kind == PolicyKind::kFixed) return params.lambda_max;
    return std::max(1.0, params.lambda_max / (1.0 + policy.kappa * sigma2_tau));
}

/// True when the position carried into this period exceeds the cap at the new
/// price and wealth — i.e. the lender demands a partial repayment. The forced
/// sale itself is realized by the cap in fund_demand; the flag is diagnostic.
/// A fund sitting exactly at its cap oscillates within an ulp of it, so the
/// comparison carries a 1e-12 relative guard against rounding ties.
inline bool margin_call_flag(double shares_prev, double p, double W_new, double cap) {
    if (!(W_new > 0)) throw std::invalid_argument("margin_call_flag: wealth must be > 0");
    return shares_prev * p > cap * W_new * (1.0 + 1e-12);
}

}  // namespace levsim
