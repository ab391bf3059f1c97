#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "levsim/model.hpp"

namespace levsim {

/// Fatal solver failure. Carries enough of the problem to reproduce it.
class ClearingError : public std::runtime_error {
  public:
    explicit ClearingError(const std::string& what) : std::runtime_error(what) {}
};

struct SolverSettings {
    double tol = 1e-8;            // |excess demand| tolerance, shares
    int max_iter = 200;           // bisection cap
    double p_min_factor = 1e-4;   // initial bracket: p_min_factor * V
    double p_max_factor = 10.0;   // initial bracket: max(p_max_factor*V, 2*xi/N)
    bool diagnose_multiplicity = false;  // coarse scan for multiple roots
};

/// One active fund entering this period's clearing: last period's balance
/// sheet plus the effective leverage cap already fixed for this period.
struct FundSlot {
    int id = 0;  // index into the configured roster
    double wealth_prev = 0.0;
    double shares_prev = 0.0;
    double r_perf_prev = 0.0;
    FundParams params;
    double cap = 1.0;
};

/// The one-period clearing problem: find p with noise demand xi/p plus fund
/// demand (evaluated at wealth-at-price) equal to the fixed supply N.
struct ClearingProblem {
    double xi = 0.0;
    double p_prev = 0.0;
    double V = 1.0;
    double N = 1000.0;
    std::vector<FundSlot> funds;
    // flow/lifecycle parameters the wealth-at-price map needs
    double a = 0.1;
    double b = 0.15;
    double r_b = 0.005;
    FlowMode flow_mode = FlowMode::kFixedPoint;
    double survival_threshold = 0.2;
};

/// Everything the wealth-at-price map yields for one fund at a candidate
/// price: period return, updated EMA, pre-flow value, flow, settled wealth,
/// and the demand the fund would post. `failing` marks funds whose settled
/// wealth falls below the survival threshold — they liquidate this period and
/// post zero demand.
struct FundQuote {
    double ret = 0.0;
    double r_perf = 0.0;
    double fund_value = 0.0;
    double flow = 0.0;
    double wealth = 0.0;
    double demand = 0.0;
    bool failing = false;
};

inline FundQuote quote_fund(const FundSlot& f, double p, const ClearingProblem& prob) {
    FundQuote q;
    q.ret = (f.wealth_prev > 0) ? f.shares_prev * (p - prob.p_prev) / f.wealth_prev : 0.0;
    q.r_perf = performance_update(f.r_perf_prev, q.ret, prob.a);
    q.fund_value = f.wealth_prev + (p - prob.p_prev) * f.shares_prev;
    if (q.fund_value < 0.0) {
        // Bust before flows: investors neither add nor withdraw.
        q.flow = 0.0;
        q.wealth = q.fund_value;
    } else {
        if (prob.flow_mode == FlowMode::kFixedPoint) {
            q.flow = std::max(prob.b * (q.r_perf - prob.r_b) * q.fund_value, -q.fund_value);
        } else {
            // Lagged mode: flows use only information available last period
            // (EMA rolled forward with a zero return, value at p_prev).
            const double rp = performance_update(f.r_perf_prev, 0.0, prob.a);
            q.flow = std::max(prob.b * (rp - prob.r_b) * f.wealth_prev, -f.wealth_prev);
        }
        q.wealth = q.fund_value + q.flow;
    }
    q.failing = q.wealth < prob.survival_threshold;
    q.demand = q.failing ? 0.0 : fund_demand(prob.V - p, q.wealth, p, f.params, f.cap);
    return q;
}

/// Excess demand (shares) at price p: xi/p + sum of fund demands - N.
/// Defaulting funds contribute zero demand: they liquidate at this period's
/// clearing price, which is what keeps settled holdings summing to N.
inline double excess_demand(double p, const ClearingProblem& prob) {
    if (!(p > 0)) throw std::invalid_argument("excess_demand: price must be > 0");
    double total = prob.xi / p;
    for (const auto& f : prob.funds) total += quote_fund(f, p, prob).demand;
    return total - prob.N;
}

struct ClearingResult {
    double price = 0.0;
    double residual = 0.0;  // excess demand at price, shares
    int iterations = 0;
    double bracket = 0.0;  // final bracket width
    int sign_changes = -1; // -1 when the diagnostic scan is off
};

namespace detail {

inline int count_sign_changes(const ClearingProblem& prob, double lo, double hi, int points) {
    int changes = 0;
    double prev = excess_demand(lo, prob);
    for (int i = 1; i <= points; ++i) {
        const double p = lo + (hi - lo) * static_cast<double>(i) / points;
        const double f = excess_demand(p, prob);
        if ((prev > 0 && f < 0) || (prev < 0 && f > 0)) ++changes;
        if (f != 0.0) prev = f;
    }
    return changes;
}

}  // namespace detail

/// Solve the clearing condition by bracketed bisection. The initial bracket
/// [p_min_factor*V, max(p_max_factor*V, 2*xi/N)] always straddles a root:
/// noise demand diverges as p -> 0 while every fund demand is nonnegative,
/// and all demand vanishes for large p. Deterministic for fixed inputs.
inline ClearingResult clear_price(const ClearingProblem& prob,
                                  const SolverSettings& settings = {}) {
    if (!(prob.xi > 0) || !(prob.p_prev > 0))
        throw std::invalid_argument("clear_price: xi and p_prev must be > 0");

    double lo = settings.p_min_factor * prob.V;
    double hi = std::max(settings.p_max_factor * prob.V, 2.0 * prob.xi / prob.N);
    double f_lo = excess_demand(lo, prob);
    double f_hi = excess_demand(hi, prob);
    for (int widen = 0; (!(f_lo > 0) || !(f_hi < 0)) && widen < 4; ++widen) {
        if (!(f_lo > 0)) {
            lo *= 0.1;
            f_lo = excess_demand(lo, prob);
        }
        if (!(f_hi < 0)) {
            hi *= 10.0;
            f_hi = excess_demand(hi, prob);
        }
    }
    if (!(f_lo > 0) || !(f_hi < 0)) {
        std::ostringstream oss;
        oss << "clear_price: no valid bracket after widening; xi=" << prob.xi
            << " p_prev=" << prob.p_prev << " funds=" << prob.funds.size()
            << " f(" << lo << ")=" << f_lo << " f(" << hi << ")=" << f_hi;
        throw ClearingError(oss.str());
    }
    const double scan_lo = lo, scan_hi = hi;

    ClearingResult res;
    for (int i = 0; i < settings.max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = excess_demand(mid, prob);
        res.iterations = i + 1;
        if (std::fabs(f_mid) <= settings.tol) {
            res.price = mid;
            res.residual = f_mid;
            res.bracket = hi - lo;
            if (settings.diagnose_multiplicity)
                res.sign_changes = detail::count_sign_changes(prob, scan_lo, scan_hi, 1024);
            return res;
        }
        if (f_mid > 0)
            lo = mid;
        else
            hi = mid;
    }
    std::ostringstream oss;
    oss << "clear_price: no convergence in " << settings.max_iter
        << " iterations; bracket=[" << lo << "," << hi << "] xi=" << prob.xi
        << " p_prev=" << prob.p_prev << " residual=" << excess_demand(0.5 * (lo + hi), prob);
    throw ClearingError(oss.str());
}

}  // namespace levsim
