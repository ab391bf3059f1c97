#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "levsim/clearing.hpp"
#include "levsim/model.hpp"
#include "levsim/rng.hpp"
#include "levsim/stats.hpp"
#include "levsim/version.hpp"

namespace levsim {

class EngineError : public std::runtime_error {
  public:
    explicit EngineError(const std::string& what) : std::runtime_error(what) {}
};

/// Everything observable about one settled timestep.
struct StepRecord {
    long t = 0;
    double price = 0.0;
    double log_return = 0.0;  // log p(t) - log p(t-1)
    double xi = 0.0;
    double mispricing = 0.0;  // V - p(t)
    double agg_leverage = 0.0;  // sum D*p / sum W over active funds

    struct PerFund {
        double wealth = 0.0;
        double shares = 0.0;
        double cash = 0.0;
        double leverage = 0.0;
        double flow = 0.0;
        double ret = 0.0;
        double cap = 0.0;
        bool margin_call = false;
        bool defaulted = false;  // defaulted during this step
    };
    std::vector<PerFund> funds;
};

enum class EventKind { kDefault, kRebirth, kMarginCall };

struct Event {
    long t = 0;
    int fund = 0;
    EventKind kind = EventKind::kDefault;
};

inline const char* event_name(EventKind k) {
    switch (k) {
        case EventKind::kDefault: return "default";
        case EventKind::kRebirth: return "rebirth";
        default: return "margin_call";
    }
}

/// Whole-run per-fund tallies, kept even when full records are not.
struct FundTally {
    double pnl = 0.0;          // sum over active steps of (p - p_prev) * shares_prev
    double wealth_base = 0.0;  // sum over active steps of W(t-1)
    double rperf_sum = 0.0;    // sum of settled r_perf over surviving steps
    long active_steps = 0;
    long margin_calls = 0;
    long defaults = 0;
    long rebirths = 0;
    double min_cash = std::numeric_limits<double>::infinity();

    /// Capital-weighted investor return: total trading P&L (net of flows)
    /// divided by the summed capital that earned it.
    std::optional<double> investor_return() const {
        if (!(wealth_base > 0)) return std::nullopt;
        return pnl / wealth_base;
    }
    std::optional<double> mean_r_perf() const {
        if (active_steps == 0) return std::nullopt;
        return rperf_sum / static_cast<double>(active_steps);
    }
};

struct Provenance {
    std::uint64_t seed = 0;
    SolverSettings solver;
    int acf_max_lag = 50;
    double tail_fraction = 0.025;
    std::string version = kVersion;
};

/// Complete output of one run.
struct RunArtifact {
    ModelConfig config;
    std::vector<StepRecord> records;  // empty when records were not kept
    std::vector<Event> events;
    std::vector<double> prices;  // p(0) .. p(T)
    std::vector<FundTally> fund_tallies;
    RunSummary summary;
    Provenance provenance;

    long count_events(EventKind k) const {
        long n = 0;
        for (const auto& e : events)
            if (e.kind == k) ++n;
        return n;
    }
};

struct RunOptions {
    bool keep_records = true;
    SolverSettings solver;
    int acf_max_lag = 50;
    double tail_fraction = 0.025;
    const std::vector<double>* chi_in = nullptr;  // imported shock series
    std::vector<double>* chi_out = nullptr;       // exported shock series
};

/// Sequential state of one simulation. Plain value type: copyable, no shared
/// state, deterministic given (config, shock sequence).
class Simulation {
  public:
    explicit Simulation(const ModelConfig& cfg, SolverSettings solver = {})
        : cfg_(cfg), solver_(solver), rng_(cfg.seed) {
        cfg_.validate();
        noise_.xi = cfg_.V * cfg_.N;
        p_prev_ = cfg_.V;
        for (const auto& fp : cfg_.funds) funds_.push_back(FundState::fresh(fp, cfg_.W0));
        tallies_.assign(funds_.size(), FundTally{});
        if (cfg_.variance_mode == VarianceMode::kPriceLevels) window_.push_back(p_prev_);
    }

    const ModelConfig& config() const { return cfg_; }
    long t() const { return t_; }
    double price() const { return p_prev_; }
    double xi() const { return noise_.xi; }
    const std::vector<FundState>& funds() const { return funds_; }
    const std::vector<Event>& events() const { return events_; }
    std::vector<Event> take_events() { return std::move(events_); }

    /// Trailing variance feeding the leverage policy, from data up to t-1.
    double sigma2_tau() const {
        const std::size_t n = window_.size();
        if (n < 2) return 0.0;
        double mean = 0.0;
        for (double x : window_) mean += x;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double x : window_) ss += (x - mean) * (x - mean);
        return ss / static_cast<double>(n - 1);
    }

    /// Advance one period with the supplied standard-normal shock.
    StepRecord step(double chi) {
        const long t = t_ + 1;
        noise_.xi = noise_trader_step(noise_.xi, chi, cfg_);

        const double sigma2 = sigma2_tau();
        const std::size_t n_funds = funds_.size();
        std::vector<double> caps(n_funds);
        for (std::size_t h = 0; h < n_funds; ++h)
            caps[h] = effective_cap(funds_[h].params, cfg_.policy, sigma2);

        ClearingProblem prob;
        prob.xi = noise_.xi;
        prob.p_prev = p_prev_;
        prob.V = cfg_.V;
        prob.N = cfg_.N;
        prob.a = cfg_.a;
        prob.b = cfg_.b;
        prob.r_b = cfg_.r_b;
        prob.flow_mode = cfg_.flow_mode;
        prob.survival_threshold = cfg_.survival_threshold();
        for (std::size_t h = 0; h < n_funds; ++h) {
            if (funds_[h].status != FundStatus::kActive) continue;
            prob.funds.push_back(FundSlot{static_cast<int>(h), funds_[h].wealth,
                                          funds_[h].shares, funds_[h].r_perf,
                                          funds_[h].params, caps[h]});
        }

        ClearingResult cleared;
        try {
            cleared = clear_price(prob, solver_);
        } catch (const ClearingError& e) {
            throw EngineError(std::string(e.what()) + "\n  at " + dump_state(t, chi));
        }
        const double p = cleared.price;

        StepRecord rec;
        rec.t = t;
        rec.price = p;
        rec.log_return = std::log(p) - std::log(p_prev_);
        rec.xi = noise_.xi;
        rec.mispricing = cfg_.V - p;
        rec.funds.resize(n_funds);

        // Settle every fund that took part in the clearing at the solved
        // price, using the identical wealth-at-price map.
        std::vector<bool> traded(n_funds, false);
        for (const auto& slot : prob.funds) {
            const std::size_t h = static_cast<std::size_t>(slot.id);
            FundState& f = funds_[h];
            auto& pf = rec.funds[h];
            const FundQuote q = quote_fund(slot, p, prob);
            pf.ret = q.ret;
            pf.flow = q.flow;

            FundTally& tally = tallies_[h];
            tally.pnl += (p - p_prev_) * slot.shares_prev;
            tally.wealth_base += slot.wealth_prev;
            ++tally.active_steps;

            // Flag on pre-flow wealth D(t-1)p(t) + C(t-1): an unlevered fund
            // (cap 1, cash >= 0) can then never trip it.
            if (q.fund_value > 0 &&
                margin_call_flag(slot.shares_prev, p, q.fund_value, slot.cap)) {
                pf.margin_call = true;
                ++tally.margin_calls;
                events_.push_back({t, slot.id, EventKind::kMarginCall});
            }
            if (q.failing) {
                f = lifecycle_step(f, q.wealth, t, cfg_);
                pf.defaulted = true;
                ++tally.defaults;
                events_.push_back({t, slot.id, EventKind::kDefault});
            } else {
                f.wealth = q.wealth;
                f.r_perf = q.r_perf;
                // Same floats as the demand the solver saw: value/p shares,
                // cash = wealth - value (>= 0 whenever the cap is 1).
                const double value =
                    fund_position_value(cfg_.V - p, q.wealth, f.params, slot.cap);
                f.shares = value / p;
                f.cash = q.wealth - value;
                tally.rperf_sum += q.r_perf;
                tally.min_cash = std::min(tally.min_cash, f.cash);
                traded[h] = true;
            }
        }

        // Reintroductions happen after clearing; a reborn fund first trades
        // next period, so cleared demand always matches settled holdings.
        for (std::size_t h = 0; h < n_funds; ++h) {
            FundState& f = funds_[h];
            if (f.status == FundStatus::kDefaulted && !rec.funds[h].defaulted &&
                f.reentry_time <= t) {
                f = lifecycle_step(f, 0.0, t, cfg_);
                ++tallies_[h].rebirths;
                events_.push_back({t, static_cast<int>(h), EventKind::kRebirth});
            }
        }

        double w_sum = 0.0, pos_sum = 0.0;
        for (std::size_t h = 0; h < n_funds; ++h) {
            const FundState& f = funds_[h];
            auto& pf = rec.funds[h];
            pf.cap = caps[h];
            if (f.status == FundStatus::kActive) {
                pf.wealth = f.wealth;
                pf.shares = f.shares;
                pf.cash = f.cash;
                pf.leverage = traded[h] ? leverage_ratio(f.shares, p, f.wealth).value_or(0.0)
                                        : 0.0;
                w_sum += f.wealth;
                pos_sum += f.shares * p;
            }
        }
        rec.agg_leverage = (w_sum > 0) ? pos_sum / w_sum : 0.0;

        if (cfg_.variance_mode == VarianceMode::kLogReturns)
            window_.push_back(rec.log_return);
        else
            window_.push_back(p);
        while (static_cast<long>(window_.size()) > cfg_.policy.tau) window_.pop_front();

        p_prev_ = p;
        t_ = t;
        return rec;
    }

    /// Advance one period drawing the shock from the run's own generator.
    StepRecord step() { return step(rng_.normal(static_cast<std::uint64_t>(t_))); }

    const std::vector<FundTally>& tallies() const { return tallies_; }

  private:
    std::string dump_state(long t, double chi) const {
        std::ostringstream oss;
        oss << "t=" << t << " chi=" << chi << " xi=" << noise_.xi << " p_prev=" << p_prev_
            << " seed=" << cfg_.seed << " funds:";
        for (const auto& f : funds_) {
            oss << " {W=" << f.wealth << " D=" << f.shares << " C=" << f.cash
                << " status=" << (f.status == FundStatus::kActive ? "active" : "defaulted")
                << "}";
        }
        return oss.str();
    }

    ModelConfig cfg_;
    SolverSettings solver_;
    CounterRng rng_;
    long t_ = 0;
    NoiseTraderState noise_;
    double p_prev_ = 0.0;
    std::vector<FundState> funds_;
    std::vector<FundTally> tallies_;
    std::deque<double> window_;
    std::vector<Event> events_;
};

/// Run the full horizon from the documented initial conditions
/// (xi = V*N, p = V, fresh funds) and attach summary statistics.
inline RunArtifact run(const ModelConfig& cfg, const RunOptions& opts = {}) {
    Simulation sim(cfg, opts.solver);

    if (opts.chi_in && static_cast<long>(opts.chi_in->size()) < cfg.T)
        throw EngineError("run: imported shock series shorter than horizon");

    RunArtifact art;
    art.config = sim.config();
    art.provenance.seed = cfg.seed;
    art.provenance.solver = opts.solver;
    art.provenance.acf_max_lag = opts.acf_max_lag;
    art.provenance.tail_fraction = opts.tail_fraction;
    art.prices.reserve(static_cast<std::size_t>(cfg.T) + 1);
    art.prices.push_back(cfg.V);
    if (opts.keep_records) art.records.reserve(static_cast<std::size_t>(cfg.T));

    CounterRng rng(cfg.seed);
    for (long t = 0; t < cfg.T; ++t) {
        const double chi =
            opts.chi_in ? (*opts.chi_in)[static_cast<std::size_t>(t)]
                        : rng.normal(static_cast<std::uint64_t>(t));
        if (opts.chi_out) opts.chi_out->push_back(chi);
        StepRecord rec = sim.step(chi);
        art.prices.push_back(rec.price);
        if (opts.keep_records) art.records.push_back(std::move(rec));
    }

    art.events = sim.take_events();
    art.fund_tallies = sim.tallies();
    long defaults = 0;
    for (const auto& e : art.events)
        if (e.kind == EventKind::kDefault) ++defaults;
    art.summary = summarize_prices(art.prices, cfg.V, defaults, cfg.T, opts.acf_max_lag,
                                   opts.tail_fraction);
    return art;
}

}  // namespace levsim
