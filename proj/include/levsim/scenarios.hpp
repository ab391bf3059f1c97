#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "levsim/analytics.hpp"
#include "levsim/engine.hpp"
#include "levsim/io.hpp"

namespace levsim {

class UnknownScenario : public std::runtime_error {
  public:
    explicit UnknownScenario(const std::string& name)
        : std::runtime_error("unknown scenario '" + name + "'") {}
};

/// Run fn(0..n-1) on up to `jobs` workers. Results must be written to
/// per-index slots; the caller's output is then independent of scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Generic multi-seed parameter sweep
// ---------------------------------------------------------------------------

using MetricList = std::vector<std::pair<std::string, double>>;
using MetricFn = std::function<MetricList(const RunArtifact&)>;

struct CellResult {
    double value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    RunSummary summary;
    MetricList metrics;
};

struct SweepTable {
    std::string param;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    std::vector<CellResult> cells;  // value-major: cells[v * seeds.size() + s]

    const CellResult& cell(std::size_t v, std::size_t s) const {
        return cells[v * seeds.size() + s];
    }
};

/// Apply a swept parameter to a config. "lambda_max" and "beta" broadcast to
/// every fund; anything else is a dotted config path (e.g.
/// "funds[9].lambda_max", "sigma").
inline ModelConfig apply_param(const ModelConfig& base, const std::string& param, double value) {
    nlohmann::json j = config_to_json(base);
    if (param == "lambda_max" || param == "beta") {
        for (auto& f : j["funds"]) f[param] = value;
    } else {
        apply_override(j, param, fmt_double(value));
    }
    return config_from_json(j);
}

/// A swept parameter must name an existing config leaf; values that violate
/// invariants are a per-cell matter, not a sweep-level one.
inline void require_known_param(const ModelConfig& base, const std::string& param) {
    if (param == "lambda_max" || param == "beta") return;
    const nlohmann::json root = config_to_json(base);
    const nlohmann::json* cur = &root;
    for (const auto& seg : detail::parse_path(param)) {
        if (std::holds_alternative<std::string>(seg)) {
            const std::string& k = std::get<std::string>(seg);
            if (!cur->is_object() || !cur->contains(k))
                throw ConfigError("sweep: unrecognized parameter '" + param + "'");
            cur = &(*cur)[k];
        } else {
            const std::size_t idx = std::get<std::size_t>(seg);
            if (!cur->is_array() || idx >= cur->size())
                throw ConfigError("sweep: unrecognized parameter '" + param + "'");
            cur = &(*cur)[idx];
        }
    }
}

/// Run |values| x |seeds| independent simulations, optionally in parallel.
/// Failures are recorded per cell; the table layout (and therefore any
/// aggregate) does not depend on execution order.
inline SweepTable sweep(const ModelConfig& base, const std::string& param,
                        const std::vector<double>& values,
                        const std::vector<std::uint64_t>& seeds, int jobs = 1,
                        const MetricFn& metrics = {}, const SolverSettings& solver = {}) {
    SweepTable table;
    table.param = param;
    table.values = values;
    table.seeds = seeds;
    table.cells.resize(values.size() * seeds.size());
    require_known_param(base, param);
    if (table.cells.empty()) return table;

    parallel_for(table.cells.size(), jobs, [&](std::size_t i) {
        const std::size_t vi = i / seeds.size();
        const std::size_t si = i % seeds.size();
        CellResult& cell = table.cells[i];
        cell.value = values[vi];
        cell.seed = seeds[si];
        try {
            ModelConfig cfg = apply_param(base, param, values[vi]);
            cfg.seed = seeds[si];
            RunOptions opts;
            opts.keep_records = false;
            opts.solver = solver;
            const RunArtifact art = run(cfg, opts);
            cell.summary = art.summary;
            if (metrics) cell.metrics = metrics(art);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    });
    return table;
}

struct AggRow {
    double value = 0.0;
    long n = 0;  // surviving cells with the statistic present
    std::optional<double> mean;
    std::optional<double> se;
};

/// Mean and standard error across seeds of one per-cell statistic.
inline std::vector<AggRow> aggregate(const SweepTable& table,
                                     const std::function<std::optional<double>(const CellResult&)>& f) {
    std::vector<AggRow> rows;
    rows.reserve(table.values.size());
    for (std::size_t vi = 0; vi < table.values.size(); ++vi) {
        AggRow row;
        row.value = table.values[vi];
        std::vector<double> xs;
        for (std::size_t si = 0; si < table.seeds.size(); ++si) {
            const CellResult& c = table.cell(vi, si);
            if (!c.ok) continue;
            if (auto x = f(c)) xs.push_back(*x);
        }
        row.n = static_cast<long>(xs.size());
        if (!xs.empty()) {
            double m = 0;
            for (double x : xs) m += x;
            m /= static_cast<double>(xs.size());
            row.mean = m;
            if (xs.size() >= 2) {
                double ss = 0;
                for (double x : xs) ss += (x - m) * (x - m);
                row.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                                   static_cast<double>(xs.size()));
            }
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::optional<double> metric_value(const CellResult& c, const std::string& name) {
    for (const auto& [k, v] : c.metrics)
        if (k == name) return v;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scenario catalog
// ---------------------------------------------------------------------------

struct ScenarioInfo {
    std::string name;
    std::string description;
    std::vector<std::uint64_t> default_seeds;
};

inline const std::vector<ScenarioInfo>& scenario_catalog() {
    static const std::vector<ScenarioInfo> catalog = [] {
        auto seq = [](std::uint64_t n) {
            std::vector<std::uint64_t> s;
            for (std::uint64_t i = 1; i <= n; ++i) s.push_back(i);
            return s;
        };
        return std::vector<ScenarioInfo>{
            {"fig2_wealth",
             "Wealth timeseries for 10 funds (beta 5..50, cap 20) over 30k steps, with "
             "default markers.",
             seq(1)},
            {"fig3_distributions",
             "Return distributions for noise-only, unlevered (cap 1) and levered (cap 10) "
             "markets; masked returns and per-run stats.",
             seq(5)},
            {"fig3c_gamma_sweep",
             "Tail exponent of negative returns vs the leverage cap (cap 1..15).", seq(3)},
            {"fig4_acf",
             "Return series and autocorrelation of |returns| for cap 1 vs cap 10, with "
             "margin-call markers.",
             seq(1)},
            {"fig5_derivatives",
             "Closed-form demand derivative dD/dm for caps 1, 2, 3 and uncapped "
             "(deterministic, no seeds).",
             {}},
            {"crash_anatomy",
             "Single-run anatomy: fund wealth, aggregate leverage, noise demand, price and "
             "their increments around crashes.",
             seq(1)},
            {"fig7_evolution",
             "Returns to investors when one fund's cap is swept against nine peers at cap 3 "
             "(beta 20, reintroduction delay 10).",
             seq(50)},
            {"fig6_vol_regulation",
             "Fixed vs volatility-adjusted leverage policy (kappa 100, tau 10): default "
             "rates, volatility and average price vs cap.",
             seq(10)},
        };
    }();
    return catalog;
}

inline const ScenarioInfo& scenario_info(const std::string& name) {
    for (const auto& s : scenario_catalog())
        if (s.name == name) return s;
    throw UnknownScenario(name);
}

struct ScenarioOptions {
    std::vector<std::uint64_t> seeds;  // empty: use the scenario default
    int jobs = 1;
    SolverSettings solver;
};

namespace detail {

inline std::string opt_field(const std::optional<double>& x) {
    return x ? fmt_double(*x) : std::string();
}

inline std::string summary_kv_csv(const RunArtifact& art) {
    const RunSummary& s = art.summary;
    std::string out = "metric,value\n";
    auto row = [&](const char* k, const std::optional<double>& v) {
        out += k;
        out += ',';
        out += opt_field(v);
        out += '\n';
    };
    row("volatility", s.volatility);
    row("excess_kurtosis", s.excess_kurt);
    row("gamma_negative", s.tail_neg ? std::optional<double>(s.tail_neg->gamma) : std::nullopt);
    row("gamma_positive", s.tail_pos ? std::optional<double>(s.tail_pos->gamma) : std::nullopt);
    row("default_rate", s.default_rate);
    row("mean_price", s.mean_price);
    out += "margin_call_events," + std::to_string(art.count_events(EventKind::kMarginCall)) + "\n";
    out += "default_events," + std::to_string(art.count_events(EventKind::kDefault)) + "\n";
    out += "rebirth_events," + std::to_string(art.count_events(EventKind::kRebirth)) + "\n";
    return out;
}

inline void write_scenario_manifest(const std::filesystem::path& dir, const std::string& name,
                                    const std::vector<std::uint64_t>& seeds,
                                    const ModelConfig& base, const SolverSettings& solver,
                                    const std::string& param,
                                    const std::vector<double>& values,
                                    const std::string& notes) {
    JsonWriter w;
    w.begin_object();
    w.key("kind").value(std::string_view("scenario"));
    w.key("name").value(std::string_view(name));
    w.key("version").value(std::string_view(kVersion));
    w.key("seeds").begin_array();
    for (auto s : seeds) w.value(s);
    w.end_array();
    if (!param.empty()) {
        w.key("param").value(std::string_view(param));
        w.key("values").begin_array();
        for (double v : values) w.value(v);
        w.end_array();
    }
    w.key("config");
    write_config_json(w, base);
    w.key("solver");
    write_solver_json(w, solver);
    if (!notes.empty()) w.key("notes").value(std::string_view(notes));
    w.end_object();
    write_text_atomic(dir / "manifest.json", w.str());
}

inline std::filesystem::path prep_dirs(const std::filesystem::path& out_dir,
                                       const std::string& name) {
    const auto dir = out_dir / name;
    std::error_code ec;
    std::filesystem::create_directories(dir / "runs", ec);
    if (!ec) std::filesystem::create_directories(dir / "tables", ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

inline std::string seed_file(std::uint64_t seed) {
    return "seed=" + std::to_string(seed) + ".csv";
}

inline std::string cell_file(const std::string& param, double value, std::uint64_t seed) {
    return param + "=" + fmt_double(value) + "_seed=" + std::to_string(seed) + ".csv";
}

/// Flat per-cell table for a sweep.
inline void write_sweep_outputs(const std::filesystem::path& dir, const SweepTable& table) {
    std::string cells = "param,value,seed,ok,error,volatility,excess_kurtosis,gamma_negative,"
                        "gamma_positive,default_rate,mean_price\n";
    for (const auto& c : table.cells) {
        cells += table.param + ',' + fmt_double(c.value) + ',' + std::to_string(c.seed) + ',';
        cells += c.ok ? '1' : '0';
        cells += ',';
        cells += c.error;  // error strings contain no commas from our own code
        cells += ',' + opt_field(c.summary.volatility) + ',' + opt_field(c.summary.excess_kurt);
        cells += ',' +
                 (c.summary.tail_neg ? fmt_double(c.summary.tail_neg->gamma) : std::string());
        cells += ',' +
                 (c.summary.tail_pos ? fmt_double(c.summary.tail_pos->gamma) : std::string());
        cells += ',' + opt_field(c.summary.default_rate) + ',' +
                 opt_field(c.summary.mean_price) + '\n';
    }
    write_text_atomic(dir / "tables" / "cells.csv", cells);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario implementations
// ---------------------------------------------------------------------------

namespace detail {

inline void scenario_fig2(const std::filesystem::path& dir,
                          const std::vector<std::uint64_t>& seeds, int jobs,
                          const SolverSettings& solver) {
    ModelConfig base;
    base.funds = ModelConfig::default_roster(20.0);
    base.T = 30000;
    write_scenario_manifest(dir, "fig2_wealth", seeds, base, solver, "", {}, "");

    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        ModelConfig cfg = base;
        cfg.seed = seeds[i];
        RunOptions opts;
        opts.solver = solver;
        const RunArtifact art = run(cfg, opts);
        write_text_atomic(dir / "runs" / seed_file(cfg.seed), summary_kv_csv(art));

        std::string w = "t";
        for (std::size_t h = 0; h < cfg.funds.size(); ++h) w += ",wealth_" + std::to_string(h);
        w += '\n';
        for (const auto& rec : art.records) {
            w += std::to_string(rec.t);
            for (const auto& pf : rec.funds) w += ',' + fmt_double(pf.wealth);
            w += '\n';
        }
        write_text_atomic(dir / "tables" / ("wealth_seed=" + std::to_string(cfg.seed) + ".csv"),
                          w);
        write_text_atomic(dir / "tables" / ("events_seed=" + std::to_string(cfg.seed) + ".csv"),
                          events_csv(art));
    });
}

inline void scenario_fig3(const std::filesystem::path& dir,
                          const std::vector<std::uint64_t>& seeds, int jobs,
                          const SolverSettings& solver) {
    struct Case {
        const char* name;
        std::vector<FundParams> funds;
    };
    const std::vector<Case> cases = {
        {"noise_only", {}},
        {"unlevered", ModelConfig::default_roster(1.0)},
        {"leveraged", ModelConfig::default_roster(10.0)},
    };
    ModelConfig base;
    base.T = 100000;
    write_scenario_manifest(dir, "fig3_distributions", seeds, base, solver, "", {},
                            "cases: noise_only, unlevered (cap 1), leveraged (cap 10)");

    std::vector<RunArtifact> arts(cases.size() * seeds.size());
    parallel_for(arts.size(), jobs, [&](std::size_t i) {
        const std::size_t ci = i / seeds.size();
        const std::size_t si = i % seeds.size();
        ModelConfig cfg = base;
        cfg.funds = cases[ci].funds;
        cfg.seed = seeds[si];
        RunOptions opts;
        opts.keep_records = false;
        opts.solver = solver;
        arts[i] = run(cfg, opts);
    });

    std::string summary =
        "case,seed,volatility,excess_kurtosis,gamma_negative,gamma_positive,default_rate,"
        "mean_price\n";
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        std::string returns = "seed,r\n";
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const RunArtifact& art = arts[ci * seeds.size() + si];
            write_text_atomic(
                dir / "runs" / (std::string(cases[ci].name) + "_" + seed_file(seeds[si])),
                summary_kv_csv(art));
            const ReturnSeries rs = log_returns(art.prices, art.config.V);
            for (std::size_t k = 0; k < rs.values.size(); ++k)
                if (rs.mask[k])
                    returns += std::to_string(seeds[si]) + ',' + fmt_double(rs.values[k]) + '\n';
            const RunSummary& s = art.summary;
            summary += std::string(cases[ci].name) + ',' + std::to_string(seeds[si]) + ',' +
                       opt_field(s.volatility) + ',' + opt_field(s.excess_kurt) + ',' +
                       (s.tail_neg ? fmt_double(s.tail_neg->gamma) : std::string()) + ',' +
                       (s.tail_pos ? fmt_double(s.tail_pos->gamma) : std::string()) + ',' +
                       opt_field(s.default_rate) + ',' + opt_field(s.mean_price) + '\n';
        }
        write_text_atomic(
            dir / "tables" / ("returns_" + std::string(cases[ci].name) + ".csv"), returns);
    }
    write_text_atomic(dir / "tables" / "summary.csv", summary);
}

inline void scenario_fig3c(const std::filesystem::path& dir,
                           const std::vector<std::uint64_t>& seeds, int jobs,
                           const SolverSettings& solver) {
    ModelConfig base;
    base.T = 100000;
    std::vector<double> values;
    for (int l = 1; l <= 15; ++l) values.push_back(l);
    write_scenario_manifest(dir, "fig3c_gamma_sweep", seeds, base, solver, "lambda_max", values,
                            "");

    const SweepTable table = sweep(base, "lambda_max", values, seeds, jobs, {}, solver);
    for (const auto& c : table.cells) {
        // Cell summaries land in runs/ so any point on the curve is traceable.
        std::string kv = "metric,value\n";
        kv += "gamma_negative," +
              (c.summary.tail_neg ? fmt_double(c.summary.tail_neg->gamma) : std::string()) +
              '\n';
        kv += "volatility," + opt_field(c.summary.volatility) + '\n';
        kv += "default_rate," + opt_field(c.summary.default_rate) + '\n';
        write_text_atomic(dir / "runs" / cell_file("lambda_max", c.value, c.seed), kv);
    }
    write_sweep_outputs(dir, table);

    std::string rows = "lambda_max,seed,gamma_negative,volatility,default_rate\n";
    for (const auto& c : table.cells) {
        rows += fmt_double(c.value) + ',' + std::to_string(c.seed) + ',' +
                (c.summary.tail_neg ? fmt_double(c.summary.tail_neg->gamma) : std::string()) +
                ',' + opt_field(c.summary.volatility) + ',' + opt_field(c.summary.default_rate) +
                '\n';
    }
    write_text_atomic(dir / "tables" / "gamma_vs_lambda.csv", rows);

    const auto agg = aggregate(table, [](const CellResult& c) -> std::optional<double> {
        if (!c.summary.tail_neg) return std::nullopt;
        return c.summary.tail_neg->gamma;
    });
    std::string aggcsv = "lambda_max,n,mean_gamma,se_gamma\n";
    for (const auto& r : agg)
        aggcsv += fmt_double(r.value) + ',' + std::to_string(r.n) + ',' + opt_field(r.mean) +
                  ',' + opt_field(r.se) + '\n';
    write_text_atomic(dir / "tables" / "gamma_vs_lambda_agg.csv", aggcsv);
}

inline void scenario_fig4(const std::filesystem::path& dir,
                          const std::vector<std::uint64_t>& seeds, int jobs,
                          const SolverSettings& solver) {
    struct Case {
        const char* name;
        double lambda;
    };
    const std::vector<Case> cases = {{"unlevered", 1.0}, {"leveraged", 10.0}};
    ModelConfig base;
    base.T = 100000;
    write_scenario_manifest(dir, "fig4_acf", seeds, base, solver, "", {},
                            "cases: unlevered (cap 1), leveraged (cap 10)");

    parallel_for(cases.size() * seeds.size(), jobs, [&](std::size_t i) {
        const std::size_t ci = i / seeds.size();
        const std::size_t si = i % seeds.size();
        ModelConfig cfg = base;
        cfg.funds = ModelConfig::default_roster(cases[ci].lambda);
        cfg.seed = seeds[si];
        RunOptions opts;
        opts.keep_records = false;
        opts.acf_max_lag = 1000;  // the figure wants the slow decay visible
        opts.solver = solver;
        const RunArtifact art = run(cfg, opts);
        write_text_atomic(
            dir / "runs" / (std::string(cases[ci].name) + "_" + seed_file(cfg.seed)),
            summary_kv_csv(art));

        std::vector<bool> mc_step(static_cast<std::size_t>(cfg.T) + 1, false);
        for (const auto& e : art.events)
            if (e.kind == EventKind::kMarginCall) mc_step[static_cast<std::size_t>(e.t)] = true;
        const ReturnSeries rs = log_returns(art.prices, cfg.V);
        std::string rcsv = "t,r,m_positive,margin_call\n";
        for (std::size_t k = 0; k < rs.values.size(); ++k) {
            rcsv += std::to_string(k + 1) + ',' + fmt_double(rs.values[k]) + ',' +
                    (rs.mask[k] ? '1' : '0') + ',' + (mc_step[k + 1] ? '1' : '0');
            rcsv += '\n';
        }
        write_text_atomic(dir / "tables" /
                              ("returns_" + std::string(cases[ci].name) + "_seed=" +
                               std::to_string(cfg.seed) + ".csv"),
                          rcsv);

        std::string acsv = "lag,acf\n";
        for (std::size_t lag = 0; lag < art.summary.acf_abs.size(); ++lag)
            acsv +=
                std::to_string(lag) + ',' + opt_field(art.summary.acf_abs[lag]) + '\n';
        write_text_atomic(dir / "tables" /
                              ("acf_" + std::string(cases[ci].name) + "_seed=" +
                               std::to_string(cfg.seed) + ".csv"),
                          acsv);
    });
}

inline void scenario_fig5(const std::filesystem::path& dir,
                          const SolverSettings& solver) {
    ModelConfig base;  // recorded for provenance; the table itself is closed-form
    write_scenario_manifest(dir, "fig5_derivatives", {}, base, solver, "", {},
                            "beta=10, V=1, per unit wealth; caps 1,2,3,inf");
    const double beta = 10.0, V = 1.0;
    const std::vector<double> caps = {1.0, 2.0, 3.0,
                                      std::numeric_limits<double>::infinity()};
    std::string csv = "m,dDdm_cap_1,dDdm_cap_2,dDdm_cap_3,dDdm_cap_inf\n";
    for (int i = 0; i <= 120; ++i) {
        const double m = 0.005 * i;  // 0 .. 0.6
        csv += fmt_double(m);
        for (double cap : caps)
            csv += ',' + fmt_double(demand_derivative(m, beta, cap, V).dDdm_per_wealth);
        csv += '\n';
    }
    write_text_atomic(dir / "tables" / "derivatives.csv", csv);
}

inline void scenario_crash_anatomy(const std::filesystem::path& dir,
                                   const std::vector<std::uint64_t>& seeds, int jobs,
                                   const SolverSettings& solver) {
    ModelConfig base;
    base.funds = ModelConfig::default_roster(20.0);
    base.T = 30000;
    write_scenario_manifest(dir, "crash_anatomy", seeds, base, solver, "", {},
                            "representative funds: lowest/median/highest aggression");

    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        ModelConfig cfg = base;
        cfg.seed = seeds[i];
        RunOptions opts;
        opts.solver = solver;
        const RunArtifact art = run(cfg, opts);
        write_text_atomic(dir / "runs" / seed_file(cfg.seed), summary_kv_csv(art));

        std::string csv =
            "t,wealth_low_beta,wealth_mid_beta,wealth_high_beta,agg_leverage,xi,price,"
            "delta_xi,delta_price\n";
        double xi_prev = cfg.V * cfg.N;
        double p_prev = cfg.V;
        const std::size_t lo = 0, mid = cfg.funds.size() / 2, hi = cfg.funds.size() - 1;
        for (const auto& rec : art.records) {
            csv += std::to_string(rec.t) + ',' + fmt_double(rec.funds[lo].wealth) + ',' +
                   fmt_double(rec.funds[mid].wealth) + ',' + fmt_double(rec.funds[hi].wealth) +
                   ',' + fmt_double(rec.agg_leverage) + ',' + fmt_double(rec.xi) + ',' +
                   fmt_double(rec.price) + ',' + fmt_double(rec.xi - xi_prev) + ',' +
                   fmt_double(rec.price - p_prev) + '\n';
            xi_prev = rec.xi;
            p_prev = rec.price;
        }
        write_text_atomic(
            dir / "tables" / ("anatomy_seed=" + std::to_string(cfg.seed) + ".csv"), csv);
    });
}

inline MetricList fig7_metrics(const RunArtifact& art) {
    MetricList m;
    const std::size_t swept = art.config.funds.size() - 1;
    const auto& tallies = art.fund_tallies;
    const auto push = [&m](const char* k, const std::optional<double>& v) {
        if (v) m.emplace_back(k, *v);
    };
    push("investor_return_swept", tallies[swept].investor_return());
    push("rperf_mean_swept", tallies[swept].mean_r_perf());
    double ir_sum = 0, rp_sum = 0;
    long ir_n = 0, rp_n = 0;
    for (std::size_t h = 0; h < swept; ++h) {
        if (auto r = tallies[h].investor_return()) {
            ir_sum += *r;
            ++ir_n;
        }
        if (auto r = tallies[h].mean_r_perf()) {
            rp_sum += *r;
            ++rp_n;
        }
    }
    if (ir_n > 0) m.emplace_back("investor_return_peers", ir_sum / static_cast<double>(ir_n));
    if (rp_n > 0) m.emplace_back("rperf_mean_peers", rp_sum / static_cast<double>(rp_n));
    return m;
}

inline ModelConfig fig7_base() {
    ModelConfig base;
    base.funds.assign(10, FundParams{20.0, 3.0});
    base.T = 100000;
    base.T_reintro = 10;
    return base;
}

inline void scenario_fig7(const std::filesystem::path& dir,
                          const std::vector<std::uint64_t>& seeds, int jobs,
                          const SolverSettings& solver) {
    const ModelConfig base = fig7_base();
    std::vector<double> values;
    for (int l = 1; l <= 10; ++l) values.push_back(l);
    write_scenario_manifest(
        dir, "fig7_evolution", seeds, base, solver, "funds[9].lambda_max", values,
        "nine peers at cap 3; reintroduction delay overridden to 10 timesteps");

    const SweepTable table =
        sweep(base, "funds[9].lambda_max", values, seeds, jobs, fig7_metrics, solver);
    for (const auto& c : table.cells) {
        std::string kv = "metric,value\n";
        for (const auto& [k, v] : c.metrics) kv += k + ',' + fmt_double(v) + '\n';
        write_text_atomic(dir / "runs" / cell_file("lambda_max", c.value, c.seed), kv);
    }

    std::string rows =
        "# investor_return = sum_t trading P&L / sum_t start-of-step wealth (capital-weighted "
        "mean of per-period fund returns, net of flows); rperf_mean = time-mean of the "
        "performance EMA\n"
        "lambda_max,seed,investor_return_swept,investor_return_peers,rperf_mean_swept,"
        "rperf_mean_peers\n";
    for (const auto& c : table.cells) {
        auto f = [&](const char* k) {
            auto v = metric_value(c, k);
            return v ? fmt_double(*v) : std::string();
        };
        rows += fmt_double(c.value) + ',' + std::to_string(c.seed) + ',' +
                f("investor_return_swept") + ',' + f("investor_return_peers") + ',' +
                f("rperf_mean_swept") + ',' + f("rperf_mean_peers") + '\n';
    }
    write_text_atomic(dir / "tables" / "investor_returns.csv", rows);

    std::string aggcsv =
        "lambda_max,n,mean_rperf_swept,se_rperf_swept,mean_rperf_peers,se_rperf_peers,"
        "mean_return_swept,se_return_swept,mean_return_peers,se_return_peers\n";
    const auto agg_rp_swept = aggregate(
        table, [](const CellResult& c) { return metric_value(c, "rperf_mean_swept"); });
    const auto agg_rp_peers = aggregate(
        table, [](const CellResult& c) { return metric_value(c, "rperf_mean_peers"); });
    const auto agg_swept = aggregate(
        table, [](const CellResult& c) { return metric_value(c, "investor_return_swept"); });
    const auto agg_peers = aggregate(
        table, [](const CellResult& c) { return metric_value(c, "investor_return_peers"); });
    for (std::size_t i = 0; i < agg_swept.size(); ++i) {
        aggcsv += fmt_double(agg_swept[i].value) + ',' + std::to_string(agg_swept[i].n) + ',' +
                  opt_field(agg_rp_swept[i].mean) + ',' + opt_field(agg_rp_swept[i].se) + ',' +
                  opt_field(agg_rp_peers[i].mean) + ',' + opt_field(agg_rp_peers[i].se) + ',' +
                  opt_field(agg_swept[i].mean) + ',' + opt_field(agg_swept[i].se) + ',' +
                  opt_field(agg_peers[i].mean) + ',' + opt_field(agg_peers[i].se) + '\n';
    }
    write_text_atomic(dir / "tables" / "investor_returns_agg.csv", aggcsv);
}

inline void scenario_fig6(const std::filesystem::path& dir,
                          const std::vector<std::uint64_t>& seeds, int jobs,
                          const SolverSettings& solver) {
    std::vector<double> values;
    for (int l = 1; l <= 15; ++l) values.push_back(l);
    ModelConfig fixed_base;
    fixed_base.T = 100000;
    ModelConfig adaptive_base = fixed_base;
    adaptive_base.policy = {PolicyKind::kVolatilityAdjusted, 100.0, 10};
    write_scenario_manifest(dir, "fig6_vol_regulation", seeds, fixed_base, solver, "lambda_max",
                            values,
                            "policies: fixed and volatility_adjusted (kappa=100, tau=10)");

    const SweepTable tf = sweep(fixed_base, "lambda_max", values, seeds, jobs, {}, solver);
    const SweepTable ta = sweep(adaptive_base, "lambda_max", values, seeds, jobs, {}, solver);

    std::string rows = "lambda_max,policy,seed,default_rate,volatility,mean_price\n";
    const auto emit_rows = [&](const SweepTable& t, const char* policy) {
        for (const auto& c : t.cells) {
            rows += fmt_double(c.value) + ',' + policy + ',' + std::to_string(c.seed) + ',' +
                    opt_field(c.summary.default_rate) + ',' + opt_field(c.summary.volatility) +
                    ',' + opt_field(c.summary.mean_price) + '\n';
            std::string kv = "metric,value\n";
            kv += "default_rate," + opt_field(c.summary.default_rate) + '\n';
            kv += "volatility," + opt_field(c.summary.volatility) + '\n';
            kv += "mean_price," + opt_field(c.summary.mean_price) + '\n';
            write_text_atomic(dir / "runs" /
                                  (std::string(policy) + "_" +
                                   cell_file("lambda_max", c.value, c.seed)),
                              kv);
        }
    };
    emit_rows(tf, "fixed");
    emit_rows(ta, "volatility_adjusted");
    write_text_atomic(dir / "tables" / "policy_compare.csv", rows);

    std::string aggcsv =
        "lambda_max,policy,n,mean_default_rate,se_default_rate,mean_volatility,se_volatility,"
        "mean_price,se_price\n";
    const auto emit_agg = [&](const SweepTable& t, const char* policy) {
        const auto ad = aggregate(t, [](const CellResult& c) { return c.summary.default_rate; });
        const auto av = aggregate(t, [](const CellResult& c) { return c.summary.volatility; });
        const auto ap = aggregate(t, [](const CellResult& c) { return c.summary.mean_price; });
        for (std::size_t i = 0; i < ad.size(); ++i) {
            aggcsv += fmt_double(ad[i].value) + ',' + policy + ',' + std::to_string(ad[i].n) +
                      ',' + opt_field(ad[i].mean) + ',' + opt_field(ad[i].se) + ',' +
                      opt_field(av[i].mean) + ',' + opt_field(av[i].se) + ',' +
                      opt_field(ap[i].mean) + ',' + opt_field(ap[i].se) + '\n';
        }
    };
    emit_agg(tf, "fixed");
    emit_agg(ta, "volatility_adjusted");
    write_text_atomic(dir / "tables" / "policy_compare_agg.csv", aggcsv);
}

}  // namespace detail

/// Run a named scenario into out_dir/<name>/ with the pinned layout:
/// manifest.json, runs/<cell>.csv, tables/<table>.csv.
inline void run_scenario(const std::string& name, const std::filesystem::path& out_dir,
                         const ScenarioOptions& opts = {}) {
    const ScenarioInfo& info = scenario_info(name);
    const std::vector<std::uint64_t>& seeds =
        opts.seeds.empty() ? info.default_seeds : opts.seeds;
    const auto dir = detail::prep_dirs(out_dir, name);

    if (name == "fig2_wealth") detail::scenario_fig2(dir, seeds, opts.jobs, opts.solver);
    else if (name == "fig3_distributions") detail::scenario_fig3(dir, seeds, opts.jobs, opts.solver);
    else if (name == "fig3c_gamma_sweep") detail::scenario_fig3c(dir, seeds, opts.jobs, opts.solver);
    else if (name == "fig4_acf") detail::scenario_fig4(dir, seeds, opts.jobs, opts.solver);
    else if (name == "fig5_derivatives") detail::scenario_fig5(dir, opts.solver);
    else if (name == "crash_anatomy")
        detail::scenario_crash_anatomy(dir, seeds, opts.jobs, opts.solver);
    else if (name == "fig7_evolution") detail::scenario_fig7(dir, seeds, opts.jobs, opts.solver);
    else if (name == "fig6_vol_regulation") detail::scenario_fig6(dir, seeds, opts.jobs, opts.solver);
    else throw UnknownScenario(name);
}

}  // namespace levsim
