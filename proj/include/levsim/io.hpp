#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "levsim/engine.hpp"
#include "levsim/model.hpp"

namespace levsim {

class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest exact decimal is not enough here: emitted files pin floats to 17
/// significant digits so a re-parse reproduces the double bit-for-bit.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Minimal JSON writer (fixed schemas, %.17g floats, stable byte output)
// ---------------------------------------------------------------------------

class JsonWriter {
  public:
    JsonWriter& begin_object() { return open('{'); }
    JsonWriter& end_object() { return close('}'); }
    JsonWriter& begin_array() { return open('['); }
    JsonWriter& end_array() { return close(']'); }

    JsonWriter& key(std::string_view k) {
        separate();
        append_string(k);
        out_ += ": ";
        pending_value_ = true;
        return *this;
    }

    JsonWriter& value(double x) { return raw(fmt_double(x)); }
    JsonWriter& value(long x) { return raw(std::to_string(x)); }
    JsonWriter& value(int x) { return raw(std::to_string(x)); }
    JsonWriter& value(std::uint64_t x) { return raw(std::to_string(x)); }
    JsonWriter& value(bool b) { return raw(b ? "true" : "false"); }
    JsonWriter& value(std::string_view s) {
        separate();
        append_string(s);
        return *this;
    }
    JsonWriter& null() { return raw("null"); }
    JsonWriter& value(const std::optional<double>& x) { return x ? value(*x) : null(); }

    std::string str() const { return out_ + "\n"; }

  private:
    JsonWriter& open(char c) {
        separate();
        out_ += c;
        depth_++;
        first_ = true;
        return *this;
    }
    JsonWriter& close(char c) {
        depth_--;
        if (!first_) {
            out_ += '\n';
            indent();
        }
        out_ += c;
        first_ = false;
        return *this;
    }
    JsonWriter& raw(std::string_view s) {
        separate();
        out_ += s;
        return *this;
    }
    void separate() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        if (!first_) out_ += ',';
        if (depth_ > 0) {
            out_ += '\n';
            indent();
        }
        first_ = false;
    }
    void indent() { out_.append(static_cast<std::size_t>(depth_) * 2, ' '); }
    void append_string(std::string_view s) {
        out_ += '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\t': out_ += "\\t"; break;
                case '\r': out_ += "\\r"; break;
                default: out_ += c;
            }
        }
        out_ += '"';
    }

    std::string out_;
    int depth_ = 0;
    bool first_ = true;
    bool pending_value_ = false;
};

// ---------------------------------------------------------------------------
// Config <-> JSON
// ---------------------------------------------------------------------------

namespace detail {

inline double want_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError(key + ": must be a number");
    return j.get<double>();
}

inline long want_integer(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer()) throw ConfigError(key + ": must be an integer");
    return j.get<long>();
}

}  // namespace detail

/// Strict parse: unknown keys are errors, every invariant is checked, and
/// unspecified fields take the documented defaults.
inline ModelConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: must be a JSON object");
    ModelConfig cfg;
    for (const auto& [key, val] : j.items()) {
        if (key == "V") cfg.V = detail::want_number(val, key);
        else if (key == "N") cfg.N = detail::want_number(val, key);
        else if (key == "sigma") cfg.sigma = detail::want_number(val, key);
        else if (key == "rho") cfg.rho = detail::want_number(val, key);
        else if (key == "a") cfg.a = detail::want_number(val, key);
        else if (key == "b") cfg.b = detail::want_number(val, key);
        else if (key == "r_b") cfg.r_b = detail::want_number(val, key);
        else if (key == "W0") cfg.W0 = detail::want_number(val, key);
        else if (key == "survival_fraction") cfg.survival_fraction = detail::want_number(val, key);
        else if (key == "T_reintro") cfg.T_reintro = detail::want_integer(val, key);
        else if (key == "T") cfg.T = detail::want_integer(val, key);
        else if (key == "seed") {
            if (!val.is_number_integer() && !val.is_number_unsigned())
                throw ConfigError("seed: must be an integer");
            cfg.seed = val.get<std::uint64_t>();
        } else if (key == "funds") {
            if (!val.is_array()) throw ConfigError("funds: must be an array");
            cfg.funds.clear();
            for (std::size_t i = 0; i < val.size(); ++i) {
                const auto& fj = val[i];
                const std::string where = "funds[" + std::to_string(i) + "]";
                if (!fj.is_object()) throw ConfigError(where + ": must be an object");
                FundParams fp;
                bool have_beta = false, have_lmax = false;
                for (const auto& [fk, fv] : fj.items()) {
                    if (fk == "beta") {
                        fp.beta = detail::want_number(fv, where + ".beta");
                        have_beta = true;
                    } else if (fk == "lambda_max") {
                        fp.lambda_max = detail::want_number(fv, where + ".lambda_max");
                        have_lmax = true;
                    } else {
                        throw ConfigError(where + ": unknown key '" + fk + "'");
                    }
                }
                if (!have_beta) throw ConfigError(where + ".beta: required");
                if (!have_lmax) throw ConfigError(where + ".lambda_max: required");
                cfg.funds.push_back(fp);
            }
        } else if (key == "policy") {
            if (!val.is_object()) throw ConfigError("policy: must be an object");
            for (const auto& [pk, pv] : val.items()) {
                if (pk == "variant") {
                    const std::string v = pv.is_string() ? pv.get<std::string>() : "";
                    if (v == "fixed") cfg.policy.kind = PolicyKind::kFixed;
                    else if (v == "volatility_adjusted")
                        cfg.policy.kind = PolicyKind::kVolatilityAdjusted;
                    else
                        throw ConfigError(
                            "policy.variant: must be \"fixed\" or \"volatility_adjusted\"");
                } else if (pk == "kappa") {
                    cfg.policy.kappa = detail::want_number(pv, "policy.kappa");
                } else if (pk == "tau") {
                    cfg.policy.tau = detail::want_integer(pv, "policy.tau");
                } else {
                    throw ConfigError("policy: unknown key '" + pk + "'");
                }
            }
        } else if (key == "variance_mode") {
            const std::string v = val.is_string() ? val.get<std::string>() : "";
            if (v == "log_returns") cfg.variance_mode = VarianceMode::kLogReturns;
            else if (v == "price_levels") cfg.variance_mode = VarianceMode::kPriceLevels;
            else
                throw ConfigError(
                    "variance_mode: must be \"log_returns\" or \"price_levels\"");
        } else if (key == "flow_mode") {
            const std::string v = val.is_string() ? val.get<std::string>() : "";
            if (v == "fixed_point") cfg.flow_mode = FlowMode::kFixedPoint;
            else if (v == "lagged_price") cfg.flow_mode = FlowMode::kLaggedPrice;
            else
                throw ConfigError("flow_mode: must be \"fixed_point\" or \"lagged_price\"");
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["V"] = cfg.V;
    j["N"] = cfg.N;
    j["sigma"] = cfg.sigma;
    j["rho"] = cfg.rho;
    j["funds"] = nlohmann::json::array();
    for (const auto& f : cfg.funds)
        j["funds"].push_back({{"beta", f.beta}, {"lambda_max", f.lambda_max}});
    j["a"] = cfg.a;
    j["b"] = cfg.b;
    j["r_b"] = cfg.r_b;
    j["W0"] = cfg.W0;
    j["survival_fraction"] = cfg.survival_fraction;
    j["T_reintro"] = cfg.T_reintro;
    j["policy"] = nlohmann::json{
        {"variant",
         cfg.policy.kind == PolicyKind::kFixed ? "fixed" : "volatility_adjusted"},
        {"kappa", cfg.policy.kappa},
        {"tau", cfg.policy.tau}};
    j["T"] = cfg.T;
    j["seed"] = cfg.seed;
    j["variance_mode"] =
        cfg.variance_mode == VarianceMode::kLogReturns ? "log_returns" : "price_levels";
    j["flow_mode"] = cfg.flow_mode == FlowMode::kFixedPoint ? "fixed_point" : "lagged_price";
    return j;
}

inline void write_config_json(JsonWriter& w, const ModelConfig& cfg) {
    w.begin_object();
    w.key("V").value(cfg.V);
    w.key("N").value(cfg.N);
    w.key("sigma").value(cfg.sigma);
    w.key("rho").value(cfg.rho);
    w.key("funds").begin_array();
    for (const auto& f : cfg.funds) {
        w.begin_object();
        w.key("beta").value(f.beta);
        w.key("lambda_max").value(f.lambda_max);
        w.end_object();
    }
    w.end_array();
    w.key("a").value(cfg.a);
    w.key("b").value(cfg.b);
    w.key("r_b").value(cfg.r_b);
    w.key("W0").value(cfg.W0);
    w.key("survival_fraction").value(cfg.survival_fraction);
    w.key("T_reintro").value(cfg.T_reintro);
    w.key("policy").begin_object();
    w.key("variant").value(cfg.policy.kind == PolicyKind::kFixed
                               ? std::string_view("fixed")
                               : std::string_view("volatility_adjusted"));
    w.key("kappa").value(cfg.policy.kappa);
    w.key("tau").value(cfg.policy.tau);
    w.end_object();
    w.key("T").value(cfg.T);
    w.key("seed").value(cfg.seed);
    w.key("variance_mode")
        .value(cfg.variance_mode == VarianceMode::kLogReturns
                   ? std::string_view("log_returns")
                   : std::string_view("price_levels"));
    w.key("flow_mode").value(cfg.flow_mode == FlowMode::kFixedPoint
                                 ? std::string_view("fixed_point")
                                 : std::string_view("lagged_price"));
    w.end_object();
}

// ---------------------------------------------------------------------------
// Dotted-path overrides: "funds[3].lambda_max=5", "policy.variant=fixed", ...
// ---------------------------------------------------------------------------

namespace detail {

using PathSeg = std::variant<std::string, std::size_t>;

inline std::vector<PathSeg> parse_path(const std::string& path) {
    std::vector<PathSeg> segs;
    std::size_t i = 0;
    const auto fail = [&](const std::string& why) {
        throw ConfigError("override path '" + path + "': " + why);
    };
    while (i < path.size()) {
        if (path[i] == '.') {
            ++i;
            continue;
        }
        if (path[i] == '[') {
            std::size_t j = path.find(']', i);
            if (j == std::string::npos) fail("unterminated '['");
            const std::string idx = path.substr(i + 1, j - i - 1);
            if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
                fail("bad index '" + idx + "'");
            segs.emplace_back(static_cast<std::size_t>(std::stoul(idx)));
            i = j + 1;
        } else {
            std::size_t j = i;
            while (j < path.size() && path[j] != '.' && path[j] != '[') ++j;
            segs.emplace_back(path.substr(i, j - i));
            i = j;
        }
    }
    if (segs.empty()) fail("empty");
    return segs;
}

}  // namespace detail

/// Set one dotted path in a config JSON document. The value is parsed as JSON
/// when possible and treated as a string otherwise; validity is enforced by
/// the strict parse that follows the overrides.
inline void apply_override(nlohmann::json& root, const std::string& path,
                           const std::string& value) {
    const auto segs = detail::parse_path(path);
    nlohmann::json* cur = &root;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const bool last = (s + 1 == segs.size());
        if (std::holds_alternative<std::string>(segs[s])) {
            const std::string& k = std::get<std::string>(segs[s]);
            if (!cur->is_object())
                throw ConfigError("override path '" + path + "': '" + k +
                                  "' applied to a non-object");
            if (last) {
                nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
                (*cur)[k] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
                return;
            }
            if (!cur->contains(k)) (*cur)[k] = nlohmann::json::object();
            cur = &(*cur)[k];
        } else {
            const std::size_t idx = std::get<std::size_t>(segs[s]);
            if (!cur->is_array() || idx >= cur->size())
                throw ConfigError("override path '" + path + "': index " +
                                  std::to_string(idx) + " out of range");
            if (last) {
                nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
                (*cur)[idx] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
                return;
            }
            cur = &(*cur)[idx];
        }
    }
}

/// Split "key.path=value" into its two halves.
inline std::pair<std::string, std::string> split_override(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + spec + "': expected key=value");
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

/// Write via a temp file and atomic rename so a failure never leaves a
/// partial target behind.
inline void write_text_atomic(const std::filesystem::path& p, std::string_view content) {
    const std::filesystem::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
    if (ec) throw IoError("rename " + tmp.string() + " -> " + p.string() + ": " + ec.message());
}

inline void write_chi_series(const std::filesystem::path& p, std::span<const double> chi) {
    std::string out;
    out.reserve(chi.size() * 24);
    for (double c : chi) {
        out += fmt_double(c);
        out += '\n';
    }
    write_text_atomic(p, out);
}

inline std::vector<double> read_chi_series(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    std::vector<double> chi;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            chi.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw IoError(p.string() + ":" + std::to_string(line_no) +
                          ": not a number: '" + line + "'");
        }
    }
    return chi;
}

// ---------------------------------------------------------------------------
// Run emission
// ---------------------------------------------------------------------------

inline std::string timeseries_csv(const RunArtifact& art) {
    const std::size_t n_funds = art.config.funds.size();
    std::string out;
    out.reserve(art.records.size() * (64 + 120 * n_funds) + 256);
    out += "t,price,log_return,xi,m,agg_leverage";
    for (std::size_t h = 0; h < n_funds; ++h) {
        const std::string hs = std::to_string(h);
        out += ",wealth_" + hs + ",shares_" + hs + ",cash_" + hs + ",leverage_" + hs +
               ",margin_call_" + hs + ",flow_" + hs;
    }
    out += '\n';
    for (const auto& rec : art.records) {
        out += std::to_string(rec.t);
        out += ',';
        out += fmt_double(rec.price);
        out += ',';
        out += fmt_double(rec.log_return);
        out += ',';
        out += fmt_double(rec.xi);
        out += ',';
        out += fmt_double(rec.mispricing);
        out += ',';
        out += fmt_double(rec.agg_leverage);
        for (const auto& pf : rec.funds) {
            out += ',';
            out += fmt_double(pf.wealth);
            out += ',';
            out += fmt_double(pf.shares);
            out += ',';
            out += fmt_double(pf.cash);
            out += ',';
            out += fmt_double(pf.leverage);
            out += ',';
            out += pf.margin_call ? '1' : '0';
            out += ',';
            out += fmt_double(pf.flow);
        }
        out += '\n';
    }
    return out;
}

inline std::string events_csv(const RunArtifact& art) {
    std::string out = "t,fund,event\n";
    for (const auto& e : art.events) {
        out += std::to_string(e.t);
        out += ',';
        out += std::to_string(e.fund);
        out += ',';
        out += event_name(e.kind);
        out += '\n';
    }
    return out;
}

inline void write_tail_fit(JsonWriter& w, const std::optional<TailFit>& fit) {
    if (!fit) {
        w.null();
        return;
    }
    w.begin_object();
    w.key("gamma").value(fit->gamma);
    w.key("k").value(fit->k);
    w.key("x_min").value(fit->x_min);
    w.key("side").value(fit->side == TailSide::kNegative ? std::string_view("negative")
                                                         : std::string_view("positive"));
    w.end_object();
}

inline std::string summary_json(const RunSummary& s) {
    JsonWriter w;
    w.begin_object();
    w.key("volatility").value(s.volatility);
    w.key("excess_kurtosis").value(s.excess_kurt);
    w.key("tail_fit_negative");
    write_tail_fit(w, s.tail_neg);
    w.key("tail_fit_positive");
    write_tail_fit(w, s.tail_pos);
    w.key("rank_size_gamma_negative").value(s.rank_size_neg);
    w.key("rank_size_gamma_positive").value(s.rank_size_pos);
    w.key("acf_abs_returns").begin_array();
    for (const auto& a : s.acf_abs) w.value(a);
    w.end_array();
    w.key("default_rate").value(s.default_rate);
    w.key("mean_price").value(s.mean_price);
    w.end_object();
    return w.str();
}

inline void write_solver_json(JsonWriter& w, const SolverSettings& s) {
    w.begin_object();
    w.key("tol").value(s.tol);
    w.key("max_iter").value(s.max_iter);
    w.key("p_min_factor").value(s.p_min_factor);
    w.key("p_max_factor").value(s.p_max_factor);
    w.key("diagnose_multiplicity").value(s.diagnose_multiplicity);
    w.end_object();
}

inline std::string manifest_json(const RunArtifact& art) {
    JsonWriter w;
    w.begin_object();
    w.key("kind").value(std::string_view("run"));
    w.key("version").value(std::string_view(art.provenance.version));
    w.key("config");
    write_config_json(w, art.config);
    w.key("solver");
    write_solver_json(w, art.provenance.solver);
    w.key("analysis").begin_object();
    w.key("acf_max_lag").value(art.provenance.acf_max_lag);
    w.key("tail_fraction").value(art.provenance.tail_fraction);
    w.end_object();
    w.end_object();
    return w.str();
}

/// Emit timeseries.csv, events.csv, summary.json and manifest.json under dir.
/// With compact=true only the summary and manifest are written.
inline void emit_run(const RunArtifact& art, const std::filesystem::path& dir,
                     bool compact = false) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    if (!compact) {
        write_text_atomic(dir / "timeseries.csv", timeseries_csv(art));
        write_text_atomic(dir / "events.csv", events_csv(art));
    }
    write_text_atomic(dir / "summary.json", summary_json(art.summary));
    write_text_atomic(dir / "manifest.json", manifest_json(art));
}

// ---------------------------------------------------------------------------
// Config loading (plain config or emitted manifest)
// ---------------------------------------------------------------------------

struct LoadedConfig {
    ModelConfig config;
    SolverSettings solver;
    int acf_max_lag = 50;
    double tail_fraction = 0.025;
};

inline SolverSettings solver_from_json(const nlohmann::json& j) {
    SolverSettings s;
    for (const auto& [key, val] : j.items()) {
        if (key == "tol") s.tol = detail::want_number(val, "solver.tol");
        else if (key == "max_iter")
            s.max_iter = static_cast<int>(detail::want_integer(val, "solver.max_iter"));
        else if (key == "p_min_factor")
            s.p_min_factor = detail::want_number(val, "solver.p_min_factor");
        else if (key == "p_max_factor")
            s.p_max_factor = detail::want_number(val, "solver.p_max_factor");
        else if (key == "diagnose_multiplicity") {
            if (!val.is_boolean()) throw ConfigError("solver.diagnose_multiplicity: must be a bool");
            s.diagnose_multiplicity = val.get<bool>();
        } else {
            throw ConfigError("solver: unknown key '" + key + "'");
        }
    }
    return s;
}

/// Parse a config file (or an emitted manifest, recognized by its "config"
/// key) and apply key=value overrides, last one wins.
inline LoadedConfig load_config(const std::filesystem::path& path,
                                const std::vector<std::string>& overrides = {}) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    LoadedConfig out;
    nlohmann::json cfg_json;
    if (doc.is_object() && doc.contains("config")) {
        cfg_json = doc["config"];
        if (doc.contains("solver")) out.solver = solver_from_json(doc["solver"]);
        if (doc.contains("analysis")) {
            const auto& a = doc["analysis"];
            if (a.contains("acf_max_lag"))
                out.acf_max_lag =
                    static_cast<int>(detail::want_integer(a["acf_max_lag"], "analysis.acf_max_lag"));
            if (a.contains("tail_fraction"))
                out.tail_fraction = detail::want_number(a["tail_fraction"], "analysis.tail_fraction");
        }
    } else {
        cfg_json = doc;
    }
    for (const auto& spec : overrides) {
        const auto [key, value] = split_override(spec);
        apply_override(cfg_json, key, value);
    }
    out.config = config_from_json(cfg_json);
    return out;
}

// ---------------------------------------------------------------------------
// Re-analysis of an emitted run directory
// ---------------------------------------------------------------------------

inline RunSummary analyze_run_dir(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError((dir / "manifest.json").string() + ": " + e.what());
    }
    if (!manifest.contains("config")) throw IoError("manifest.json: missing config");
    const ModelConfig cfg = config_from_json(manifest["config"]);
    int acf_max_lag = 50;
    double tail_fraction = 0.025;
    if (manifest.contains("analysis")) {
        const auto& a = manifest["analysis"];
        if (a.contains("acf_max_lag")) acf_max_lag = a["acf_max_lag"].get<int>();
        if (a.contains("tail_fraction")) tail_fraction = a["tail_fraction"].get<double>();
    }

    std::ifstream in(dir / "timeseries.csv");
    if (!in) throw IoError("cannot read " + (dir / "timeseries.csv").string());
    std::vector<double> prices;
    prices.push_back(cfg.V);  // runs start from p(0) = V
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        if (c1 == std::string::npos) continue;
        const auto c2 = line.find(',', c1 + 1);
        prices.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    }

    long defaults = 0;
    {
        std::ifstream ev(dir / "events.csv");
        if (!ev) throw IoError("cannot read " + (dir / "events.csv").string());
        std::getline(ev, line);  // header
        while (std::getline(ev, line))
            if (line.size() > 8 && line.compare(line.size() - 8, 8, ",default") == 0) ++defaults;
    }

    const long T = static_cast<long>(prices.size()) - 1;
    RunSummary s = summarize_prices(prices, cfg.V, defaults, T, acf_max_lag, tail_fraction);
    write_text_atomic(dir / "summary.json", summary_json(s));
    return s;
}

}  // namespace levsim
