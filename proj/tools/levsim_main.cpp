// Command-line front end: run single simulations, parameter sweeps and the
// canned scenarios, or recompute summary statistics for an emitted run.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levsim/engine.hpp"
#include "levsim/io.hpp"
#include "levsim/scenarios.hpp"
#include "levsim/version.hpp"

namespace {

using namespace levsim;

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    // Either a count ("5" -> seeds 1..5) or an explicit comma list ("3,7,9").
    std::vector<std::uint64_t> seeds;
    try {
        if (spec.find(',') == std::string::npos) {
            const std::uint64_t n = std::stoull(spec);
            for (std::uint64_t i = 1; i <= n; ++i) seeds.push_back(i);
            return seeds;
        }
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            const auto comma = spec.find(',', pos);
            const std::string tok = spec.substr(pos, comma - pos);
            if (!tok.empty()) seeds.push_back(std::stoull(tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    } catch (const std::exception&) {
        throw ConfigError("--seeds: expected a count or a comma list, got '" + spec + "'");
    }
    return seeds;
}

std::vector<double> parse_values(const std::string& spec) {
    std::vector<double> values;
    try {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            const auto comma = spec.find(',', pos);
            const std::string tok = spec.substr(pos, comma - pos);
            if (!tok.empty()) values.push_back(std::stod(tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    } catch (const std::exception&) {
        throw ConfigError("--values: expected a comma list of numbers, got '" + spec + "'");
    }
    return values;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            std::int64_t seed, bool has_seed, const std::string& out_dir, bool compact,
            const std::string& chi_in, const std::string& chi_out) {
    LoadedConfig loaded = load_config(config_path, sets);
    if (has_seed) loaded.config.seed = static_cast<std::uint64_t>(seed);

    RunOptions opts;
    opts.solver = loaded.solver;
    opts.acf_max_lag = loaded.acf_max_lag;
    opts.tail_fraction = loaded.tail_fraction;
    opts.keep_records = !compact;
    std::vector<double> chi_in_data, chi_out_data;
    if (!chi_in.empty()) {
        chi_in_data = read_chi_series(chi_in);
        opts.chi_in = &chi_in_data;
    }
    if (!chi_out.empty()) opts.chi_out = &chi_out_data;

    const RunArtifact art = run(loaded.config, opts);
    emit_run(art, out_dir, compact);
    if (!chi_out.empty()) write_chi_series(chi_out, chi_out_data);
    std::cout << "run: T=" << art.config.T << " seed=" << art.config.seed
              << " defaults=" << art.count_events(EventKind::kDefault)
              << " margin_calls=" << art.count_events(EventKind::kMarginCall) << " -> "
              << out_dir << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& param, const std::string& values_spec,
              const std::string& seeds_spec, const std::string& out_dir, int jobs) {
    const LoadedConfig loaded = load_config(config_path, sets);
    const std::vector<double> values = parse_values(values_spec);
    const std::vector<std::uint64_t> seeds = parse_seeds(seeds_spec);
    if (values.empty()) throw ConfigError("sweep: --values is empty");

    const SweepTable table = sweep(loaded.config, param, values, seeds, jobs, {}, loaded.solver);

    std::filesystem::create_directories(std::filesystem::path(out_dir) / "tables");
    JsonWriter w;
    w.begin_object();
    w.key("kind").value(std::string_view("sweep"));
    w.key("version").value(std::string_view(kVersion));
    w.key("param").value(std::string_view(param));
    w.key("values").begin_array();
    for (double v : values) w.value(v);
    w.end_array();
    w.key("seeds").begin_array();
    for (auto s : seeds) w.value(s);
    w.end_array();
    w.key("config");
    write_config_json(w, loaded.config);
    w.key("solver");
    write_solver_json(w, loaded.solver);
    w.end_object();
    write_text_atomic(std::filesystem::path(out_dir) / "manifest.json", w.str());

    detail::write_sweep_outputs(std::filesystem::path(out_dir), table);

    // Aggregate every standard metric across seeds.
    struct Field {
        const char* name;
        std::function<std::optional<double>(const CellResult&)> get;
    };
    const std::vector<Field> fields = {
        {"volatility", [](const CellResult& c) { return c.summary.volatility; }},
        {"excess_kurtosis", [](const CellResult& c) { return c.summary.excess_kurt; }},
        {"gamma_negative",
         [](const CellResult& c) -> std::optional<double> {
             if (!c.summary.tail_neg) return std::nullopt;
             return c.summary.tail_neg->gamma;
         }},
        {"default_rate", [](const CellResult& c) { return c.summary.default_rate; }},
        {"mean_price", [](const CellResult& c) { return c.summary.mean_price; }},
    };
    std::string agg = "param,value,metric,n,mean,se\n";
    for (const auto& field : fields) {
        for (const auto& row : aggregate(table, field.get)) {
            agg += param + ',' + fmt_double(row.value) + ',' + field.name + ',' +
                   std::to_string(row.n) + ',' + detail::opt_field(row.mean) + ',' +
                   detail::opt_field(row.se) + '\n';
        }
    }
    write_text_atomic(std::filesystem::path(out_dir) / "tables" / "aggregates.csv", agg);

    long failed = 0;
    for (const auto& c : table.cells)
        if (!c.ok) ++failed;
    std::cout << "sweep: " << table.cells.size() << " cells (" << failed << " failed) -> "
              << out_dir << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_scenario(const std::string& name, const std::string& seeds_spec,
                 const std::string& out_dir, int jobs) {
    ScenarioOptions opts;
    if (!seeds_spec.empty()) opts.seeds = parse_seeds(seeds_spec);
    opts.jobs = jobs;
    run_scenario(name, out_dir, opts);
    std::cout << "scenario " << name << " -> "
              << (std::filesystem::path(out_dir) / name).string() << "\n";
    return 0;
}

int cmd_list_scenarios() {
    for (const auto& s : scenario_catalog()) {
        std::printf("%-20s %s", s.name.c_str(), s.description.c_str());
        if (!s.default_seeds.empty())
            std::printf(" [default seeds: %zu]", s.default_seeds.size());
        std::printf("\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"levsim: leveraged value-investor market simulator"};
    app.set_version_flag("--version", levsim::kVersion);
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Simulate one configuration and emit its files");
    std::string run_config, run_out = "out/run", run_chi_in, run_chi_out;
    std::vector<std::string> run_sets;
    std::int64_t run_seed = 0;
    bool run_compact = false;
    run_cmd->add_option("--config", run_config, "Config or manifest JSON")->required();
    auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the config seed");
    run_cmd->add_option("--out", run_out, "Output directory");
    run_cmd->add_option("--set", run_sets, "Override key=value (dotted path), last wins");
    run_cmd->add_flag("--compact", run_compact, "Emit summary.json and manifest.json only");
    run_cmd->add_option("--chi-in", run_chi_in, "Import the shock series (one value per line)");
    run_cmd->add_option("--chi-out", run_chi_out, "Export the shock series");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Multi-seed parameter sweep");
    std::string sw_config, sw_param, sw_values, sw_seeds = "1", sw_out = "out/sweep";
    std::vector<std::string> sw_sets;
    int sw_jobs = 1;
    sweep_cmd->add_option("--config", sw_config, "Config or manifest JSON")->required();
    sweep_cmd->add_option("--param", sw_param,
                          "Swept parameter: dotted path, or lambda_max/beta for all funds")
        ->required();
    sweep_cmd->add_option("--values", sw_values, "Comma-separated values")->required();
    sweep_cmd->add_option("--seeds", sw_seeds, "Seed count n (-> 1..n) or comma list");
    sweep_cmd->add_option("--out", sw_out, "Output directory");
    sweep_cmd->add_option("--set", sw_sets, "Override key=value before sweeping");
    sweep_cmd->add_option("--jobs", sw_jobs, "Worker threads");

    // scenario
    auto* scen_cmd = app.add_subcommand("scenario", "Run a canned experiment by name");
    std::string sc_name, sc_seeds, sc_out = "out";
    int sc_jobs = 1;
    scen_cmd->add_option("name", sc_name, "Scenario name (see list-scenarios)")->required();
    scen_cmd->add_option("--seeds", sc_seeds, "Seed count n (-> 1..n) or comma list");
    scen_cmd->add_option("--out", sc_out, "Output directory");
    scen_cmd->add_option("--jobs", sc_jobs, "Worker threads");

    // analyze
    auto* an_cmd = app.add_subcommand("analyze", "Recompute summary.json from an emitted run");
    std::string an_in;
    an_cmd->add_option("--in", an_in, "Run directory (timeseries.csv + manifest.json)")
        ->required();

    // list-scenarios
    app.add_subcommand("list-scenarios", "List available scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand("run"))
            return cmd_run(run_config, run_sets, run_seed, seed_opt->count() > 0, run_out,
                           run_compact, run_chi_in, run_chi_out);
        if (app.got_subcommand("sweep"))
            return cmd_sweep(sw_config, sw_sets, sw_param, sw_values, sw_seeds, sw_out, sw_jobs);
        if (app.got_subcommand("scenario")) return cmd_scenario(sc_name, sc_seeds, sc_out, sc_jobs);
        if (app.got_subcommand("analyze")) {
            levsim::analyze_run_dir(an_in);
            std::cout << "analyze: wrote "
                      << (std::filesystem::path(an_in) / "summary.json").string() << "\n";
            return 0;
        }
        if (app.got_subcommand("list-scenarios")) return cmd_list_scenarios();
    } catch (const levsim::UnknownScenario& e) {
        std::cerr << "error: unknown-scenario: " << e.what() << "\n";
        cmd_list_scenarios();
        return 2;
    } catch (const levsim::ConfigError& e) {
        std::cerr << "error: config-invalid: " << e.what() << "\n";
        return 3;
    } catch (const levsim::IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 4;
    } catch (const levsim::ClearingError& e) {
        std::cerr << "error: solver: " << e.what() << "\n";
        return 5;
    } catch (const levsim::EngineError& e) {
        std::cerr << "error: solver: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 6;
    }
    return 0;
}
