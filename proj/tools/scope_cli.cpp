#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "scope/config.hpp"
#include "scope/eval.hpp"
#include "scope/selftest.hpp"
#include "scope/serialize.hpp"

namespace {

using namespace scope;

struct CellSelector {
    std::optional<double> delta;
    std::optional<int> n_train;
    std::optional<int> k;
    std::optional<int> seed;
};

CellSelector parse_cell(const std::string& text) {
    CellSelector sel;
    if (text.empty()) return sel;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        pos = comma + 1;
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos)
            fail_config("--cell expects axis=value pairs, got '", part, "'");
        const std::string key = part.substr(0, eq);
        const std::string value = part.substr(eq + 1);
        try {
            if (key == "delta") sel.delta = std::stod(value);
            else if (key == "n_train") sel.n_train = std::stoi(value);
            else if (key == "n_decision_points") sel.k = std::stoi(value);
            else if (key == "seed") sel.seed = std::stoi(value);
            else
                fail_config("--cell: unknown axis '", key,
                            "' (expected delta, n_train, n_decision_points, seed)");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail_config("--cell: cannot parse value '", value, "' for axis '", key, "'");
        }
    }
    return sel;
}

struct ResolvedCell {
    double delta;
    int n_train;
    int k;
    int seed;
};

ResolvedCell resolve_cell(const ExperimentConfig& cfg, const CellSelector& sel) {
    ResolvedCell cell;
    cell.delta = sel.delta.value_or(cfg.deltas.front());
    cell.n_train = sel.n_train.value_or(cfg.n_trains.front());
    cell.k = sel.k.value_or(cfg.ks.front());
    cell.seed = sel.seed.value_or(0);
    if (cell.seed < 0) fail_config("--cell: seed must be >= 0");
    return cell;
}

template <typename T>
void filter_axis(std::vector<T>& axis, const std::optional<T>& wanted,
                 const char* name) {
    if (!wanted) return;
    std::vector<T> kept;
    for (const T& v : axis)
        if (v == *wanted) kept.push_back(v);
    if (kept.empty())
        fail_config("--cell: ", name, " value is not in the config's ", name, " axis");
    axis = std::move(kept);
}

void check_diagnostics(const ExperimentConfig& cfg) {
    const ConfigDiagnostics diag = validate_experiment_config(cfg);
    for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";
    if (!diag.ok()) {
        for (const auto& e : diag.errors) std::cerr << "error: " << e << "\n";
        fail_config("configuration has ", diag.errors.size(), " error(s)");
    }
}

std::filesystem::path artifact_path(const ExperimentConfig& cfg, Method method) {
    return std::filesystem::path(cfg.out_dir) /
           (std::string("policy_") + to_string(method) + ".json");
}

void check_specs_match(const std::vector<DecisionPointSpec>& artifact,
                       const std::vector<DecisionPointSpec>& sim) {
    if (artifact.size() != sim.size())
        fail_config("policy artifact has ", artifact.size(),
                    " decision points but the simulator has ", sim.size());
    for (std::size_t i = 0; i < sim.size(); ++i) {
        if (artifact[i].actions != sim[i].actions ||
            artifact[i].prefix_length != sim[i].prefix_length)
            fail_config("policy artifact disagrees with the simulator at decision point ",
                        i + 1);
    }
}

int cmd_simulate(const ExperimentConfig& cfg, const ResolvedCell& cell) {
    check_diagnostics(cfg);
    auto sim = make_simulator(cfg, cell.k);
    sim->sample_cases(static_cast<std::size_t>(cell.n_train),
                      train_cases_seed(cfg.seed, cell.n_train, cell.k, cell.seed));
    const GeneratedLog glog = generate_log(
        *sim, cell.delta, train_log_seed(cfg.seed, cell.n_train, cell.k, cell.seed));
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);
    save_log_csv(*glog.log, (dir / "log.csv").string());
    save_outcomes_csv(glog.outcomes, (dir / "outcomes.csv").string());
    {
        std::ofstream hints(dir / "schema_hints.txt");
        if (!hints) fail("cannot write '", (dir / "schema_hints.txt").string(), "'");
        for (const auto& h : derive_schema_hints(*glog.log)) hints << h << "\n";
    }
    std::cout << "wrote " << glog.log->num_cases() << " cases ("
              << glog.log->num_events() << " events) to " << cfg.out_dir
              << " [simulator=" << cfg.simulator << " delta=" << format_double(cell.delta)
              << " n_decision_points=" << cell.k << " seed_index=" << cell.seed << "]\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const ResolvedCell& cell,
              const std::string& method_name) {
    check_diagnostics(cfg);
    if (method_name.empty()) fail_config("train requires --method");
    const Method method = method_from_string(method_name);
    if (!method_is_stage_policy(method) && method != Method::KMeansQ)
        fail_config("method '", method_name, "' has nothing to train");
    const TrainedMethod trained =
        train_for_cell(cfg, method, cell.delta, cell.n_train, cell.k, cell.seed);
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = artifact_path(cfg, method);
    if (trained.stage) save_policy(*trained.stage, path.string());
    else save_kmeansq(*trained.kmeansq, path.string());
    std::cout << "trained " << method_name << " on " << cell.n_train
              << " cases [delta=" << format_double(cell.delta)
              << " n_decision_points=" << cell.k << " seed_index=" << cell.seed
              << "]\nwrote " << path.string() << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const ResolvedCell& cell,
                 const std::string& method_name) {
    check_diagnostics(cfg);
    if (method_name.empty()) fail_config("evaluate requires --method");
    const Method method = method_from_string(method_name);

    CellResult row;
    row.method = to_string(method);
    row.delta = cell.delta;
    row.n_train = cell.n_train;
    row.K = cell.k;
    row.seed = cell.seed;

    TrainedMethod trained;
    if (method_is_stage_policy(method)) {
        TrainedPolicy pol = load_policy(artifact_path(cfg, method).string());
        check_specs_match(pol.specs, make_simulator(cfg, cell.k)->specs());
        row.learner = to_string(pol.config.learner);
        row.base_model = to_string(pol.config.model.kind);
        trained.stage = std::move(pol);
    } else if (method == Method::KMeansQ) {
        KMeansQPolicy pol = load_kmeansq(artifact_path(cfg, method).string());
        check_specs_match(pol.specs, make_simulator(cfg, cell.k)->specs());
        trained.kmeansq = std::move(pol);
    }
    evaluate_for_cell(cfg, method, trained, cell.delta, cell.n_train, cell.k, cell.seed,
                      &row);

    std::filesystem::create_directories(cfg.out_dir);
    SweepResult one;
    one.rows.push_back(row);
    const auto csv = std::filesystem::path(cfg.out_dir) /
                     (std::string("evaluate_") + row.method + ".csv");
    write_sweep_csv(one, csv);
    std::cout << "method=" << row.method << " delta=" << format_double(row.delta)
              << " n_train=" << row.n_train << " n_decision_points=" << row.K
              << " seed_index=" << row.seed << "\n"
              << "total_kpi=" << format_double(row.total_kpi) << "\n"
              << "gain_pct=" << format_double(row.gain) << "\n"
              << "wrote " << csv.string() << "\n";
    return 0;
}

int cmd_sweep(ExperimentConfig cfg, const CellSelector& sel,
              const std::string& method_name) {
    if (sel.seed)
        fail_config("--cell: seed selection applies to simulate/train/evaluate; "
                    "sweep always runs seeds 0..n_seeds-1");
    filter_axis(cfg.deltas, sel.delta, "delta");
    filter_axis(cfg.n_trains, sel.n_train, "n_train");
    filter_axis(cfg.ks, sel.k, "n_decision_points");
    if (!method_name.empty()) {
        method_from_string(method_name);  // reject unknown names early
        cfg.method_names = {method_name};
    }
    check_diagnostics(cfg);
    const SweepResult res = run_sweep_to_dir(cfg, cfg.out_dir, cfg.jobs);
    std::size_t failed = 0;
    for (const auto& r : res.rows) failed += r.failed ? 1u : 0u;
    std::cout << "sweep finished: " << res.rows.size() - failed << " rows, "
              << res.reports.size() << " aggregates, " << failed << " failed cells\n"
              << "reports in " << cfg.out_dir << " (sweep.csv, sweep_aggregate.csv, "
              << "failures.csv, plot_*.csv)\n";
    return 0;
}

int cmd_selftest() {
    const auto results = run_selftests();
    bool all = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "[ ok ] " : "[FAIL] ") << r.name;
        if (!r.pass) std::cout << ": " << r.detail;
        std::cout << "\n";
        all = all && r.pass;
    }
    if (!all) fail("selftest failed");
    std::cout << results.size() << " checks passed\n";
    return 0;
}

int cmd_validate(const ExperimentConfig& cfg) {
    const ConfigDiagnostics diag = validate_experiment_config(cfg);
    for (const auto& e : diag.errors) std::cout << "error: " << e << "\n";
    for (const auto& w : diag.warnings) std::cout << "warning: " << w << "\n";
    if (diag.ok()) {
        std::cout << "config ok (" << diag.warnings.size() << " warning(s))\n";
        return 0;
    }
    std::cout << diag.errors.size() << " error(s), " << diag.warnings.size()
              << " warning(s)\n";
    return 1;
}

int run(int argc, char** argv) {
    CLI::App app{"Sequential process intervention policies: simulate, train, "
                 "evaluate, sweep"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, method_name, cell_text;
    std::uint64_t seed = 0;
    int jobs = -1;
    auto* opt_config = app.add_option("--config", config_path, "experiment config (JSON)");
    auto* opt_out = app.add_option("--out-dir", out_dir, "output directory");
    auto* opt_seed = app.add_option("--seed", seed, "master seed override");
    auto* opt_jobs = app.add_option("--jobs", jobs, "parallel sweep cells (0 = auto)");
    app.add_option("--method", method_name, "method name (train/evaluate/sweep)");
    app.add_option("--cell", cell_text,
                   "cell coordinates, e.g. delta=0.9,n_train=2000,"
                   "n_decision_points=2,seed=0");

    auto* sub_simulate =
        app.add_subcommand("simulate", "generate a confounded training log as CSV");
    auto* sub_train = app.add_subcommand("train", "fit one method and save the policy");
    auto* sub_evaluate =
        app.add_subcommand("evaluate", "evaluate a saved policy on the shared test set");
    auto* sub_sweep = app.add_subcommand("sweep", "run the full experiment grid");
    auto* sub_selftest =
        app.add_subcommand("selftest", "run built-in oracle and property checks");
    auto* sub_validate =
        app.add_subcommand("validate", "check a config and list diagnostics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (sub_selftest->parsed()) return cmd_selftest();

    if (sub_validate->parsed() && config_path.empty())
        fail_config("validate requires --config");
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_experiment_config(config_path);

    // Flags beat environment variables beat the config file.
    if (const char* env = std::getenv("SCOPE_OUT_DIR"); env && *env) cfg.out_dir = env;
    if (const char* env = std::getenv("SCOPE_JOBS"); env && *env) {
        try {
            cfg.jobs = std::stoi(env);
        } catch (const std::exception&) {
            fail_config("SCOPE_JOBS must be an integer, got '", env, "'");
        }
    }
    if (opt_out->count() > 0) cfg.out_dir = out_dir;
    if (opt_jobs->count() > 0) cfg.jobs = jobs;
    if (opt_seed->count() > 0) cfg.seed = seed;
    (void)opt_config;

    if (sub_validate->parsed()) return cmd_validate(cfg);

    const CellSelector sel = parse_cell(cell_text);
    if (sub_simulate->parsed()) return cmd_simulate(cfg, resolve_cell(cfg, sel));
    if (sub_train->parsed()) return cmd_train(cfg, resolve_cell(cfg, sel), method_name);
    if (sub_evaluate->parsed())
        return cmd_evaluate(cfg, resolve_cell(cfg, sel), method_name);
    if (sub_sweep->parsed()) return cmd_sweep(cfg, sel, method_name);
    fail_config("unknown subcommand");
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const scope::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
