#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "scope/eval.hpp"
#include "scope/serialize.hpp"

namespace {

using namespace scope;
namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("scope_ut_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in.good()) << path;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.simulator = "filecall";
    cfg.seed = 20240604;
    cfg.test_cases = 40;
    cfg.deltas = {0.5, 0.9};
    cfg.n_trains = {50};
    cfg.ks = {2};
    cfg.method_names = {"bank", "random"};
    cfg.n_seeds = 3;
    return cfg;
}

TEST(GainPct, BothDirectionsAndSignConventions) {
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Maximize, 110.0, 100.0), 10.0);
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Minimize, 90.0, 100.0), 10.0);
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Maximize, 90.0, 100.0), -10.0);
    // Negative denominators normalize by magnitude.
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Minimize, -150.0, -100.0), 50.0);
    // Swapping the roles of equal-magnitude totals flips the sign exactly.
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Maximize, -100.0, 100.0), -200.0);
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Maximize, 100.0, -100.0), 200.0);
    // Against the same incumbent the two directions are exact negations.
    EXPECT_DOUBLE_EQ(gain_pct(KpiDirection::Maximize, 70.0, 120.0),
                     -gain_pct(KpiDirection::Minimize, 70.0, 120.0));
    EXPECT_THROW(gain_pct(KpiDirection::Maximize, 5.0, 0.0), std::runtime_error);
}

TEST(EvaluatePolicy, BankRolloutReproducesBankTotalBitForBit) {
    FilecallParams p;
    p.num_decisions = 2;
    FilecallSim sim(p);
    sim.sample_cases(50, 321);
    const EvalResult res = evaluate_policy(sim, BankDecisionPolicy(sim));
    EXPECT_DOUBLE_EQ(res.total, bank_total(sim));
    ASSERT_EQ(res.actions.size(), 50u);
    // Case ranges partition the total.
    const double head = evaluate_policy(sim, BankDecisionPolicy(sim), 0, 10).total;
    double tail = 0.0;
    for (std::size_t i = 10; i < 50; ++i)
        tail += sim.outcome(i, res.actions[i]);
    EXPECT_DOUBLE_EQ(head + tail, res.total);
    EXPECT_THROW(evaluate_policy(sim, BankDecisionPolicy(sim), 60, 50),
                 std::runtime_error);
}

TEST(EvaluatePolicy, RejectsActionsOutsideTheSpace) {
    class Rogue final : public DecisionPolicy {
    public:
        int choose(std::size_t, int, const Prefix&, std::span<const int>) const override {
            return 7;
        }
    };
    FilecallParams p;
    p.num_decisions = 2;
    FilecallSim sim(p);
    sim.sample_cases(3, 5);
    EXPECT_THROW(evaluate_policy(sim, Rogue()), std::runtime_error);
}

TEST(RandomDecisionPolicy, DrawsAreIndependentOfEvaluationOrder) {
    FilecallParams p;
    p.num_decisions = 3;
    FilecallSim sim(p);
    sim.sample_cases(20, 9);
    const RandomDecisionPolicy pol(sim.specs(), 777);
    const EvalResult whole = evaluate_policy(sim, pol);
    for (std::size_t i = 0; i < 20; ++i) {
        const EvalResult one = evaluate_policy(sim, pol, i, i + 1);
        EXPECT_EQ(one.actions.front(), whole.actions[i]) << "case " << i;
    }
    // Both action values appear somewhere.
    std::set<int> seen;
    for (const auto& acts : whole.actions)
        for (int a : acts) seen.insert(a);
    EXPECT_EQ(seen.size(), 2u);
}

TEST(MakeSimulator, BuildsTheRequestedFamilyAndChecksK) {
    ExperimentConfig cfg;
    cfg.simulator = "filecall";
    EXPECT_EQ(make_simulator(cfg, 4)->num_decisions(), 4u);
    cfg.simulator = "loanproc";
    EXPECT_EQ(make_simulator(cfg, 2)->name(), "loanproc");
    EXPECT_THROW(make_simulator(cfg, 3), ConfigError);
    cfg.simulator = "nope";
    EXPECT_THROW(make_simulator(cfg, 2), ConfigError);
}

TEST(CellSeeds, SeparateEveryCoordinate) {
    const std::uint64_t m = 42;
    const auto base = cell_seed(m, "fit", "scope-s", 0.9, 100, 2, 0);
    EXPECT_NE(base, cell_seed(m, "tune", "scope-s", 0.9, 100, 2, 0));
    EXPECT_NE(base, cell_seed(m, "fit", "sep-s", 0.9, 100, 2, 0));
    EXPECT_NE(base, cell_seed(m, "fit", "scope-s", 0.95, 100, 2, 0));
    EXPECT_NE(base, cell_seed(m, "fit", "scope-s", 0.9, 200, 2, 0));
    EXPECT_NE(base, cell_seed(m, "fit", "scope-s", 0.9, 100, 3, 0));
    EXPECT_NE(base, cell_seed(m, "fit", "scope-s", 0.9, 100, 2, 1));
    EXPECT_EQ(base, cell_seed(m, "fit", "scope-s", 0.9, 100, 2, 0));
    // The evaluation set is pinned per decision-point count only.
    EXPECT_EQ(test_cases_seed(m, 3), test_cases_seed(m, 3));
    EXPECT_NE(test_cases_seed(m, 2), test_cases_seed(m, 3));
    EXPECT_NE(train_cases_seed(m, 100, 2, 0), train_cases_seed(m, 100, 2, 1));
    EXPECT_NE(train_cases_seed(m, 100, 2, 0), train_log_seed(m, 100, 2, 0));
}

TEST(SampleModelParams, StaysInsideTheConfiguredRanges) {
    const TuneRanges t;
    ModelParams base;
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        const auto p = sample_model_params(ModelKind::BoostedTrees, t, base, rng);
        EXPECT_GE(p.n_rounds, 50);
        EXPECT_LE(p.n_rounds, 300);
        EXPECT_GE(p.max_depth, 2);
        EXPECT_LE(p.max_depth, 5);
        EXPECT_GE(p.learning_rate, 0.02);
        EXPECT_LE(p.learning_rate, 0.3);
        EXPECT_GE(p.min_samples_leaf, 2);
        EXPECT_LE(p.min_samples_leaf, 20);
    }
    for (int i = 0; i < 50; ++i) {
        const auto p = sample_model_params(ModelKind::Mlp, t, base, rng);
        const bool known_layout = p.hidden == std::vector<int>{16} ||
                                  p.hidden == std::vector<int>{32} ||
                                  p.hidden == std::vector<int>{64} ||
                                  p.hidden == (std::vector<int>{32, 16});
        EXPECT_TRUE(known_layout);
        EXPECT_TRUE(p.batch_size == 16 || p.batch_size == 32 || p.batch_size == 64);
        EXPECT_GE(p.mlp_learning_rate, 0.001);
        EXPECT_LE(p.mlp_learning_rate, 0.1);
    }
    // Tabular has nothing to tune; the base parameters pass through.
    const auto p = sample_model_params(ModelKind::Tabular, t, base, rng);
    EXPECT_EQ(p.n_rounds, base.n_rounds);

    const auto kq = sample_kmeansq_config(t, KMeansQConfig{}, rng);
    EXPECT_GE(kq.n_clusters, 2u);
    EXPECT_LE(kq.n_clusters, 20u);
    EXPECT_GE(kq.qlearn.epsilon, 0.02);
    EXPECT_LE(kq.qlearn.epsilon, 0.3);
}

TEST(TuneFitCount, SplitsOffAtLeastOneValidationCase) {
    EXPECT_EQ(detail::tune_fit_count(10), 8u);
    EXPECT_EQ(detail::tune_fit_count(5), 4u);
    EXPECT_EQ(detail::tune_fit_count(4), 3u);  // fifth rounds down, floor of one
    EXPECT_EQ(detail::tune_fit_count(2), 1u);
    EXPECT_THROW(detail::tune_fit_count(1), std::runtime_error);
}

TEST(TuneStagePolicy, IsDeterministicAndTrialZeroWinsWhenAlone) {
    ExperimentConfig cfg = small_config();
    cfg.tuning.enabled = true;
    cfg.tuning.n_trials = 1;
    cfg.tuning.ranges.boosted_n_rounds = {5, 12};
    cfg.tuning.ranges.boosted_max_depth = {2, 3};

    auto sim = make_simulator(cfg, 2);
    sim->sample_cases(50, train_cases_seed(cfg.seed, 50, 2, 0));
    const GeneratedLog glog = generate_log(*sim, 0.8, train_log_seed(cfg.seed, 50, 2, 0));
    PolicyConfig base;
    base.model.kind = ModelKind::BoostedTrees;

    const std::uint64_t tune_seed = 9090;
    const PolicyConfig won = tune_stage_policy(cfg, *sim, glog, base, tune_seed);

    // A single trial must return exactly the first sampled candidate.
    Rng rng(substream_seed(tune_seed, "trial", 0));
    const ModelParams expect =
        sample_model_params(base.model.kind, cfg.tuning.ranges, base.model.params, rng);
    EXPECT_EQ(won.model.params.n_rounds, expect.n_rounds);
    EXPECT_EQ(won.model.params.max_depth, expect.max_depth);
    EXPECT_DOUBLE_EQ(won.model.params.learning_rate, expect.learning_rate);
    EXPECT_EQ(won.model.params.min_samples_leaf, expect.min_samples_leaf);

    cfg.tuning.n_trials = 3;
    const PolicyConfig a = tune_stage_policy(cfg, *sim, glog, base, tune_seed);
    const PolicyConfig b = tune_stage_policy(cfg, *sim, glog, base, tune_seed);
    EXPECT_EQ(a.model.params.n_rounds, b.model.params.n_rounds);
    EXPECT_DOUBLE_EQ(a.model.params.learning_rate, b.model.params.learning_rate);
}

TEST(RunCell, BankGainIsExactlyZero) {
    ExperimentConfig cfg = small_config();
    const CellResult row = run_cell(cfg, Method::Bank, 0.9, 50, 2, 0);
    ASSERT_FALSE(row.failed) << row.error;
    EXPECT_DOUBLE_EQ(row.gain, 0.0);
    EXPECT_EQ(row.learner, "none");
    EXPECT_EQ(row.base_model, "none");
    EXPECT_GT(row.total_kpi, 0.0);
}

TEST(RunCell, RandomActionsLoseToTheIncumbentOnAverage) {
    ExperimentConfig cfg = small_config();
    cfg.test_cases = 200;
    double mean = 0.0;
    for (int s = 0; s < 3; ++s) {
        const CellResult row = run_cell(cfg, Method::Random, 1.0, 50, 2, s);
        ASSERT_FALSE(row.failed) << row.error;
        mean += row.gain;
    }
    EXPECT_LT(mean / 3.0, 0.0);
}

TEST(RunSweep, ProducesOneRowPerCellAndCanonicalOrder) {
    const ExperimentConfig cfg = small_config();
    const SweepResult res = run_sweep(cfg, 1);
    ASSERT_EQ(res.rows.size(), 12u);  // 2 deltas x 2 methods x 3 seeds
    ASSERT_EQ(res.reports.size(), 4u);
    for (std::size_t i = 1; i < res.rows.size(); ++i)
        EXPECT_FALSE(detail::row_order(res.rows[i], res.rows[i - 1]));
    for (const auto& rep : res.reports) {
        EXPECT_EQ(rep.n_seeds, 3);
        // Recompute the aggregate from its member rows.
        std::vector<double> gains;
        for (const auto& row : res.rows)
            if (row.method == rep.method && row.delta == rep.delta &&
                row.n_train == rep.n_train && row.K == rep.K)
                gains.push_back(row.gain);
        ASSERT_EQ(gains.size(), 3u);
        const double mean = (gains[0] + gains[1] + gains[2]) / 3.0;
        EXPECT_DOUBLE_EQ(rep.mean_gain, mean);
        double ss = 0.0;
        for (double g : gains) ss += (g - mean) * (g - mean);
        EXPECT_DOUBLE_EQ(rep.std_err, std::sqrt(ss / 2.0) / std::sqrt(3.0));
    }
    // Bank rows never move off zero gain.
    for (const auto& row : res.rows) {
        if (row.method == "bank") {
            EXPECT_DOUBLE_EQ(row.gain, 0.0);
        }
    }
}

TEST(AggregateRows, SkipsFailuresAndHandlesSingletons) {
    std::vector<CellResult> rows(4);
    for (auto& r : rows) {
        r.method = "bank";
        r.delta = 0.9;
        r.n_train = 10;
        r.K = 2;
    }
    rows[0].gain = 1.0;
    rows[1].gain = 2.0;
    rows[2].gain = 3.0;
    rows[2].seed = 2;
    rows[1].seed = 1;
    rows[3].failed = true;
    rows[3].seed = 3;
    const auto reports = aggregate_rows(rows);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(reports[0].n_seeds, 3);
    EXPECT_DOUBLE_EQ(reports[0].mean_gain, 2.0);
    EXPECT_DOUBLE_EQ(reports[0].std_err, 1.0 / std::sqrt(3.0));

    const auto one = aggregate_rows({rows[0]});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one[0].std_err, 0.0);
    EXPECT_EQ(one[0].n_seeds, 1);
}

TEST(SweepFiles, FailuresAreRecordedWithoutStoppingTheSweep) {
    ExperimentConfig cfg = small_config();
    cfg.method_names = {"upper-bound", "bank"};
    cfg.n_seeds = 1;
    cfg.upper_bound_cap = 1;  // forces every upper-bound cell to fail
    const fs::path dir = fresh_dir("sweep_failures");
    const SweepResult res = run_sweep_to_dir(cfg, dir.string(), 1);

    std::size_t failed = 0;
    for (const auto& row : res.rows) {
        if (row.method == "upper-bound") {
            EXPECT_TRUE(row.failed);
            EXPECT_NE(row.error.find("cap"), std::string::npos) << row.error;
            ++failed;
        } else {
            EXPECT_FALSE(row.failed);
        }
    }
    EXPECT_EQ(failed, 2u);

    const std::string failures = slurp(dir / "failures.csv");
    EXPECT_NE(failures.find("upper-bound"), std::string::npos);
    EXPECT_EQ(failures.find("bank"), std::string::npos);
    const std::string sweep = slurp(dir / "sweep.csv");
    EXPECT_EQ(sweep.find("upper-bound"), std::string::npos);
    // Aggregates only cover the surviving method.
    for (const auto& rep : res.reports) EXPECT_EQ(rep.method, "bank");
    fs::remove_all(dir);
}

TEST(SweepFiles, CsvSafeResolvesDelimiters) {
    EXPECT_EQ(detail::csv_safe("a,b\nc\rd"), "a;b;c;d");
}

TEST(SweepFiles, OutputsAreByteIdenticalAcrossJobCountsAndReruns) {
    const ExperimentConfig cfg = small_config();
    const fs::path d1 = fresh_dir("sweep_jobs1");
    const fs::path d2 = fresh_dir("sweep_jobs2");
    const fs::path d3 = fresh_dir("sweep_rerun");
    run_sweep_to_dir(cfg, d1.string(), 1);
    run_sweep_to_dir(cfg, d2.string(), 2);
    run_sweep_to_dir(cfg, d3.string(), 1);

    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(d1)) names.insert(e.path().filename().string());
    EXPECT_TRUE(names.count("sweep.csv"));
    EXPECT_TRUE(names.count("sweep_aggregate.csv"));
    EXPECT_TRUE(names.count("failures.csv"));
    std::set<std::string> names2;
    for (const auto& e : fs::directory_iterator(d2)) names2.insert(e.path().filename().string());
    EXPECT_EQ(names, names2);
    for (const auto& n : names) {
        EXPECT_EQ(slurp(d1 / n), slurp(d2 / n)) << n;
        EXPECT_EQ(slurp(d1 / n), slurp(d3 / n)) << n;
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::remove_all(d3);
}

TEST(SweepFiles, PlotDataCoversEveryAxisCombination) {
    const ExperimentConfig cfg = small_config();
    const fs::path dir = fresh_dir("sweep_plots");
    const SweepResult res = run_sweep_to_dir(cfg, dir.string(), 1);

    // 1 delta-axis file, 2 n_train-axis files, 2 K-axis files.
    EXPECT_TRUE(fs::exists(dir / "plot_gain_vs_delta__n_train=50_k=2.csv"));
    EXPECT_TRUE(fs::exists(dir / "plot_gain_vs_n_train__delta=0.5_k=2.csv"));
    EXPECT_TRUE(fs::exists(dir / "plot_gain_vs_n_train__delta=0.9_k=2.csv"));
    EXPECT_TRUE(fs::exists(dir / "plot_gain_vs_n_decision_points__delta=0.5_n_train=50.csv"));
    EXPECT_TRUE(fs::exists(dir / "plot_gain_vs_n_decision_points__delta=0.9_n_train=50.csv"));

    const std::string plot = slurp(dir / "plot_gain_vs_delta__n_train=50_k=2.csv");
    std::istringstream lines(plot);
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    EXPECT_EQ(header, "delta,bank_mean_gain,bank_std_err,random_mean_gain,random_std_err");
    auto expect_row = [&](double delta) {
        std::string want = format_double(delta);
        for (const std::string m : {"bank", "random"}) {
            for (const auto& rep : res.reports)
                if (rep.method == m && rep.delta == delta)
                    want += "," + format_double(rep.mean_gain) + "," +
                            format_double(rep.std_err);
        }
        return want;
    };
    EXPECT_EQ(row1, expect_row(0.5));  // numeric ascending x
    EXPECT_EQ(row2, expect_row(0.9));
    fs::remove_all(dir);
}

TEST(TrainEvaluateSplit, ReproducesTheSweepCellThroughAnArtifactFile) {
    ExperimentConfig cfg = small_config();
    cfg.base_model.kind = ModelKind::Tabular;
    cfg.test_cases = 50;
    const fs::path dir = fresh_dir("train_eval_split");

    const CellResult direct = run_cell(cfg, Method::ScopeS, 0.8, 40, 2, 1);
    ASSERT_FALSE(direct.failed) << direct.error;

    TrainedMethod trained = train_for_cell(cfg, Method::ScopeS, 0.8, 40, 2, 1);
    ASSERT_TRUE(trained.stage.has_value());
    const std::string path = (dir / "policy.json").string();
    save_policy(*trained.stage, path);

    TrainedMethod loaded;
    loaded.stage = load_policy(path);
    CellResult row;
    evaluate_for_cell(cfg, Method::ScopeS, loaded, 0.8, 40, 2, 1, &row);
    EXPECT_DOUBLE_EQ(row.total_kpi, direct.total_kpi);
    EXPECT_DOUBLE_EQ(row.gain, direct.gain);
    fs::remove_all(dir);
}

TEST(TrainEvaluateSplit, KMeansQArtifactsRoundTripThroughDisk) {
    ExperimentConfig cfg = small_config();
    cfg.test_cases = 50;
    cfg.kmeans_q.n_clusters = 3;
    cfg.kmeans_q.qlearn.episodes = 500;
    const fs::path dir = fresh_dir("train_eval_kq");

    const CellResult direct = run_cell(cfg, Method::KMeansQ, 0.8, 40, 2, 0);
    ASSERT_FALSE(direct.failed) << direct.error;

    TrainedMethod trained = train_for_cell(cfg, Method::KMeansQ, 0.8, 40, 2, 0);
    ASSERT_TRUE(trained.kmeansq.has_value());
    const std::string path = (dir / "kq.json").string();
    save_kmeansq(*trained.kmeansq, path);

    TrainedMethod loaded;
    loaded.kmeansq = load_kmeansq(path);
    CellResult row;
    evaluate_for_cell(cfg, Method::KMeansQ, loaded, 0.8, 40, 2, 0, &row);
    EXPECT_DOUBLE_EQ(row.total_kpi, direct.total_kpi);
    EXPECT_DOUBLE_EQ(row.gain, direct.gain);
    fs::remove_all(dir);
}

}  // namespace
