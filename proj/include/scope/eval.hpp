#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "scope/baselines.hpp"
#include "scope/config.hpp"
#include "scope/policy.hpp"
#include "scope/rng.hpp"
#include "scope/sim_filecall.hpp"
#include "scope/sim_loanproc.hpp"
#include "scope/simulator.hpp"

namespace scope {

// --- Decision policies -----------------------------------------------------------

/// A policy queried during forward evaluation. Implementations must be pure
/// functions of their construction state and the arguments.
class DecisionPolicy {
public:
    virtual ~DecisionPolicy() = default;
    virtual int choose(std::size_t case_index, int k, const Prefix& prefix,
                       std::span<const int> prior_actions) const = 0;
};

class StageDecisionPolicy final : public DecisionPolicy {
public:
    explicit StageDecisionPolicy(const TrainedPolicy& pol) : pol_(&pol) {}
    int choose(std::size_t, int k, const Prefix& prefix,
               std::span<const int>) const override {
        return pol_->recommend(prefix, k);
    }

private:
    const TrainedPolicy* pol_;
};

class KMeansQDecisionPolicy final : public DecisionPolicy {
public:
    explicit KMeansQDecisionPolicy(const KMeansQPolicy& pol) : pol_(&pol) {}
    int choose(std::size_t, int k, const Prefix& prefix,
               std::span<const int>) const override {
        return pol_->choose(prefix, k);
    }

private:
    const KMeansQPolicy* pol_;
};

/// Uniform action drawn from a stateless hash of (seed, case id, k), so the
/// draw does not depend on evaluation order.
class RandomDecisionPolicy final : public DecisionPolicy {
public:
    RandomDecisionPolicy(std::vector<DecisionPointSpec> specs, std::uint64_t seed)
        : specs_(std::move(specs)), seed_(seed) {}
    int choose(std::size_t, int k, const Prefix& prefix,
               std::span<const int>) const override {
        Rng rng(substream_seed(seed_, "random_action",
                               hash_str(prefix.trace->case_id()),
                               static_cast<std::uint64_t>(k)));
        const auto n = specs_[static_cast<std::size_t>(k - 1)].actions.size();
        return static_cast<int>(rng.uniform_int(n));
    }

private:
    std::vector<DecisionPointSpec> specs_;
    std::uint64_t seed_;
};

class BankDecisionPolicy final : public DecisionPolicy {
public:
    explicit BankDecisionPolicy(const Simulator& sim) : sim_(&sim) {}
    int choose(std::size_t case_index, int, const Prefix&,
               std::span<const int> prior_actions) const override {
        return sim_->bank_action(case_index, prior_actions);
    }

private:
    const Simulator* sim_;
};

// --- Evaluation --------------------------------------------------------------------

struct EvalResult {
    double total = 0.0;
    std::vector<std::vector<int>> actions;  // per evaluated case
};

/// Forward rollout of a policy over the simulator's cases [begin, end): each
/// decision sees the prefix realized under the policy's earlier actions.
inline EvalResult evaluate_policy(const Simulator& sim, const DecisionPolicy& pol,
                                  std::size_t begin = 0,
                                  std::size_t end = static_cast<std::size_t>(-1)) {
    end = std::min(end, sim.num_cases());
    if (begin > end) fail("evaluate_policy: bad case range");
    EvalResult res;
    const std::size_t K = sim.num_decisions();
    for (std::size_t i = begin; i < end; ++i) {
        std::vector<int> actions;
        actions.reserve(K);
        for (std::size_t k = 1; k <= K; ++k) {
            const Trace pre = prefix_trace(sim, i, actions);
            const Prefix prefix{&pre, pre.size()};
            const int a = pol.choose(i, static_cast<int>(k), prefix, actions);
            if (a < 0 || static_cast<std::size_t>(a) >= sim.num_actions(k))
                fail("policy returned action ", a, " outside the action space at decision ",
                     k);
            actions.push_back(a);
        }
        res.total += sim.outcome(i, actions);
        res.actions.push_back(std::move(actions));
    }
    return res;
}

/// Percentage improvement over the historical policy on the same test set.
inline double gain_pct(KpiDirection dir, double policy_total, double bank_total) {
    if (bank_total == 0.0)
        fail("gain is undefined: the historical policy's total KPI is zero");
    const double diff = dir == KpiDirection::Maximize ? policy_total - bank_total
                                                      : bank_total - policy_total;
    return 100.0 * diff / std::abs(bank_total);
}

// --- Simulator construction --------------------------------------------------------

inline std::unique_ptr<Simulator> make_simulator(const ExperimentConfig& cfg, int K) {
    if (cfg.simulator == "filecall") {
        FilecallParams p = cfg.filecall;
        p.num_decisions = static_cast<std::size_t>(K);
        return std::make_unique<FilecallSim>(p);
    }
    if (cfg.simulator == "loanproc") {
        if (K != 2) fail_config("loanproc has exactly 2 decision points, got ", K);
        return std::make_unique<LoanprocSim>(cfg.loanproc);
    }
    fail_config("unknown simulator '", cfg.simulator, "'");
}

// --- Seed derivation ----------------------------------------------------------------

/// All randomness hangs off the master seed through labeled sub-streams keyed
/// by the cell coordinates, so any cell can be reproduced in isolation.
inline std::uint64_t cell_seed(std::uint64_t master, const std::string& stream,
                               const std::string& method, double delta, int n_train,
                               int K, int seed_index) {
    const std::string key = detail::str(stream, "|", method, "|", format_double(delta),
                                        "|", n_train, "|", K, "|", seed_index);
    return substream_seed(master, key);
}

inline std::uint64_t test_cases_seed(std::uint64_t master, int K) {
    return substream_seed(master, "test_cases", static_cast<std::uint64_t>(K));
}

inline std::uint64_t train_cases_seed(std::uint64_t master, int n_train, int K,
                                      int seed_index) {
    return substream_seed(master, "train_cases", static_cast<std::uint64_t>(K),
                          static_cast<std::uint64_t>(n_train),
                          static_cast<std::uint64_t>(seed_index));
}

inline std::uint64_t train_log_seed(std::uint64_t master, int n_train, int K,
                                    int seed_index) {
    return substream_seed(master, "train_log", static_cast<std::uint64_t>(K),
                          static_cast<std::uint64_t>(n_train),
                          static_cast<std::uint64_t>(seed_index));
}

// --- Hyperparameter search -----------------------------------------------------------

namespace detail {

inline double log_uniform(Rng& rng, const TuneRange& r) {
    return std::exp(rng.uniform(std::log(r.lo), std::log(r.hi)));
}

inline int int_uniform(Rng& rng, const TuneRange& r) {
    const auto lo = static_cast<long long>(r.lo);
    const auto hi = static_cast<long long>(r.hi);
    return static_cast<int>(lo + static_cast<long long>(rng.uniform_int(
                                     static_cast<std::uint64_t>(hi - lo + 1))));
}

}  // namespace detail

inline ModelParams sample_model_params(ModelKind kind, const TuneRanges& t,
                                       const ModelParams& base, Rng& rng) {
    ModelParams p = base;
    switch (kind) {
        case ModelKind::Ridge:
            p.l2 = detail::log_uniform(rng, t.ridge_l2);
            break;
        case ModelKind::BoostedTrees:
            p.n_rounds = detail::int_uniform(rng, t.boosted_n_rounds);
            p.max_depth = detail::int_uniform(rng, t.boosted_max_depth);
            p.learning_rate = detail::log_uniform(rng, t.boosted_learning_rate);
            p.min_samples_leaf = detail::int_uniform(rng, t.boosted_min_samples_leaf);
            break;
        case ModelKind::BaggedTrees:
            p.n_trees = detail::int_uniform(rng, t.bagged_n_trees);
            p.max_depth = detail::int_uniform(rng, t.bagged_max_depth);
            p.max_features = rng.uniform(t.bagged_max_features.lo, t.bagged_max_features.hi);
            p.min_samples_leaf = detail::int_uniform(rng, t.bagged_min_samples_leaf);
            break;
        case ModelKind::Mlp: {
            static const std::vector<std::vector<int>> layouts = {
                {16}, {32}, {64}, {32, 16}};
            p.hidden = layouts[rng.uniform_int(layouts.size())];
            p.mlp_learning_rate = detail::log_uniform(rng, t.mlp_learning_rate);
            p.epochs = detail::int_uniform(rng, t.mlp_epochs);
            static const std::vector<int> batches = {16, 32, 64};
            p.batch_size = batches[rng.uniform_int(batches.size())];
            break;
        }
        case ModelKind::Tabular:
            break;
    }
    return p;
}

inline KMeansQConfig sample_kmeansq_config(const TuneRanges& t,
                                           const KMeansQConfig& base, Rng& rng) {
    KMeansQConfig c = base;
    c.n_clusters = static_cast<std::size_t>(detail::int_uniform(rng, t.kmeansq_n_clusters));
    c.qlearn.alpha = detail::log_uniform(rng, t.kmeansq_alpha);
    c.qlearn.epsilon = rng.uniform(t.kmeansq_epsilon.lo, t.kmeansq_epsilon.hi);
    c.qlearn.episodes = detail::int_uniform(rng, t.kmeansq_episodes);
    return c;
}

namespace detail {

/// First ceil(4/5 n) cases form the tuning fit split; the rest validate.
inline std::size_t tune_fit_count(std::size_t n_cases) {
    const std::size_t n_val = std::max<std::size_t>(1, n_cases / 5);
    if (n_val >= n_cases) fail("tuning needs at least two training cases");
    return n_cases - n_val;
}

inline Dataset subset_dataset(const GeneratedLog& glog,
                              const std::vector<DecisionPointSpec>& specs,
                              std::size_t n_cases) {
    auto sub = std::make_shared<EventLog>();
    sub->traces.assign(glog.log->traces.begin(),
                       glog.log->traces.begin() + static_cast<std::ptrdiff_t>(n_cases));
    return build_dataset(std::move(sub), specs, outcome_from_map(glog.outcomes));
}

}  // namespace detail

/// Seeded random search for a stage-policy configuration. Trials train on the
/// first 80% of training cases and are scored by total KPI of a forward
/// rollout over the remaining 20%; ties keep the earlier trial.
inline PolicyConfig tune_stage_policy(const ExperimentConfig& cfg,
                                      const Simulator& train_sim,
                                      const GeneratedLog& glog,
                                      const PolicyConfig& base,
                                      std::uint64_t tune_seed) {
    const std::size_t n_fit = detail::tune_fit_count(train_sim.num_cases());
    const Dataset ds_fit = detail::subset_dataset(glog, train_sim.specs(), n_fit);
    const KpiDirection dir = train_sim.direction();

    PolicyConfig best = base;
    double best_score = 0.0;
    bool have_best = false;
    for (int trial = 0; trial < cfg.tuning.n_trials; ++trial) {
        Rng rng(substream_seed(tune_seed, "trial", static_cast<std::uint64_t>(trial)));
        PolicyConfig candidate = base;
        candidate.model.params =
            sample_model_params(base.model.kind, cfg.tuning.ranges, base.model.params, rng);
        TrainedPolicy pol = train_policy(
            ds_fit, candidate, dir,
            substream_seed(tune_seed, "trial_fit", static_cast<std::uint64_t>(trial)));
        const double score =
            evaluate_policy(train_sim, StageDecisionPolicy(pol), n_fit).total;
        if (!have_best || improves(dir, score, best_score)) {
            best = candidate;
            best_score = score;
            have_best = true;
        }
    }
    return best;
}

/// Seeded random search for KMeans-Q: twice the trial budget, scored by the
/// equal-weight sum of min-max normalized silhouette and average replay
/// reward over the trial batch; ties keep the earlier trial.
inline KMeansQConfig tune_kmeansq(const ExperimentConfig& cfg,
                                  const Simulator& train_sim, const GeneratedLog& glog,
                                  const KMeansQConfig& base, std::uint64_t tune_seed) {
    const std::size_t n_fit = detail::tune_fit_count(train_sim.num_cases());
    const Dataset ds_fit = detail::subset_dataset(glog, train_sim.specs(), n_fit);
    const int n_trials = 2 * cfg.tuning.n_trials;

    std::vector<KMeansQConfig> candidates;
    std::vector<double> sil, reward;
    for (int trial = 0; trial < n_trials; ++trial) {
        Rng rng(substream_seed(tune_seed, "trial", static_cast<std::uint64_t>(trial)));
        KMeansQConfig candidate = sample_kmeansq_config(cfg.tuning.ranges, base, rng);
        KMeansQPolicy pol = train_kmeans_q(
            ds_fit, candidate, train_sim.direction(),
            substream_seed(tune_seed, "trial_fit", static_cast<std::uint64_t>(trial)));
        candidates.push_back(candidate);
        sil.push_back(pol.silhouette_score);
        reward.push_back(pol.avg_value);
    }
    auto normalized = [](const std::vector<double>& v, std::size_t i) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        if (*hi <= *lo) return 0.5;
        return (v[i] - *lo) / (*hi - *lo);
    };
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double score = 0.5 * normalized(sil, i) + 0.5 * normalized(reward, i);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return candidates[best];
}

// --- Sweep cells -------------------------------------------------------------------

struct CellResult {
    std::string method;
    std::string learner = "none";
    std::string base_model = "none";
    double delta = 0.0;
    int n_train = 0;
    int K = 0;
    int seed = 0;
    double total_kpi = 0.0;
    double gain = 0.0;
    bool failed = false;
    std::string error;
};

/// The trainable artifact of a cell, if the method has one.
struct TrainedMethod {
    std::optional<TrainedPolicy> stage;
    std::optional<KMeansQPolicy> kmeansq;
};

inline PolicyConfig stage_policy_config(const ExperimentConfig& cfg, Method method) {
    PolicyConfig pc;
    pc.learner = method_learner(method);
    pc.model = cfg.base_model;
    pc.encode = cfg.encode;
    pc.ra_variant = cfg.ra_variant;
    pc.propagate = method_propagates(method);
    pc.max_seq_len = cfg.max_seq_len;
    return pc;
}

/// Trains the method's policy for one sweep cell. The training log is shared
/// across methods of the same (delta, n_train, K, seed) cell.
inline TrainedMethod train_for_cell(const ExperimentConfig& cfg, Method method,
                                    double delta, int n_train, int K, int seed_index) {
    TrainedMethod out;
    if (!method_is_stage_policy(method) && method != Method::KMeansQ) return out;

    auto sim = make_simulator(cfg, K);
    sim->sample_cases(static_cast<std::size_t>(n_train),
                      train_cases_seed(cfg.seed, n_train, K, seed_index));
    const GeneratedLog glog =
        generate_log(*sim, delta, train_log_seed(cfg.seed, n_train, K, seed_index));
    const Dataset ds =
        build_dataset(glog.log, sim->specs(), outcome_from_map(glog.outcomes));
    const std::string name = to_string(method);
    const std::uint64_t fit_seed =
        cell_seed(cfg.seed, "fit", name, delta, n_train, K, seed_index);
    const std::uint64_t tune_seed =
        cell_seed(cfg.seed, "tune", name, delta, n_train, K, seed_index);

    if (method == Method::KMeansQ) {
        KMeansQConfig kq = cfg.kmeans_q;
        kq.encode = cfg.encode;
        kq.max_seq_len = cfg.max_seq_len;
        if (cfg.tuning.enabled) kq = tune_kmeansq(cfg, *sim, glog, kq, tune_seed);
        out.kmeansq = train_kmeans_q(ds, kq, sim->direction(), fit_seed);
        return out;
    }
    PolicyConfig pc = stage_policy_config(cfg, method);
    if (cfg.tuning.enabled) pc = tune_stage_policy(cfg, *sim, glog, pc, tune_seed);
    out.stage = train_policy(ds, pc, sim->direction(), fit_seed);
    return out;
}

/// Evaluates a method on the cell group's shared test set and fills in total
/// KPI and gain against the bank policy on the same cases.
inline void evaluate_for_cell(const ExperimentConfig& cfg, Method method,
                              const TrainedMethod& trained, double delta, int n_train,
                              int K, int seed_index, CellResult* row) {
    auto sim = make_simulator(cfg, K);
    sim->sample_cases(static_cast<std::size_t>(cfg.test_cases),
                      test_cases_seed(cfg.seed, K));
    const double bank = evaluate_policy(*sim, BankDecisionPolicy(*sim)).total;

    double total = 0.0;
    switch (method) {
        case Method::Bank:
            total = evaluate_policy(*sim, BankDecisionPolicy(*sim)).total;
            break;
        case Method::Random: {
            const std::uint64_t seed = cell_seed(cfg.seed, "random_policy",
                                                 to_string(method), delta, n_train, K,
                                                 seed_index);
            total = evaluate_policy(*sim, RandomDecisionPolicy(sim->specs(), seed)).total;
            break;
        }
        case Method::UpperBound:
            total = upper_bound_total(*sim, cfg.upper_bound_cap);
            break;
        case Method::KMeansQ:
            total = evaluate_policy(*sim, KMeansQDecisionPolicy(*trained.kmeansq)).total;
            break;
        default:
            total = evaluate_policy(*sim, StageDecisionPolicy(*trained.stage)).total;
            break;
    }
    row->total_kpi = total;
    row->gain = gain_pct(sim->direction(), total, bank);
}

inline CellResult run_cell(const ExperimentConfig& cfg, Method method, double delta,
                           int n_train, int K, int seed_index) {
    CellResult row;
    row.method = to_string(method);
    row.delta = delta;
    row.n_train = n_train;
    row.K = K;
    row.seed = seed_index;
    if (method_is_stage_policy(method)) {
        row.learner = to_string(method_learner(method));
        row.base_model = to_string(cfg.base_model.kind);
    }
    try {
        const TrainedMethod trained =
            train_for_cell(cfg, method, delta, n_train, K, seed_index);
        evaluate_for_cell(cfg, method, trained, delta, n_train, K, seed_index, &row);
    } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
    }
    return row;
}

// --- Sweep -------------------------------------------------------------------------

struct GainReport {
    std::string method;
    std::string learner;
    std::string base_model;
    double delta = 0.0;
    int n_train = 0;
    int K = 0;
    double mean_gain = 0.0;
    double std_err = 0.0;
    int n_seeds = 0;
};

struct SweepResult {
    std::vector<CellResult> rows;
    std::vector<GainReport> reports;
};

namespace detail {

inline bool row_order(const CellResult& a, const CellResult& b) {
    if (a.K != b.K) return a.K < b.K;
    if (a.n_train != b.n_train) return a.n_train < b.n_train;
    if (a.delta != b.delta) return a.delta < b.delta;
    if (a.method != b.method) return a.method < b.method;
    return a.seed < b.seed;
}

}  // namespace detail

inline std::vector<GainReport> aggregate_rows(const std::vector<CellResult>& rows) {
    std::map<std::tuple<int, int, double, std::string>, std::vector<const CellResult*>>
        groups;
    for (const auto& r : rows) {
        if (r.failed) continue;
        groups[{r.K, r.n_train, r.delta, r.method}].push_back(&r);
    }
    std::vector<GainReport> reports;
    for (const auto& [key, members] : groups) {
        GainReport rep;
        rep.K = std::get<0>(key);
        rep.n_train = std::get<1>(key);
        rep.delta = std::get<2>(key);
        rep.method = std::get<3>(key);
        rep.learner = members.front()->learner;
        rep.base_model = members.front()->base_model;
        rep.n_seeds = static_cast<int>(members.size());
        std::vector<double> gains;
        for (const auto* m : members) gains.push_back(m->gain);
        rep.mean_gain = mean_of(gains);
        if (gains.size() > 1) {
            double ss = 0.0;
            for (double g : gains) ss += (g - rep.mean_gain) * (g - rep.mean_gain);
            const double sample_std = std::sqrt(ss / static_cast<double>(gains.size() - 1));
            rep.std_err = sample_std / std::sqrt(static_cast<double>(gains.size()));
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

/// Runs the full Cartesian grid. Cells execute independently (optionally on a
/// small thread pool); failures are recorded per cell and do not stop the
/// sweep. Output ordering is canonical, so results are byte-stable for any
/// job count.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int jobs_override = -1) {
    struct Task {
        Method method;
        double delta;
        int n_train;
        int K;
        int seed;
    };
    std::vector<Task> tasks;
    for (int K : cfg.ks)
        for (int n_train : cfg.n_trains)
            for (double delta : cfg.deltas)
                for (Method m : cfg.methods())
                    for (int seed = 0; seed < cfg.n_seeds; ++seed)
                        tasks.push_back(Task{m, delta, n_train, K, seed});

    int jobs = jobs_override >= 0 ? jobs_override : cfg.jobs;
    if (jobs <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        jobs = static_cast<int>(std::min<std::size_t>(tasks.size(), hw ? hw : 1));
    }
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));

    std::vector<CellResult> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            const Task& t = tasks[i];
            rows[i] = run_cell(cfg, t.method, t.delta, t.n_train, t.K, t.seed);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::sort(rows.begin(), rows.end(), detail::row_order);
    SweepResult res;
    res.reports = aggregate_rows(rows);
    res.rows = std::move(rows);
    return res;
}

// --- Report files --------------------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write '", path.string(), "'");
    return out;
}

inline std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

inline void write_sweep_csv(const SweepResult& res, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "method,learner,base_model,delta,n_train,n_decision_points,seed,total_kpi,gain_pct\n";
    for (const auto& r : res.rows) {
        if (r.failed) continue;
        out << r.method << "," << r.learner << "," << r.base_model << ","
            << format_double(r.delta) << "," << r.n_train << "," << r.K << "," << r.seed
            << "," << format_double(r.total_kpi) << "," << format_double(r.gain) << "\n";
    }
}

inline void write_aggregate_csv(const SweepResult& res,
                                const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "method,learner,base_model,delta,n_train,n_decision_points,mean_gain,std_err,"
           "n_seeds\n";
    for (const auto& rep : res.reports) {
        out << rep.method << "," << rep.learner << "," << rep.base_model << ","
            << format_double(rep.delta) << "," << rep.n_train << "," << rep.K << ","
            << format_double(rep.mean_gain) << "," << format_double(rep.std_err) << ","
            << rep.n_seeds << "\n";
    }
}

inline void write_failures_csv(const SweepResult& res,
                               const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "method,delta,n_train,n_decision_points,seed,error\n";
    for (const auto& r : res.rows) {
        if (!r.failed) continue;
        out << r.method << "," << format_double(r.delta) << "," << r.n_train << ","
            << r.K << "," << r.seed << "," << detail::csv_safe(r.error) << "\n";
    }
}

/// One plot-data file per sweep axis and per combination of the other axes:
/// x value followed by each method's mean gain and standard error.
inline std::vector<std::string> write_plot_data(const SweepResult& res,
                                                const std::filesystem::path& dir) {
    std::vector<std::string> written;
    std::vector<std::string> methods;
    for (const auto& rep : res.reports)
        if (std::find(methods.begin(), methods.end(), rep.method) == methods.end())
            methods.push_back(rep.method);
    std::sort(methods.begin(), methods.end());

    struct Axis {
        std::string name;
        std::function<std::string(const GainReport&)> x_of;
        std::function<std::string(const GainReport&)> rest_of;
    };
    const std::vector<Axis> axes = {
        {"delta", [](const GainReport& r) { return format_double(r.delta); },
         [](const GainReport& r) {
             return detail::str("n_train=", r.n_train, "_k=", r.K);
         }},
        {"n_train", [](const GainReport& r) { return detail::str(r.n_train); },
         [](const GainReport& r) {
             return detail::str("delta=", format_double(r.delta), "_k=", r.K);
         }},
        {"n_decision_points", [](const GainReport& r) { return detail::str(r.K); },
         [](const GainReport& r) {
             return detail::str("delta=", format_double(r.delta), "_n_train=", r.n_train);
         }},
    };

    for (const auto& axis : axes) {
        std::map<std::string, std::map<std::string, std::map<std::string, const GainReport*>>>
            files;  // rest -> x -> method -> report
        for (const auto& rep : res.reports)
            files[axis.rest_of(rep)][axis.x_of(rep)][rep.method] = &rep;
        for (const auto& [rest, by_x] : files) {
            const std::string name =
                detail::str("plot_gain_vs_", axis.name, "__", rest, ".csv");
            auto out = detail::open_out(dir / name);
            out << axis.name;
            for (const auto& m : methods) out << "," << m << "_mean_gain," << m << "_std_err";
            out << "\n";
            // numeric x ordering
            std::vector<std::pair<double, std::string>> xs;
            for (const auto& [x, by_method] : by_x) {
                (void)by_method;
                xs.emplace_back(std::stod(x), x);
            }
            std::sort(xs.begin(), xs.end());
            for (const auto& [xv, xs_str] : xs) {
                (void)xv;
                out << xs_str;
                const auto& by_method = by_x.at(xs_str);
                for (const auto& m : methods) {
                    const auto it = by_method.find(m);
                    if (it == by_method.end()) {
                        out << ",,";
                    } else {
                        out << "," << format_double(it->second->mean_gain) << ","
                            << format_double(it->second->std_err);
                    }
                }
                out << "\n";
            }
            written.push_back(name);
        }
    }
    return written;
}

/// Runs the sweep and writes every report file into out_dir.
inline SweepResult run_sweep_to_dir(const ExperimentConfig& cfg,
                                    const std::string& out_dir, int jobs_override = -1) {
    std::filesystem::create_directories(out_dir);
    SweepResult res = run_sweep(cfg, jobs_override);
    const std::filesystem::path dir(out_dir);
    write_sweep_csv(res, dir / "sweep.csv");
    write_aggregate_csv(res, dir / "sweep_aggregate.csv");
    write_failures_csv(res, dir / "failures.csv");
    write_plot_data(res, dir);
    return res;
}

}  // namespace scope
