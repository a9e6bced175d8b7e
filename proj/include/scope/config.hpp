#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scope/baselines.hpp"
#include "scope/causal.hpp"
#include "scope/common.hpp"
#include "scope/encoding.hpp"
#include "scope/regressors.hpp"
#include "scope/sim_filecall.hpp"
#include "scope/sim_loanproc.hpp"

namespace scope {

enum class Method {
    ScopeS, ScopeT, ScopeRA,
    SepS, SepT, SepRA,
    KMeansQ, Random, Bank, UpperBound,
};

inline const char* to_string(Method m) {
    switch (m) {
        case Method::ScopeS: return "scope-s";
        case Method::ScopeT: return "scope-t";
        case Method::ScopeRA: return "scope-ra";
        case Method::SepS: return "sep-s";
        case Method::SepT: return "sep-t";
        case Method::SepRA: return "sep-ra";
        case Method::KMeansQ: return "kmeans-q";
        case Method::Random: return "random";
        case Method::Bank: return "bank";
        case Method::UpperBound: return "upper-bound";
    }
    return "?";
}

inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = {
        Method::ScopeS, Method::ScopeT, Method::ScopeRA,
        Method::SepS,   Method::SepT,   Method::SepRA,
        Method::KMeansQ, Method::Random, Method::Bank, Method::UpperBound,
    };
    return methods;
}

inline Method method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (s == to_string(m)) return m;
    fail_config("unknown method '", s, "'");
}

/// Methods whose policy is a per-decision-point stage learner.
inline bool method_is_stage_policy(Method m) {
    switch (m) {
        case Method::ScopeS: case Method::ScopeT: case Method::ScopeRA:
        case Method::SepS: case Method::SepT: case Method::SepRA:
            return true;
        default:
            return false;
    }
}

inline bool method_propagates(Method m) {
    return m == Method::ScopeS || m == Method::ScopeT || m == Method::ScopeRA;
}

inline LearnerKind method_learner(Method m) {
    switch (m) {
        case Method::ScopeS: case Method::SepS: return LearnerKind::S;
        case Method::ScopeT: case Method::SepT: return LearnerKind::T;
        case Method::ScopeRA: case Method::SepRA: return LearnerKind::RA;
        default: fail("method ", to_string(m), " has no learner");
    }
}

// --- Tuning ---------------------------------------------------------------------

struct TuneRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Random-search ranges per hyperparameter. Integer parameters draw uniformly
/// over [lo, hi]; rates marked log-scale draw uniformly in log space.
struct TuneRanges {
    TuneRange ridge_l2{1e-6, 10.0};                  // log
    TuneRange boosted_n_rounds{50, 300};             // int
    TuneRange boosted_max_depth{2, 5};               // int
    TuneRange boosted_learning_rate{0.02, 0.3};      // log
    TuneRange boosted_min_samples_leaf{2, 20};       // int
    TuneRange bagged_n_trees{50, 200};               // int
    TuneRange bagged_max_depth{3, 8};                // int
    TuneRange bagged_max_features{0.3, 1.0};
    TuneRange bagged_min_samples_leaf{1, 10};        // int
    TuneRange mlp_learning_rate{0.001, 0.1};         // log
    TuneRange mlp_epochs{50, 300};                   // int
    TuneRange kmeansq_n_clusters{2, 20};             // int
    TuneRange kmeansq_alpha{0.02, 0.5};              // log
    TuneRange kmeansq_epsilon{0.02, 0.3};
    TuneRange kmeansq_episodes{2000, 20000};         // int
};

struct TuningConfig {
    bool enabled = false;
    int n_trials = 8;  // doubled for kmeans-q
    TuneRanges ranges;
};

// --- Experiment configuration ------------------------------------------------

struct ExperimentConfig {
    std::string simulator = "filecall";
    std::uint64_t seed = 1357924680;
    int test_cases = 1000;
    std::vector<double> deltas = {0.9};
    std::vector<int> n_trains = {2000};
    std::vector<int> ks = {2};
    std::vector<std::string> method_names = {"scope-s", "sep-s", "bank"};
    int n_seeds = 5;
    ModelSpec base_model{ModelKind::BoostedTrees, {}};
    EncodeMode encode = EncodeMode::Flat;
    RaVariant ra_variant = RaVariant::AsPrinted;
    int max_seq_len = 0;
    KMeansQConfig kmeans_q;
    TuningConfig tuning;
    std::size_t upper_bound_cap = 4096;
    std::string out_dir = "out";
    int jobs = 0;  // 0 = one worker per cell, capped by hardware
    FilecallParams filecall;
    LoanprocParams loanproc;

    std::vector<Method> methods() const {
        std::vector<Method> out;
        for (const auto& name : method_names) out.push_back(method_from_string(name));
        return out;
    }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::string& where,
                                const std::set<std::string>& allowed) {
    if (!j.is_object()) fail_config(where, " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) fail_config(where, ": unknown key '", key, "'");
    }
}

template <typename T>
T get_as(const json& j, const std::string& where, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail_config(where, ".", key, " has the wrong type");
    }
}

inline TuneRange range_from(const json& j, const std::string& where,
                            const std::string& key, TuneRange fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        fail_config(where, ".", key, " must be a [lo, hi] number pair");
    return TuneRange{v[0].get<double>(), v[1].get<double>()};
}

inline ModelSpec parse_base_model(const json& j, const ModelSpec& defaults) {
    reject_unknown_keys(j, "base_model",
                        {"kind", "l2", "n_rounds", "max_depth", "learning_rate",
                         "min_samples_leaf", "n_trees", "max_features", "hidden",
                         "mlp_learning_rate", "epochs", "batch_size"});
    ModelSpec spec = defaults;
    if (j.contains("kind"))
        spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    ModelParams& p = spec.params;
    p.l2 = get_as(j, "base_model", "l2", p.l2);
    p.n_rounds = get_as(j, "base_model", "n_rounds", p.n_rounds);
    p.max_depth = get_as(j, "base_model", "max_depth", p.max_depth);
    p.learning_rate = get_as(j, "base_model", "learning_rate", p.learning_rate);
    p.min_samples_leaf = get_as(j, "base_model", "min_samples_leaf", p.min_samples_leaf);
    p.n_trees = get_as(j, "base_model", "n_trees", p.n_trees);
    p.max_features = get_as(j, "base_model", "max_features", p.max_features);
    p.hidden = get_as(j, "base_model", "hidden", p.hidden);
    p.mlp_learning_rate = get_as(j, "base_model", "mlp_learning_rate", p.mlp_learning_rate);
    p.epochs = get_as(j, "base_model", "epochs", p.epochs);
    p.batch_size = get_as(j, "base_model", "batch_size", p.batch_size);
    return spec;
}

inline void parse_kmeans_q(const json& j, KMeansQConfig* cfg) {
    reject_unknown_keys(j, "kmeans_q",
                        {"n_clusters", "alpha", "gamma", "epsilon", "episodes",
                         "max_steps"});
    cfg->n_clusters = get_as<std::size_t>(j, "kmeans_q", "n_clusters", cfg->n_clusters);
    cfg->qlearn.alpha = get_as(j, "kmeans_q", "alpha", cfg->qlearn.alpha);
    cfg->qlearn.gamma = get_as(j, "kmeans_q", "gamma", cfg->qlearn.gamma);
    cfg->qlearn.epsilon = get_as(j, "kmeans_q", "epsilon", cfg->qlearn.epsilon);
    cfg->qlearn.episodes = get_as(j, "kmeans_q", "episodes", cfg->qlearn.episodes);
    cfg->qlearn.max_steps = get_as(j, "kmeans_q", "max_steps", cfg->qlearn.max_steps);
}

inline void parse_tuning(const json& j, TuningConfig* cfg) {
    reject_unknown_keys(j, "tuning", {"enabled", "n_trials", "ranges"});
    cfg->enabled = get_as(j, "tuning", "enabled", cfg->enabled);
    cfg->n_trials = get_as(j, "tuning", "n_trials", cfg->n_trials);
    if (!j.contains("ranges")) return;
    const auto& r = j.at("ranges");
    reject_unknown_keys(
        r, "tuning.ranges",
        {"ridge_l2", "boosted_n_rounds", "boosted_max_depth", "boosted_learning_rate",
         "boosted_min_samples_leaf", "bagged_n_trees", "bagged_max_depth",
         "bagged_max_features", "bagged_min_samples_leaf", "mlp_learning_rate",
         "mlp_epochs", "kmeansq_n_clusters", "kmeansq_alpha", "kmeansq_epsilon",
         "kmeansq_episodes"});
    TuneRanges& t = cfg->ranges;
    t.ridge_l2 = range_from(r, "tuning.ranges", "ridge_l2", t.ridge_l2);
    t.boosted_n_rounds = range_from(r, "tuning.ranges", "boosted_n_rounds", t.boosted_n_rounds);
    t.boosted_max_depth = range_from(r, "tuning.ranges", "boosted_max_depth", t.boosted_max_depth);
    t.boosted_learning_rate =
        range_from(r, "tuning.ranges", "boosted_learning_rate", t.boosted_learning_rate);
    t.boosted_min_samples_leaf =
        range_from(r, "tuning.ranges", "boosted_min_samples_leaf", t.boosted_min_samples_leaf);
    t.bagged_n_trees = range_from(r, "tuning.ranges", "bagged_n_trees", t.bagged_n_trees);
    t.bagged_max_depth = range_from(r, "tuning.ranges", "bagged_max_depth", t.bagged_max_depth);
    t.bagged_max_features =
        range_from(r, "tuning.ranges", "bagged_max_features", t.bagged_max_features);
    t.bagged_min_samples_leaf =
        range_from(r, "tuning.ranges", "bagged_min_samples_leaf", t.bagged_min_samples_leaf);
    t.mlp_learning_rate = range_from(r, "tuning.ranges", "mlp_learning_rate", t.mlp_learning_rate);
    t.mlp_epochs = range_from(r, "tuning.ranges", "mlp_epochs", t.mlp_epochs);
    t.kmeansq_n_clusters =
        range_from(r, "tuning.ranges", "kmeansq_n_clusters", t.kmeansq_n_clusters);
    t.kmeansq_alpha = range_from(r, "tuning.ranges", "kmeansq_alpha", t.kmeansq_alpha);
    t.kmeansq_epsilon = range_from(r, "tuning.ranges", "kmeansq_epsilon", t.kmeansq_epsilon);
    t.kmeansq_episodes = range_from(r, "tuning.ranges", "kmeansq_episodes", t.kmeansq_episodes);
}

inline void parse_filecall(const json& j, FilecallParams* p) {
    reject_unknown_keys(j, "filecall",
                        {"cost_tpt", "cost_call", "tpt_min", "tpt_max", "dur_min",
                         "dur_max", "dur_trend", "beta", "mult_high", "mult_low",
                         "gamma", "bank_threshold", "amount_min", "amount_max",
                         "num_resources"});
    p->cost_tpt = get_as(j, "filecall", "cost_tpt", p->cost_tpt);
    p->cost_call = get_as(j, "filecall", "cost_call", p->cost_call);
    p->tpt_min = get_as(j, "filecall", "tpt_min", p->tpt_min);
    p->tpt_max = get_as(j, "filecall", "tpt_max", p->tpt_max);
    p->dur_min = get_as(j, "filecall", "dur_min", p->dur_min);
    p->dur_max = get_as(j, "filecall", "dur_max", p->dur_max);
    p->dur_trend = get_as(j, "filecall", "dur_trend", p->dur_trend);
    p->beta = get_as(j, "filecall", "beta", p->beta);
    p->mult_high = get_as(j, "filecall", "mult_high", p->mult_high);
    p->mult_low = get_as(j, "filecall", "mult_low", p->mult_low);
    p->gamma = get_as(j, "filecall", "gamma", p->gamma);
    p->bank_threshold = get_as(j, "filecall", "bank_threshold", p->bank_threshold);
    p->amount_min = get_as(j, "filecall", "amount_min", p->amount_min);
    p->amount_max = get_as(j, "filecall", "amount_max", p->amount_max);
    p->num_resources = get_as<std::size_t>(j, "filecall", "num_resources", p->num_resources);
}

inline void parse_loanproc(const json& j, LoanprocParams* p) {
    reject_unknown_keys(j, "loanproc",
                        {"amount_min", "amount_max", "rates", "cost_standard",
                         "cost_priority", "refuse_intercept", "refuse_per_rate_step",
                         "refuse_risk_weight", "refuse_priority_bonus",
                         "bank_priority_amount"});
    p->amount_min = get_as(j, "loanproc", "amount_min", p->amount_min);
    p->amount_max = get_as(j, "loanproc", "amount_max", p->amount_max);
    p->rates = get_as(j, "loanproc", "rates", p->rates);
    p->cost_standard = get_as(j, "loanproc", "cost_standard", p->cost_standard);
    p->cost_priority = get_as(j, "loanproc", "cost_priority", p->cost_priority);
    p->refuse_intercept = get_as(j, "loanproc", "refuse_intercept", p->refuse_intercept);
    p->refuse_per_rate_step =
        get_as(j, "loanproc", "refuse_per_rate_step", p->refuse_per_rate_step);
    p->refuse_risk_weight =
        get_as(j, "loanproc", "refuse_risk_weight", p->refuse_risk_weight);
    p->refuse_priority_bonus =
        get_as(j, "loanproc", "refuse_priority_bonus", p->refuse_priority_bonus);
    p->bank_priority_amount =
        get_as(j, "loanproc", "bank_priority_amount", p->bank_priority_amount);
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    using detail::get_as;
    detail::reject_unknown_keys(
        j, "config",
        {"simulator", "seed", "test_cases", "axes", "methods", "n_seeds",
         "base_model", "encoding", "ra_variant", "max_seq_len", "kmeans_q", "tuning",
         "upper_bound_cap", "out_dir", "jobs", "filecall", "loanproc"});
    ExperimentConfig cfg;
    cfg.simulator = get_as<std::string>(j, "config", "simulator", cfg.simulator);
    cfg.seed = get_as<std::uint64_t>(j, "config", "seed", cfg.seed);
    cfg.test_cases = get_as(j, "config", "test_cases", cfg.test_cases);
    if (j.contains("axes")) {
        const auto& a = j.at("axes");
        detail::reject_unknown_keys(a, "axes", {"delta", "n_train", "n_decision_points"});
        cfg.deltas = get_as(a, "axes", "delta", cfg.deltas);
        cfg.n_trains = get_as(a, "axes", "n_train", cfg.n_trains);
        cfg.ks = get_as(a, "axes", "n_decision_points", cfg.ks);
    }
    cfg.method_names = get_as(j, "config", "methods", cfg.method_names);
    cfg.n_seeds = get_as(j, "config", "n_seeds", cfg.n_seeds);
    if (j.contains("base_model"))
        cfg.base_model = detail::parse_base_model(j.at("base_model"), cfg.base_model);
    if (j.contains("encoding"))
        cfg.encode = encode_mode_from_string(j.at("encoding").get<std::string>());
    if (j.contains("ra_variant"))
        cfg.ra_variant = ra_variant_from_string(j.at("ra_variant").get<std::string>());
    cfg.max_seq_len = get_as(j, "config", "max_seq_len", cfg.max_seq_len);
    if (j.contains("kmeans_q")) detail::parse_kmeans_q(j.at("kmeans_q"), &cfg.kmeans_q);
    if (j.contains("tuning")) detail::parse_tuning(j.at("tuning"), &cfg.tuning);
    cfg.upper_bound_cap = get_as<std::size_t>(j, "config", "upper_bound_cap", cfg.upper_bound_cap);
    cfg.out_dir = get_as<std::string>(j, "config", "out_dir", cfg.out_dir);
    cfg.jobs = get_as(j, "config", "jobs", cfg.jobs);
    if (j.contains("filecall")) detail::parse_filecall(j.at("filecall"), &cfg.filecall);
    if (j.contains("loanproc")) detail::parse_loanproc(j.at("loanproc"), &cfg.loanproc);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_config("cannot open config file '", path, "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_config("'", path, "' is not valid JSON: ", e.what());
    }
    return parse_experiment_config(j);
}

struct ConfigDiagnostics {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
};

/// Semantic checks on a structurally valid configuration. Collects every
/// problem instead of stopping at the first.
inline ConfigDiagnostics validate_experiment_config(const ExperimentConfig& cfg) {
    ConfigDiagnostics d;
    auto err = [&](auto&&... parts) { d.errors.push_back(detail::str(parts...)); };
    auto warn = [&](auto&&... parts) { d.warnings.push_back(detail::str(parts...)); };

    if (cfg.simulator != "filecall" && cfg.simulator != "loanproc")
        err("simulator '", cfg.simulator, "' is not one of: filecall, loanproc");
    if (cfg.test_cases < 1) err("test_cases must be >= 1");
    if (cfg.n_seeds < 1) err("n_seeds must be >= 1");
    if (cfg.deltas.empty()) err("axes.delta must not be empty");
    for (double delta : cfg.deltas)
        if (delta < 0.0 || delta > 1.0)
            err("axes.delta value ", format_double(delta), " is outside [0, 1]");
    if (cfg.n_trains.empty()) err("axes.n_train must not be empty");
    for (int n : cfg.n_trains)
        if (n < 10) err("axes.n_train value ", n, " is too small (need >= 10)");
    if (cfg.ks.empty()) err("axes.n_decision_points must not be empty");
    for (int k : cfg.ks) {
        if (k < 1) err("axes.n_decision_points value ", k, " must be >= 1");
        if (cfg.simulator == "loanproc" && k != 2)
            err("loanproc has exactly 2 decision points; axes.n_decision_points=", k);
        if (cfg.simulator == "filecall" && k >= 7 && k < 63)
            warn("n_decision_points=", k, " makes the upper bound enumerate 2^", k,
                 " = ", (1ull << k), " action sequences per case");
    }
    if (cfg.method_names.empty()) err("methods must not be empty");
    std::set<std::string> seen;
    for (const auto& name : cfg.method_names) {
        bool known = false;
        for (Method m : all_methods())
            if (name == to_string(m)) known = true;
        if (!known) err("unknown method '", name, "'");
        if (!seen.insert(name).second) err("method '", name, "' listed twice");
    }
    if (cfg.tuning.enabled && cfg.tuning.n_trials < 1)
        err("tuning.n_trials must be >= 1 when tuning is enabled");
    if (cfg.max_seq_len < 0) err("max_seq_len must be >= 0");
    if (cfg.jobs < 0) err("jobs must be >= 0");
    if (cfg.upper_bound_cap < 1) err("upper_bound_cap must be >= 1");

    try {
        validate_model_spec(cfg.base_model);
    } catch (const ConfigError& e) {
        err("base_model: ", e.what());
    }
    if (cfg.simulator == "loanproc" && cfg.loanproc.rates.size() < 2)
        err("loanproc.rates needs at least two entries");
    if (cfg.simulator == "filecall") {
        if (cfg.filecall.gamma <= 0 || cfg.filecall.gamma > 1)
            err("filecall.gamma must be in (0, 1]");
        if (cfg.filecall.tpt_min > cfg.filecall.tpt_max)
            err("filecall.tpt_min exceeds tpt_max");
        if (cfg.filecall.dur_min > cfg.filecall.dur_max)
            err("filecall.dur_min exceeds dur_max");
        if (cfg.filecall.dur_trend <= 0)
            err("filecall.dur_trend must be positive");
    }
    return d;
}

}  // namespace scope
