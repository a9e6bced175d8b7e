#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "scope/causal.hpp"
#include "scope/common.hpp"
#include "scope/encoding.hpp"
#include "scope/event_log.hpp"
#include "scope/regressors.hpp"
#include "scope/rng.hpp"
#include "scope/simulator.hpp"

namespace scope {

struct PolicyConfig {
    LearnerKind learner = LearnerKind::S;
    ModelSpec model;
    EncodeMode encode = EncodeMode::Flat;
    RaVariant ra_variant = RaVariant::AsPrinted;
    /// When false, every stage regresses on the raw case outcome instead of
    /// the propagated value (the per-decision-point ablation).
    bool propagate = true;
    int max_seq_len = 0;  // 0 derives it from the decision specs
};

/// One value-propagation step retained for auditing: the value before and
/// after decision k of one training case, with the actions involved.
struct PropagationRecord {
    std::size_t sample_index = 0;
    double v_next = 0.0;  // value propagated from later decisions
    double v_now = 0.0;   // v_next + q[best] - q[observed]
    int action_obs = 0;
    int action_best = 0;
};

struct TrainedPolicy {
    PolicyConfig config;
    KpiDirection direction = KpiDirection::Maximize;
    FeatureSchema schema;
    std::vector<DecisionPointSpec> specs;
    std::vector<std::unique_ptr<StageLearner>> stages;        // index k-1
    std::vector<std::vector<PropagationRecord>> records;      // index k-1

    std::vector<double> encode(const Prefix& prefix) const {
        return encode_prefix(prefix, schema, config.encode);
    }

    int recommend(const Prefix& prefix, int k) const {
        return stage(k).best_action(encode(prefix), direction);
    }

    std::vector<double> stage_q(const Prefix& prefix, int k) const {
        return stage(k).q_values(encode(prefix));
    }

    std::vector<double> stage_scores(const Prefix& prefix, int k) const {
        return stage(k).action_scores(encode(prefix));
    }

    const StageLearner& stage(int k) const {
        if (k < 1 || static_cast<std::size_t>(k) > stages.size())
            fail("no decision point ", k);
        return *stages[static_cast<std::size_t>(k - 1)];
    }
};

/// Fits one stage learner per decision point by backward induction. Stage K
/// regresses on the case outcome; earlier stages regress on the propagated
/// value v_k = v_{k+1} + (q[best] - q[observed]), which credits each case with
/// the estimated improvement available at the later decisions.
inline TrainedPolicy train_policy(const Dataset& ds, const PolicyConfig& cfg,
                                  KpiDirection direction, std::uint64_t seed) {
    validate_specs(ds.specs);
    if (ds.samples.empty()) fail("train: dataset has no samples");
    TrainedPolicy pol;
    pol.config = cfg;
    pol.direction = direction;
    pol.specs = ds.specs;
    pol.schema = fit_schema(ds, cfg.max_seq_len);
    const std::size_t K = ds.specs.size();
    pol.stages.resize(K);
    pol.records.resize(K);

    std::vector<double> value(static_cast<std::size_t>(ds.num_cases()), 0.0);
    for (const Sample& s : ds.samples)
        value[static_cast<std::size_t>(s.case_index)] = s.outcome;

    for (std::size_t k = K; k >= 1; --k) {
        const DecisionPointSpec& spec = ds.specs[k - 1];
        const auto idx = ds.sample_indices_at(static_cast<int>(k));
        if (idx.empty())
            fail("train: no samples reach decision point ", k,
                 " (prefix length ", spec.prefix_length, ")");
        Matrix X(idx.size(), pol.schema.width(cfg.encode));
        std::vector<int> actions(idx.size());
        std::vector<double> targets(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Sample& s = ds.samples[idx[i]];
            const auto x = encode_prefix(s.prefix(), pol.schema, cfg.encode);
            std::copy(x.begin(), x.end(), X.row(i).begin());
            actions[i] = s.action;
            targets[i] = value[static_cast<std::size_t>(s.case_index)];
        }
        auto stage = fit_stage(cfg.learner, X, actions, targets, spec, cfg.model,
                               cfg.ra_variant, substream_seed(seed, "stage", k));
        if (cfg.propagate) {
            auto& recs = pol.records[k - 1];
            recs.reserve(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const Sample& s = ds.samples[idx[i]];
                const auto q = stage->q_values(X.row(i));
                const int best = StageLearner::pick(q, direction);
                PropagationRecord r;
                r.sample_index = idx[i];
                r.v_next = targets[i];
                r.v_now = targets[i] + q[static_cast<std::size_t>(best)] -
                          q[static_cast<std::size_t>(s.action)];
                if (!std::isfinite(r.v_now))
                    fail("train: non-finite propagated value at decision point ", k);
                r.action_obs = s.action;
                r.action_best = best;
                value[static_cast<std::size_t>(s.case_index)] = r.v_now;
                recs.push_back(r);
            }
        }
        pol.stages[k - 1] = std::move(stage);
    }
    return pol;
}

/// Replays the stored propagation steps against fresh encodings and model
/// predictions and returns the largest absolute violation of
/// v_now = v_next + (q[best] - q[observed]). Deterministic models make this
/// exactly zero; any drift indicates nondeterminism in encode or predict.
inline double check_value_identity(const TrainedPolicy& pol, const Dataset& ds) {
    double worst = 0.0;
    for (std::size_t k = 1; k <= pol.stages.size(); ++k) {
        for (const PropagationRecord& r : pol.records[k - 1]) {
            const Sample& s = ds.samples[r.sample_index];
            const auto q = pol.stage_q(s.prefix(), static_cast<int>(k));
            const int best = StageLearner::pick(q, pol.direction);
            if (best != r.action_best)
                fail("value identity: best action drifted at decision ", k);
            const double expect = r.v_next + q[static_cast<std::size_t>(best)] -
                                  q[static_cast<std::size_t>(r.action_obs)];
            worst = std::max(worst, std::abs(expect - r.v_now));
        }
    }
    return worst;
}

}  // namespace scope
