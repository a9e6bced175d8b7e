#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scope/common.hpp"
#include "scope/regressors.hpp"
#include "scope/rng.hpp"
#include "scope/simulator.hpp"

namespace scope {

enum class LearnerKind { S, T, RA };

inline const char* to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::S: return "s";
        case LearnerKind::T: return "t";
        case LearnerKind::RA: return "ra";
    }
    return "?";
}

inline LearnerKind learner_kind_from_string(const std::string& s) {
    if (s == "s") return LearnerKind::S;
    if (s == "t") return LearnerKind::T;
    if (s == "ra") return LearnerKind::RA;
    fail_config("unknown learner '", s, "' (expected s, t or ra)");
}

/// Two published forms of the regression-adjusted pseudo-outcome. AsPrinted
/// reproduces the source formulation verbatim (the pseudo-outcome for an
/// unobserved arm does not reference that arm's own prediction); Classic is
/// the textbook regression adjustment against the baseline arm.
enum class RaVariant { AsPrinted, Classic };

inline const char* to_string(RaVariant v) {
    return v == RaVariant::AsPrinted ? "as_printed" : "classic";
}

inline RaVariant ra_variant_from_string(const std::string& s) {
    if (s == "as_printed") return RaVariant::AsPrinted;
    if (s == "classic") return RaVariant::Classic;
    fail_config("unknown ra_variant '", s, "' (expected as_printed or classic)");
}

/// Fitted per-decision-point model bundle. `q_values` estimates the target
/// under each action and drives value propagation; `action_scores` ranks the
/// actions for recommendation. They coincide except for the RA learner, which
/// ranks by estimated effects relative to the baseline arm.
class StageLearner {
public:
    virtual ~StageLearner() = default;
    virtual std::vector<double> q_values(std::span<const double> x) const = 0;
    virtual std::vector<double> action_scores(std::span<const double> x) const {
        return q_values(x);
    }
    virtual std::size_t num_actions() const = 0;
    virtual LearnerKind kind() const = 0;

    int best_action(std::span<const double> x, KpiDirection dir) const {
        return pick(action_scores(x), dir);
    }
    int best_q_action(std::span<const double> x, KpiDirection dir) const {
        return pick(q_values(x), dir);
    }

    /// Ties break toward the lowest action index.
    static int pick(const std::vector<double>& scores, KpiDirection dir) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < scores.size(); ++a)
            if (improves(dir, scores[a], scores[best])) best = a;
        return static_cast<int>(best);
    }
};

namespace detail {

inline Matrix with_action_onehot(const Matrix& X, std::span<const int> actions,
                                 std::size_t n_actions) {
    Matrix out(X.rows, X.cols + n_actions);
    for (std::size_t i = 0; i < X.rows; ++i) {
        auto src = X.row(i);
        auto dst = out.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
        dst[X.cols + static_cast<std::size_t>(actions[i])] = 1.0;
    }
    return out;
}

inline std::vector<double> onehot_row(std::span<const double> x, std::size_t n_actions,
                                      std::size_t a) {
    std::vector<double> row(x.begin(), x.end());
    row.resize(x.size() + n_actions, 0.0);
    row[x.size() + a] = 1.0;
    return row;
}

}  // namespace detail

/// One model over features plus a one-hot action block.
class SLearner final : public StageLearner {
public:
    std::unique_ptr<Regressor> model;
    std::size_t n_actions = 0;

    SLearner() = default;

    SLearner(const Matrix& X, std::span<const int> actions,
             std::span<const double> targets, std::size_t n_actions_,
             const ModelSpec& spec, std::uint64_t seed)
        : n_actions(n_actions_) {
        model = fit_regressor(spec, detail::with_action_onehot(X, actions, n_actions),
                              targets, seed);
    }

    std::vector<double> q_values(std::span<const double> x) const override {
        std::vector<double> q(n_actions);
        for (std::size_t a = 0; a < n_actions; ++a)
            q[a] = model->predict_one(detail::onehot_row(x, n_actions, a));
        return q;
    }
    std::size_t num_actions() const override { return n_actions; }
    LearnerKind kind() const override { return LearnerKind::S; }
};

/// One model per action, fitted on that action's samples only. Requires every
/// action to be observed at least once.
class TLearner final : public StageLearner {
public:
    std::vector<std::unique_ptr<Regressor>> models;

    TLearner() = default;

    TLearner(const Matrix& X, std::span<const int> actions,
             std::span<const double> targets, const DecisionPointSpec& spec,
             const ModelSpec& model_spec, std::uint64_t seed) {
        const std::size_t n_actions = spec.actions.size();
        for (std::size_t a = 0; a < n_actions; ++a) {
            Matrix Xa(0, X.cols);
            std::vector<double> ya;
            for (std::size_t i = 0; i < X.rows; ++i) {
                if (static_cast<std::size_t>(actions[i]) != a) continue;
                Xa.push_row(X.row(i));
                ya.push_back(targets[i]);
            }
            if (Xa.rows == 0)
                fail("t-learner at decision point ", spec.index,
                     ": action '", spec.actions[a],
                     "' has no observations, so its arm model cannot be fitted");
            models.push_back(fit_regressor(model_spec, Xa, ya,
                                           substream_seed(seed, "t_arm", a)));
        }
    }

    std::vector<double> q_values(std::span<const double> x) const override {
        std::vector<double> q(models.size());
        for (std::size_t a = 0; a < models.size(); ++a)
            q[a] = models[a]->predict_one(x);
        return q;
    }
    std::size_t num_actions() const override { return models.size(); }
    LearnerKind kind() const override { return LearnerKind::T; }
};

/// Computes the regression-adjusted pseudo-outcome for arm `a` against
/// baseline arm 0 from the observed (action, target) pair and the stage-one
/// predictions q[.] at the same features.
inline double ra_pseudo_outcome(RaVariant variant, int a_obs, double y,
                                std::span<const double> q, std::size_t a) {
    const auto obs = static_cast<std::size_t>(a_obs);
    if (variant == RaVariant::AsPrinted) {
        if (obs == a) return y - q[a];
        return (q[obs] - y) + (q[obs] - q[0]);
    }
    if (obs == a) return y - q[0];
    if (obs == 0) return q[a] - y;
    return q[a] - q[0];
}

/// Two-stage regression-adjusted learner. Stage one is an S-style fit whose
/// predictions both feed the pseudo-outcomes and serve as the propagation
/// q-values; stage two fits one effect model per non-baseline arm.
class RaLearner final : public StageLearner {
public:
    std::unique_ptr<SLearner> stage1;
    std::vector<std::unique_ptr<Regressor>> effect_models;  // arms 1..n-1
    RaVariant variant = RaVariant::AsPrinted;

    RaLearner() = default;

    RaLearner(const Matrix& X, std::span<const int> actions,
              std::span<const double> targets, std::size_t n_actions,
              const ModelSpec& model_spec, RaVariant variant_, std::uint64_t seed)
        : variant(variant_) {
        stage1 = std::make_unique<SLearner>(X, actions, targets, n_actions, model_spec,
                                            substream_seed(seed, "ra_stage1"));
        Matrix Q(X.rows, n_actions);
        for (std::size_t i = 0; i < X.rows; ++i) {
            const auto q = stage1->q_values(X.row(i));
            std::copy(q.begin(), q.end(), Q.row(i).begin());
        }
        for (std::size_t a = 1; a < n_actions; ++a) {
            std::vector<double> phi(X.rows);
            for (std::size_t i = 0; i < X.rows; ++i)
                phi[i] = ra_pseudo_outcome(variant, actions[i], targets[i], Q.row(i), a);
            effect_models.push_back(fit_regressor(model_spec, X, phi,
                                                  substream_seed(seed, "ra_effect", a)));
        }
    }

    std::vector<double> q_values(std::span<const double> x) const override {
        return stage1->q_values(x);
    }

    /// Estimated effect of each arm against the baseline; the baseline is 0.
    std::vector<double> action_scores(std::span<const double> x) const override {
        std::vector<double> s(effect_models.size() + 1, 0.0);
        for (std::size_t a = 0; a < effect_models.size(); ++a)
            s[a + 1] = effect_models[a]->predict_one(x);
        return s;
    }
    std::size_t num_actions() const override { return effect_models.size() + 1; }
    LearnerKind kind() const override { return LearnerKind::RA; }
};

inline std::unique_ptr<StageLearner> fit_stage(
    LearnerKind learner, const Matrix& X, std::span<const int> actions,
    std::span<const double> targets, const DecisionPointSpec& spec,
    const ModelSpec& model_spec, RaVariant ra_variant, std::uint64_t seed) {
    if (X.rows != actions.size() || X.rows != targets.size())
        fail("fit_stage: rows, actions and targets disagree");
    switch (learner) {
        case LearnerKind::S:
            return std::make_unique<SLearner>(X, actions, targets, spec.actions.size(),
                                              model_spec, seed);
        case LearnerKind::T:
            return std::make_unique<TLearner>(X, actions, targets, spec, model_spec,
                                              seed);
        case LearnerKind::RA:
            return std::make_unique<RaLearner>(X, actions, targets, spec.actions.size(),
                                               model_spec, ra_variant, seed);
    }
    fail("unreachable learner kind");
}

}  // namespace scope
