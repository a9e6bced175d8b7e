#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scope/common.hpp"
#include "scope/event_log.hpp"
#include "scope/rng.hpp"

namespace scope {

enum class KpiDirection { Maximize, Minimize };

inline const char* to_string(KpiDirection d) {
    return d == KpiDirection::Maximize ? "maximize" : "minimize";
}

inline bool improves(KpiDirection d, double candidate, double incumbent) {
    return d == KpiDirection::Maximize ? candidate > incumbent : candidate < incumbent;
}

/// A process simulator with pre-sampled exogenous randomness per case.
/// `outcome` and `trace` are pure functions of (case, action vector), so the
/// same case can be replayed under any policy for counterfactual comparison.
/// Events strictly before decision k never depend on actions at decisions >= k.
class Simulator {
public:
    virtual ~Simulator() = default;

    virtual std::string name() const = 0;
    virtual KpiDirection direction() const = 0;
    virtual const std::vector<DecisionPointSpec>& specs() const = 0;

    /// Draws n cases' exogenous randomness, replacing any previous draw.
    virtual void sample_cases(std::size_t n, std::uint64_t seed) = 0;
    virtual std::size_t num_cases() const = 0;
    virtual std::string case_id(std::size_t case_index) const = 0;

    /// KPI under a complete action assignment (one index per decision point).
    virtual double outcome(std::size_t case_index, std::span<const int> actions) const = 0;

    /// Full trace under a complete action assignment.
    virtual Trace trace(std::size_t case_index, std::span<const int> actions) const = 0;

    /// The incumbent policy's action at decision prior_actions.size()+1.
    virtual int bank_action(std::size_t case_index,
                            std::span<const int> prior_actions) const = 0;

    std::size_t num_decisions() const { return specs().size(); }

    std::size_t num_actions(std::size_t k) const {  // k is 1-based
        return specs()[k - 1].actions.size();
    }

    void check_actions(std::span<const int> actions) const {
        const auto& sp = specs();
        if (actions.size() != sp.size())
            fail(name(), ": expected ", sp.size(), " actions, got ", actions.size());
        for (std::size_t i = 0; i < actions.size(); ++i)
            if (actions[i] < 0 || static_cast<std::size_t>(actions[i]) >= sp[i].actions.size())
                fail(name(), ": action index ", actions[i], " out of range at decision ",
                     i + 1);
    }
};

/// Realized events visible when taking decision prior_actions.size()+1:
/// the prefix of length l_k. Remaining decisions are padded with action 0,
/// which cannot influence events before l_k + 1.
inline Trace prefix_trace(const Simulator& sim, std::size_t case_index,
                          std::span<const int> prior_actions) {
    const auto& sp = sim.specs();
    const std::size_t k = prior_actions.size() + 1;
    if (k > sp.size()) fail(sim.name(), ": no decision ", k);
    std::vector<int> padded(prior_actions.begin(), prior_actions.end());
    padded.resize(sp.size(), 0);
    Trace full = sim.trace(case_index, padded);
    const std::size_t len = sp[k - 1].prefix_length;
    if (full.size() < len)
        fail(sim.name(), ": trace shorter than prefix length ", len);
    full.events.resize(len);
    return full;
}

struct GeneratedLog {
    std::shared_ptr<EventLog> log;
    std::map<std::string, double> outcomes;       // case_id -> KPI
    std::vector<std::vector<int>> logged_actions; // per case, per decision
};

/// Replays every sampled case under the confounded logging policy: at each
/// decision the bank's action is taken with probability delta, otherwise a
/// uniform draw. Coins and fallback draws are pre-sampled per (case, decision)
/// so delta=1 reproduces the bank exactly and delta=0 is a uniform experiment.
inline GeneratedLog generate_log(const Simulator& sim, double delta,
                                 std::uint64_t seed) {
    if (delta < 0.0 || delta > 1.0) fail_config("delta must lie in [0, 1]");
    const std::size_t n_dec = sim.num_decisions();
    GeneratedLog out;
    auto log = std::make_shared<EventLog>();
    for (std::size_t i = 0; i < sim.num_cases(); ++i) {
        Rng rng(substream_seed(seed, "logged_policy", i));
        std::vector<int> actions;
        actions.reserve(n_dec);
        for (std::size_t k = 1; k <= n_dec; ++k) {
            const double coin = rng.uniform01();
            const int fallback = static_cast<int>(rng.uniform_int(sim.num_actions(k)));
            const int a = coin < delta ? sim.bank_action(i, actions) : fallback;
            actions.push_back(a);
        }
        log->traces.push_back(sim.trace(i, actions));
        out.outcomes[sim.case_id(i)] = sim.outcome(i, actions);
        out.logged_actions.push_back(std::move(actions));
    }
    out.log = std::move(log);
    return out;
}

/// Total KPI when every case runs under the bank policy alone.
inline double bank_total(const Simulator& sim) {
    double total = 0.0;
    for (std::size_t i = 0; i < sim.num_cases(); ++i) {
        std::vector<int> actions;
        for (std::size_t k = 1; k <= sim.num_decisions(); ++k)
            actions.push_back(sim.bank_action(i, actions));
        total += sim.outcome(i, actions);
    }
    return total;
}

/// Per-case exhaustive search over all action combinations.
inline double best_case_outcome(const Simulator& sim, std::size_t case_index,
                                std::vector<int>* best_actions = nullptr) {
    const std::size_t n_dec = sim.num_decisions();
    std::vector<int> actions(n_dec, 0);
    bool first = true;
    double best = 0.0;
    while (true) {
        const double y = sim.outcome(case_index, actions);
        if (first || improves(sim.direction(), y, best)) {
            best = y;
            if (best_actions) *best_actions = actions;
            first = false;
        }
        std::size_t pos = 0;
        while (pos < n_dec) {
            if (static_cast<std::size_t>(++actions[pos]) < sim.num_actions(pos + 1)) break;
            actions[pos] = 0;
            ++pos;
        }
        if (pos == n_dec) break;
    }
    return best;
}

/// Clairvoyant bound: the per-case optimum summed over all cases. Guards the
/// combinatorial blow-up with a configurable cap on combinations per case.
inline double upper_bound_total(const Simulator& sim,
                                std::size_t max_combinations = 4096) {
    std::size_t combos = 1;
    for (std::size_t k = 1; k <= sim.num_decisions(); ++k) {
        combos *= sim.num_actions(k);
        if (combos > max_combinations)
            fail(sim.name(), ": ", combos, "+ action combinations exceed the cap of ",
                 max_combinations);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < sim.num_cases(); ++i)
        total += best_case_outcome(sim, i);
    return total;
}

}  // namespace scope
