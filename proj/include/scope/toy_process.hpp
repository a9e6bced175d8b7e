#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "scope/event_log.hpp"
#include "scope/rng.hpp"
#include "scope/simulator.hpp"

namespace scope {

/// Small two-decision discrete process used to cross-check the learners
/// against exact enumeration. The initial state is drawn from init_probs, the
/// intermediate state is a deterministic function of (s1, a1), and the outcome
/// mean is a table over (s1, a1, a2). Logging follows explicit per-state
/// action propensities, so confounded observational logs can be constructed
/// directly. States are exposed through the activity labels, actions through
/// the "action" event attribute.
struct ToyProcess {
    std::vector<double> init_probs;                        // over s1
    std::vector<std::vector<std::size_t>> next_state;      // [s1][a1] -> s2
    std::vector<std::vector<std::vector<double>>> mean_y;  // [s1][a1][a2]
    std::vector<std::vector<double>> p_a1;                 // [s1] -> dist over a1
    std::vector<std::vector<double>> p_a2;                 // [s2] -> dist over a2
    double noise_sd = 0.0;

    std::size_t n_s1() const { return init_probs.size(); }
    std::size_t n_a1() const { return next_state.front().size(); }
    std::size_t n_s2() const {
        std::size_t m = 0;
        for (const auto& row : next_state)
            for (std::size_t s : row) m = std::max(m, s + 1);
        return m;
    }
    std::size_t n_a2() const { return mean_y.front().front().size(); }

    std::vector<DecisionPointSpec> specs() const {
        auto labels = [](std::size_t n) {
            std::vector<std::string> out;
            for (std::size_t i = 0; i < n; ++i) out.push_back("a" + std::to_string(i));
            return out;
        };
        DecisionPointSpec d1{1, 1, labels(n_a1()), "action"};
        DecisionPointSpec d2{2, 2, labels(n_a2()), "action"};
        return {d1, d2};
    }

    Trace make_trace(const std::string& case_id, std::size_t s1, std::size_t a1,
                     std::size_t a2) const {
        const std::size_t s2 = next_state[s1][a1];
        Trace t;
        auto push = [&](std::string activity, double ts, std::string action) {
            Event e;
            e.case_id = case_id;
            e.activity = std::move(activity);
            e.timestamp = ts;
            e.event_attrs["action"] = std::move(action);
            t.events.push_back(std::move(e));
        };
        push("start_" + std::to_string(s1), 1.0, "none");
        push("mid_" + std::to_string(s2), 2.0, "a" + std::to_string(a1));
        push("end", 3.0, "a" + std::to_string(a2));
        return t;
    }

    struct SampledLog {
        std::shared_ptr<EventLog> log;
        std::map<std::string, double> outcomes;
        std::vector<std::size_t> s1, a1, a2;  // per case
    };

    SampledLog sample_log(std::size_t n, std::uint64_t seed) const {
        SampledLog out;
        auto log = std::make_shared<EventLog>();
        auto draw = [](Rng& rng, const std::vector<double>& probs) {
            const double u = rng.uniform01();
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
                acc += probs[i];
                if (u < acc) return i;
            }
            return probs.size() - 1;
        };
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(substream_seed(seed, "toy_case", i));
            const std::size_t s1 = draw(rng, init_probs);
            const std::size_t a1 = draw(rng, p_a1[s1]);
            const std::size_t s2 = next_state[s1][a1];
            const std::size_t a2 = draw(rng, p_a2[s2]);
            double y = mean_y[s1][a1][a2];
            if (noise_sd > 0) y += noise_sd * rng.normal();
            const std::string id = "toy_" + std::to_string(i + 1);
            log->traces.push_back(make_trace(id, s1, a1, a2));
            out.outcomes[id] = y;
            out.s1.push_back(s1);
            out.a1.push_back(a1);
            out.a2.push_back(a2);
        }
        out.log = std::move(log);
        return out;
    }
};

}  // namespace scope
