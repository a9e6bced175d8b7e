#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scope/rng.hpp"
#include "scope/simulator.hpp"

namespace scope {

/// Loan-document collection process. Each case has K "contact the customer?"
/// decisions; the KPI is cost (minimized):
///
///   cost = cost_tpt * throughput + cost_call * n_calls
///
/// A call at decision k cuts throughput by mult(loan_type) * beta * avg
/// realized duration of the first k events, and speeds up all later events by
/// factor gamma. Early calls therefore shrink the evidence that makes later
/// calls look worthwhile, which couples the decisions.
// Default economics leave the incumbent beatable in a specific way: for car
// and loan-takeover cases a call pays at every decision, but after the first
// call the sped-up events drag the duration average back under the 4025
// trigger, so the incumbent stops calling and leaves the later margins on the
// table. For the other types a call pays only when the case has been slow,
// and the incumbent never calls them at all.
struct FilecallParams {
    std::size_t num_decisions = 2;
    double cost_tpt = 0.1;
    double cost_call = 150.0;
    double tpt_min = 39000.0;
    double tpt_max = 41000.0;
    double dur_min = 3200.0;
    double dur_max = 6800.0;
    double dur_trend = 1.3;  // event i runs dur_trend^i times the sampled length
    double beta = 1.2;
    double mult_high = 1.0;  // car, loan takeover
    double mult_low = 0.18;
    double gamma = 0.6;
    double bank_threshold = 4025.0;
    double amount_min = 5000.0;
    double amount_max = 50000.0;
    std::size_t num_resources = 5;
};

class FilecallSim final : public Simulator {
public:
    struct Case {
        std::string loan_type;
        double amount = 0.0;
        std::string resource;
        double tpt_base = 0.0;
        std::vector<double> durations;  // one per event, before any rescaling
    };

    explicit FilecallSim(FilecallParams params = {}) : p_(params) {
        if (p_.num_decisions < 1) fail_config("filecall: num_decisions must be >= 1");
        if (p_.gamma <= 0 || p_.gamma > 1) fail_config("filecall: gamma must be in (0, 1]");
        if (p_.dur_trend <= 0) fail_config("filecall: dur_trend must be positive");
        if (p_.cost_call < 0 || p_.cost_tpt < 0)
            fail_config("filecall: costs must be non-negative");
        for (std::size_t k = 1; k <= p_.num_decisions; ++k) {
            DecisionPointSpec spec;
            spec.index = static_cast<int>(k);
            spec.prefix_length = static_cast<int>(k);
            spec.actions = {"wait", "call_customer"};
            spec.action_attr = "activity";
            specs_.push_back(std::move(spec));
        }
    }

    std::string name() const override { return "filecall"; }
    KpiDirection direction() const override { return KpiDirection::Minimize; }
    const std::vector<DecisionPointSpec>& specs() const override { return specs_; }

    void sample_cases(std::size_t n, std::uint64_t seed) override {
        static const std::vector<std::pair<std::string, double>> kLoanTypes = {
            {"car", 0.30},
            {"debt_restructuring", 0.10},
            {"home_improvement", 0.30},
            {"loan_takeover", 0.15},
            {"other", 0.15},
        };
        cases_.clear();
        cases_.reserve(n);
        const std::size_t trace_len = p_.num_decisions + 2;
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(substream_seed(seed, "filecall_case", i));
            Case c;
            const double u = rng.uniform01();
            double acc = 0.0;
            c.loan_type = kLoanTypes.back().first;
            for (const auto& [label, prob] : kLoanTypes) {
                acc += prob;
                if (u < acc) {
                    c.loan_type = label;
                    break;
                }
            }
            // Car and loan-takeover cases carry the larger amounts; the two
            // bands do not touch.
            const double amount_mid = 0.5 * (p_.amount_min + p_.amount_max);
            const double band_gap = 0.1 * (p_.amount_max - p_.amount_min);
            c.amount = type_multiplier(c.loan_type) >= p_.mult_high
                           ? rng.uniform(amount_mid + band_gap, p_.amount_max)
                           : rng.uniform(p_.amount_min, amount_mid - band_gap);
            c.resource = "agent_" + std::to_string(1 + rng.uniform_int(p_.num_resources));
            // Base workload grows with the amount: bigger loans mean more files.
            c.tpt_base = rng.uniform(p_.tpt_min, p_.tpt_max) + 1.0 * c.amount;
            c.durations.resize(trace_len);
            double scale = 1.0;
            for (auto& d : c.durations) {
                d = scale * rng.uniform(p_.dur_min, p_.dur_max);
                scale *= p_.dur_trend;
            }
            cases_.push_back(std::move(c));
        }
    }

    std::size_t num_cases() const override { return cases_.size(); }

    std::string case_id(std::size_t i) const override {
        return "filecall_" + std::to_string(i + 1);
    }

    double outcome(std::size_t case_index, std::span<const int> actions) const override {
        check_actions(actions);
        Rollout r = roll(cases_.at(case_index), actions);
        return p_.cost_tpt * r.throughput + p_.cost_call * r.n_calls;
    }

    Trace trace(std::size_t case_index, std::span<const int> actions) const override {
        check_actions(actions);
        const Case& c = cases_.at(case_index);
        Rollout r = roll(c, actions);
        Trace t;
        AttrMap statics{{"loan_type", c.loan_type},
                        {"amount", c.amount},
                        {"resource", c.resource}};
        double clock = 0.0;
        for (std::size_t j = 0; j < r.durations.size(); ++j) {
            clock += r.durations[j];
            Event e;
            e.case_id = case_id(case_index);
            if (j == 0)
                e.activity = "receive_files";
            else if (j + 1 == r.durations.size())
                e.activity = "files_complete";
            else
                e.activity = actions[j - 1] == 1 ? "call_customer" : "wait";
            e.timestamp = clock;
            e.event_attrs["duration"] = r.durations[j];
            e.static_attrs = statics;
            t.events.push_back(std::move(e));
        }
        return t;
    }

    /// Call when the loan type responds strongly and the case has been slow.
    int bank_action(std::size_t case_index,
                    std::span<const int> prior_actions) const override {
        const Case& c = cases_.at(case_index);
        if (type_multiplier(c.loan_type) < p_.mult_high) return 0;
        const std::size_t k = prior_actions.size() + 1;
        std::vector<double> durs = realized_durations(c, prior_actions, k);
        double avg = 0.0;
        for (double d : durs) avg += d;
        avg /= static_cast<double>(durs.size());
        return avg > p_.bank_threshold ? 1 : 0;
    }

    const FilecallParams& params() const { return p_; }

private:
    struct Rollout {
        std::vector<double> durations;
        double throughput = 0.0;
        int n_calls = 0;
    };

    double type_multiplier(const std::string& loan_type) const {
        return loan_type == "car" || loan_type == "loan_takeover" ? p_.mult_high
                                                                  : p_.mult_low;
    }

    /// Durations of the first n_events events after rescaling by every call
    /// among prior_actions. A call at decision j speeds up events j+1 onward.
    std::vector<double> realized_durations(const Case& c,
                                           std::span<const int> prior_actions,
                                           std::size_t n_events) const {
        std::vector<double> durs(c.durations.begin(),
                                 c.durations.begin() + static_cast<std::ptrdiff_t>(n_events));
        for (std::size_t j = 0; j < prior_actions.size(); ++j) {
            if (prior_actions[j] != 1) continue;
            for (std::size_t i = j + 1; i < durs.size(); ++i) durs[i] *= p_.gamma;
        }
        return durs;
    }

    Rollout roll(const Case& c, std::span<const int> actions) const {
        Rollout r;
        r.durations = c.durations;
        double reduction = 0.0;
        for (std::size_t j = 0; j < actions.size(); ++j) {
            if (actions[j] != 1) continue;
            ++r.n_calls;
            // effect uses durations as realized at decision time
            double avg = 0.0;
            for (std::size_t i = 0; i <= j; ++i) avg += r.durations[i];
            avg /= static_cast<double>(j + 1);
            reduction += type_multiplier(c.loan_type) * p_.beta * avg;
            for (std::size_t i = j + 1; i < r.durations.size(); ++i)
                r.durations[i] *= p_.gamma;
        }
        r.throughput = std::max(0.0, c.tpt_base - reduction);
        return r;
    }

    FilecallParams p_;
    std::vector<DecisionPointSpec> specs_;
    std::vector<Case> cases_;
};

}  // namespace scope
