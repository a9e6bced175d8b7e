#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scope/rng.hpp"
#include "scope/simulator.hpp"

namespace scope {

/// Two-decision loan origination process. Decision 1 picks the handling
/// procedure (priority costs more but lowers refusals), decision 2 the offered
/// interest rate (higher rates earn more but get refused more often, and risky
/// customers refuse more). The KPI is profit (maximized):
///
///   profit = (refused ? 0 : amount * rate) - procedure_cost
struct LoanprocParams {
    double amount_min = 5000.0;
    double amount_max = 50000.0;
    std::vector<double> rates = {0.05, 0.08, 0.11};
    double cost_standard = 300.0;
    double cost_priority = 800.0;
    double refuse_intercept = -1.2;
    double refuse_per_rate_step = 0.9;
    double refuse_risk_weight = 2.0;
    double refuse_priority_bonus = -0.8;
    double bank_priority_amount = 30000.0;
};

class LoanprocSim final : public Simulator {
public:
    struct Case {
        double amount = 0.0;
        double risk = 0.0;          // in [0, 1]
        double refusal_draw = 0.0;  // compared against the refusal probability
    };

    explicit LoanprocSim(LoanprocParams params = {}) : p_(params) {
        if (p_.rates.size() < 2) fail_config("loanproc: need at least two rates");
        DecisionPointSpec d1;
        d1.index = 1;
        d1.prefix_length = 1;
        d1.actions = {"standard", "priority"};
        d1.action_attr = "procedure";
        DecisionPointSpec d2;
        d2.index = 2;
        d2.prefix_length = 2;
        d2.actions = {"rate_low", "rate_mid", "rate_high"};
        if (p_.rates.size() != d2.actions.size()) {
            d2.actions.clear();
            for (std::size_t i = 0; i < p_.rates.size(); ++i)
                d2.actions.push_back("rate_" + std::to_string(i));
        }
        d2.action_attr = "offered_rate";
        specs_ = {std::move(d1), std::move(d2)};
    }

    std::string name() const override { return "loanproc"; }
    KpiDirection direction() const override { return KpiDirection::Maximize; }
    const std::vector<DecisionPointSpec>& specs() const override { return specs_; }

    void sample_cases(std::size_t n, std::uint64_t seed) override {
        cases_.clear();
        cases_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(substream_seed(seed, "loanproc_case", i));
            Case c;
            c.amount = rng.uniform(p_.amount_min, p_.amount_max);
            c.risk = rng.uniform01();
            c.refusal_draw = rng.uniform01();
            cases_.push_back(c);
        }
    }

    std::size_t num_cases() const override { return cases_.size(); }

    std::string case_id(std::size_t i) const override {
        return "loanproc_" + std::to_string(i + 1);
    }

    double outcome(std::size_t case_index, std::span<const int> actions) const override {
        check_actions(actions);
        const Case& c = cases_.at(case_index);
        const bool priority = actions[0] == 1;
        const int rate_idx = actions[1];
        const double cost = priority ? p_.cost_priority : p_.cost_standard;
        if (c.refusal_draw < refuse_prob(c, priority, rate_idx)) return -cost;
        return c.amount * p_.rates[static_cast<std::size_t>(rate_idx)] - cost;
    }

    Trace trace(std::size_t case_index, std::span<const int> actions) const override {
        check_actions(actions);
        const Case& c = cases_.at(case_index);
        AttrMap statics{{"amount", c.amount}, {"risk", c.risk}};
        const std::string id = case_id(case_index);
        Trace t;
        auto push = [&](std::string activity, double ts, std::string procedure,
                        std::string rate) {
            Event e;
            e.case_id = id;
            e.activity = std::move(activity);
            e.timestamp = ts;
            e.event_attrs["procedure"] = std::move(procedure);
            e.event_attrs["offered_rate"] = std::move(rate);
            e.static_attrs = statics;
            t.events.push_back(std::move(e));
        };
        const std::string proc = specs_[0].actions[static_cast<std::size_t>(actions[0])];
        const std::string rate = specs_[1].actions[static_cast<std::size_t>(actions[1])];
        const bool refused =
            c.refusal_draw < refuse_prob(c, actions[0] == 1, actions[1]);
        push("application_received", 1.0, "none", "none");
        push("select_procedure", 2.0, proc, "none");
        push("make_offer", 3.0, proc, rate);
        push(refused ? "offer_refused" : "offer_accepted", 4.0, proc, rate);
        return t;
    }

    /// Priority for large amounts; high rate under priority, mid otherwise.
    int bank_action(std::size_t case_index,
                    std::span<const int> prior_actions) const override {
        const Case& c = cases_.at(case_index);
        const bool priority = prior_actions.empty()
                                  ? c.amount > p_.bank_priority_amount
                                  : prior_actions[0] == 1;
        if (prior_actions.empty()) return priority ? 1 : 0;
        return priority ? static_cast<int>(p_.rates.size()) - 1 : 1;
    }

    const LoanprocParams& params() const { return p_; }

    double refuse_prob(const Case& c, bool priority, int rate_idx) const {
        const double z = p_.refuse_intercept +
                         p_.refuse_per_rate_step * static_cast<double>(rate_idx) +
                         p_.refuse_risk_weight * (c.risk - 0.5) +
                         (priority ? p_.refuse_priority_bonus : 0.0);
        return 1.0 / (1.0 + std::exp(-z));
    }

private:
    LoanprocParams p_;
    std::vector<DecisionPointSpec> specs_;
    std::vector<Case> cases_;
};

}  // namespace scope
