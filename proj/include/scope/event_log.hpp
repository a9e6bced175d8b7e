#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scope/common.hpp"

namespace scope {

using AttrValue = std::variant<double, std::string>;
using AttrMap = std::map<std::string, AttrValue>;

inline bool attr_is_num(const AttrValue& v) { return std::holds_alternative<double>(v); }
inline double attr_num(const AttrValue& v) { return std::get<double>(v); }
inline const std::string& attr_cat(const AttrValue& v) { return std::get<std::string>(v); }

/// One observed event instance: (case id, activity label, timestamp,
/// event attributes, static case attributes).
struct Event {
    std::string case_id;
    std::string activity;
    double timestamp = 0.0;
    AttrMap event_attrs;
    AttrMap static_attrs;
};

/// All events of one case, in ascending timestamp order.
struct Trace {
    std::vector<Event> events;

    std::size_t size() const { return events.size(); }
    const std::string& case_id() const { return events.front().case_id; }
};

/// The first `length` events of a trace; the information state at a decision.
struct Prefix {
    const Trace* trace = nullptr;
    std::size_t length = 0;

    std::span<const Event> events() const {
        return std::span<const Event>(trace->events.data(), length);
    }
    const Event& last() const { return trace->events[length - 1]; }
    const Event& first() const { return trace->events[0]; }
};

struct EventLog {
    std::vector<Trace> traces;

    std::size_t num_cases() const { return traces.size(); }
    std::size_t num_events() const {
        std::size_t n = 0;
        for (const auto& t : traces) n += t.size();
        return n;
    }
};

/// A point in the process where an intervention is chosen. The action is
/// carried by `action_attr` ("activity" or an event attribute) of the event
/// that immediately follows the prefix.
struct DecisionPointSpec {
    int index = 0;          // k, 1-based
    int prefix_length = 0;  // l_k
    std::vector<std::string> actions;
    std::string action_attr = "activity";

    int action_index(const std::string& label) const {
        for (std::size_t i = 0; i < actions.size(); ++i)
            if (actions[i] == label) return static_cast<int>(i);
        return -1;
    }
};

inline void validate_specs(const std::vector<DecisionPointSpec>& specs) {
    if (specs.empty()) fail("decision point specs are empty");
    int prev_len = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.index != static_cast<int>(i) + 1)
            fail("decision point specs must be ordered k=1..K; got index ", s.index,
                 " at position ", i);
        if (s.prefix_length <= prev_len)
            fail("prefix lengths must be strictly increasing; l_", s.index, " = ",
                 s.prefix_length);
        if (s.actions.size() < 2)
            fail("decision point ", s.index, " needs at least 2 actions");
        prev_len = s.prefix_length;
    }
}

/// One training sample: a prefix, the action observed right after it, and the
/// case outcome.
struct Sample {
    const Trace* trace = nullptr;
    int case_index = 0;
    int decision_index = 0;  // k, 1-based
    int prefix_len = 0;
    int action = 0;  // index into specs[k-1].actions
    double outcome = 0.0;

    Prefix prefix() const { return Prefix{trace, static_cast<std::size_t>(prefix_len)}; }
};

/// Per-decision-point samples extracted from a log. Immutable once built; the
/// samples reference traces owned by `log`.
struct Dataset {
    std::shared_ptr<const EventLog> log;
    std::vector<DecisionPointSpec> specs;
    std::vector<Sample> samples;

    std::vector<std::size_t> sample_indices_at(int k) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].decision_index == k) out.push_back(i);
        return out;
    }

    int num_cases() const { return static_cast<int>(log->traces.size()); }
};

// --- CSV ingestion ---------------------------------------------------------

struct ColumnRole {
    enum class Kind { EventNum, EventCat, StaticNum, StaticCat };
    Kind kind;
    std::string name;
};

/// Parses a schema hint of the form `event:<name>:<num|cat>` or
/// `static:<name>:<num|cat>`.
inline ColumnRole parse_hint(const std::string& hint) {
    const auto p1 = hint.find(':');
    const auto p2 = hint.rfind(':');
    if (p1 == std::string::npos || p2 == p1)
        fail_config("bad schema hint '", hint, "' (expected scope:name:type)");
    const std::string scope_part = hint.substr(0, p1);
    const std::string name = hint.substr(p1 + 1, p2 - p1 - 1);
    const std::string type = hint.substr(p2 + 1);
    if (name.empty()) fail_config("bad schema hint '", hint, "': empty name");
    bool is_event;
    if (scope_part == "event") is_event = true;
    else if (scope_part == "static") is_event = false;
    else fail_config("bad schema hint '", hint, "': scope must be event or static");
    bool is_num;
    if (type == "num") is_num = true;
    else if (type == "cat") is_num = false;
    else fail_config("bad schema hint '", hint, "': type must be num or cat");
    using K = ColumnRole::Kind;
    return ColumnRole{is_event ? (is_num ? K::EventNum : K::EventCat)
                               : (is_num ? K::StaticNum : K::StaticCat),
                      name};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

}  // namespace detail

/// Loads a CSV event log. Required columns: `case_id`, `activity`,
/// `timestamp`. Every other column must be declared through a schema hint.
/// Events of a case must appear in non-decreasing timestamp order. Empty
/// cells are treated as missing attribute values.
inline EventLog load_csv(const std::string& path,
                         const std::vector<std::string>& schema_hints) {
    std::ifstream in(path);
    if (!in) fail("cannot open event log file '", path, "'");

    std::string header_line;
    if (!std::getline(in, header_line)) fail("event log '", path, "' is empty");
    const auto header = detail::split_csv_line(header_line);

    std::map<std::string, ColumnRole> roles;
    for (const auto& h : schema_hints) {
        ColumnRole r = parse_hint(h);
        if (!roles.emplace(r.name, r).second)
            fail_config("duplicate schema hint for column '", r.name, "'");
    }

    int col_case = -1, col_activity = -1, col_time = -1;
    std::vector<const ColumnRole*> col_roles(header.size(), nullptr);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& name = header[i];
        if (name == "case_id") col_case = static_cast<int>(i);
        else if (name == "activity") col_activity = static_cast<int>(i);
        else if (name == "timestamp") col_time = static_cast<int>(i);
        else {
            auto it = roles.find(name);
            if (it == roles.end())
                fail_config("column '", name, "' in '", path,
                            "' has no schema hint");
            col_roles[i] = &it->second;
        }
    }
    if (col_case < 0 || col_activity < 0 || col_time < 0)
        fail_config("event log '", path,
                    "' is missing a mandatory column (case_id, activity, timestamp)");
    for (const auto& [name, role] : roles) {
        if (std::find(header.begin(), header.end(), name) == header.end())
            fail_config("schema hint names column '", name, "' absent from '", path, "'");
    }

    std::map<std::string, std::size_t> trace_of_case;
    EventLog log;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            fail("line ", line_no, " of '", path, "': expected ", header.size(),
                 " fields, got ", fields.size());

        Event e;
        e.case_id = fields[col_case];
        e.activity = fields[col_activity];
        const auto ts = detail::parse_double(fields[col_time]);
        if (!ts)
            fail("line ", line_no, " of '", path, "': bad timestamp '",
                 fields[col_time], "'");
        e.timestamp = *ts;
        if (e.case_id.empty()) fail("line ", line_no, " of '", path, "': empty case_id");

        for (std::size_t i = 0; i < fields.size(); ++i) {
            const ColumnRole* role = col_roles[i];
            if (!role) continue;
            if (fields[i].empty()) continue;  // missing value
            AttrValue value;
            using K = ColumnRole::Kind;
            if (role->kind == K::EventNum || role->kind == K::StaticNum) {
                const auto v = detail::parse_double(fields[i]);
                if (!v)
                    fail("line ", line_no, " of '", path, "': bad numeric value '",
                         fields[i], "' in column '", role->name, "'");
                value = *v;
            } else {
                value = fields[i];
            }
            if (role->kind == K::EventNum || role->kind == K::EventCat)
                e.event_attrs.emplace(role->name, std::move(value));
            else
                e.static_attrs.emplace(role->name, std::move(value));
        }

        auto [it, inserted] = trace_of_case.emplace(e.case_id, log.traces.size());
        if (inserted) log.traces.emplace_back();
        Trace& trace = log.traces[it->second];
        if (!trace.events.empty()) {
            if (e.timestamp < trace.events.back().timestamp)
                fail("case '", e.case_id, "': non-monotonic timestamps (line ",
                     line_no, ")");
            if (e.static_attrs != trace.events.front().static_attrs)
                fail("case '", e.case_id, "': static attributes differ across events");
        }
        trace.events.push_back(std::move(e));
    }
    return log;
}

// --- Dataset construction ---------------------------------------------------

using OutcomeFn = std::function<double(const Trace&)>;

/// Reads the observed action of decision point k from the event right after
/// the prefix. Returns the action index, or fails naming the case.
inline int observed_action(const Trace& trace, const DecisionPointSpec& spec) {
    const Event& e = trace.events[static_cast<std::size_t>(spec.prefix_length)];
    std::string label;
    if (spec.action_attr == "activity") {
        label = e.activity;
    } else {
        auto it = e.event_attrs.find(spec.action_attr);
        if (it == e.event_attrs.end() || !std::holds_alternative<std::string>(it->second))
            fail("case '", trace.case_id(), "', decision point ", spec.index,
                 ": event has no categorical attribute '", spec.action_attr, "'");
        label = attr_cat(it->second);
    }
    const int a = spec.action_index(label);
    if (a < 0)
        fail("case '", trace.case_id(), "', decision point ", spec.index,
             ": observed action '", label, "' is not in the action space");
    return a;
}

/// Encodes a log into per-decision-point samples. A case contributes a sample
/// at decision point k iff its trace has at least l_k + 1 events (the action
/// takes effect in the event after the prefix). The outcome is computed once
/// per case.
inline Dataset build_dataset(std::shared_ptr<const EventLog> log,
                             std::vector<DecisionPointSpec> specs,
                             const OutcomeFn& outcome_fn) {
    validate_specs(specs);
    Dataset ds;
    ds.log = log;
    ds.specs = std::move(specs);
    for (std::size_t ci = 0; ci < log->traces.size(); ++ci) {
        const Trace& trace = log->traces[ci];
        std::optional<double> y;
        for (const auto& spec : ds.specs) {
            if (trace.size() < static_cast<std::size_t>(spec.prefix_length) + 1) break;
            if (!y) y = outcome_fn(trace);
            Sample s;
            s.trace = &trace;
            s.case_index = static_cast<int>(ci);
            s.decision_index = spec.index;
            s.prefix_len = spec.prefix_length;
            s.action = observed_action(trace, spec);
            s.outcome = *y;
            ds.samples.push_back(s);
        }
    }
    return ds;
}

/// Convenience outcome function backed by a case_id -> outcome table.
inline OutcomeFn outcome_from_map(std::map<std::string, double> outcomes) {
    return [table = std::move(outcomes)](const Trace& t) {
        auto it = table.find(t.case_id());
        if (it == table.end()) fail("no outcome recorded for case '", t.case_id(), "'");
        return it->second;
    };
}

// --- CSV emission ------------------------------------------------------------

/// Infers the schema hints a reload of this log would need, from the
/// in-memory attribute types. Fails on a name typed inconsistently.
inline std::vector<std::string> derive_schema_hints(const EventLog& log) {
    std::map<std::string, std::string> hints;  // name -> hint
    auto note = [&](const std::string& scope_part, const std::string& name,
                    const AttrValue& v) {
        const std::string hint =
            scope_part + ":" + name + ":" + (attr_is_num(v) ? "num" : "cat");
        auto [it, inserted] = hints.emplace(name, hint);
        if (!inserted && it->second != hint)
            fail("attribute '", name, "' has conflicting types across events");
    };
    for (const auto& trace : log.traces) {
        for (const auto& e : trace.events) {
            for (const auto& [name, v] : e.event_attrs) note("event", name, v);
            for (const auto& [name, v] : e.static_attrs) note("static", name, v);
        }
    }
    std::vector<std::string> out;
    for (const auto& [name, hint] : hints) out.push_back(hint);
    return out;
}

/// Writes the log as one CSV row per event. Doubles use shortest round-trip
/// formatting, so load_csv(save_log_csv(log)) reproduces the log exactly.
inline void save_log_csv(const EventLog& log, const std::string& path) {
    const auto hints = derive_schema_hints(log);
    std::vector<ColumnRole> roles;
    for (const auto& h : hints) roles.push_back(parse_hint(h));

    std::ofstream out(path);
    if (!out) fail("cannot write '", path, "'");
    out << "case_id,activity,timestamp";
    for (const auto& r : roles) out << "," << r.name;
    out << "\n";
    for (const auto& trace : log.traces) {
        for (const auto& e : trace.events) {
            out << e.case_id << "," << e.activity << "," << format_double(e.timestamp);
            for (const auto& r : roles) {
                using K = ColumnRole::Kind;
                const bool is_event = r.kind == K::EventNum || r.kind == K::EventCat;
                const AttrMap& attrs = is_event ? e.event_attrs : e.static_attrs;
                out << ",";
                const auto it = attrs.find(r.name);
                if (it == attrs.end()) continue;  // missing -> empty cell
                if (attr_is_num(it->second)) out << format_double(attr_num(it->second));
                else out << attr_cat(it->second);
            }
            out << "\n";
        }
    }
}

/// Case outcomes as a two-column CSV (case_id, outcome).
inline void save_outcomes_csv(const std::map<std::string, double>& outcomes,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write '", path, "'");
    out << "case_id,outcome\n";
    for (const auto& [id, y] : outcomes) out << id << "," << format_double(y) << "\n";
}

inline std::map<std::string, double> load_outcomes_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open outcomes file '", path, "'");
    std::string line;
    if (!std::getline(in, line)) fail("outcomes file '", path, "' is empty");
    if (detail::split_csv_line(line) != std::vector<std::string>{"case_id", "outcome"})
        fail_config("outcomes file '", path, "' must have header case_id,outcome");
    std::map<std::string, double> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 2)
            fail("line ", line_no, " of '", path, "': expected 2 fields");
        const auto v = detail::parse_double(fields[1]);
        if (!v) fail("line ", line_no, " of '", path, "': bad outcome value");
        if (!out.emplace(fields[0], *v).second)
            fail("line ", line_no, " of '", path, "': duplicate case '", fields[0], "'");
    }
    return out;
}

}  // namespace scope
