#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "scope/common.hpp"
#include "scope/event_log.hpp"

namespace scope {

enum class EncodeMode { Flat, Sequence };

inline const char* to_string(EncodeMode m) {
    return m == EncodeMode::Flat ? "flat" : "sequence";
}

inline EncodeMode encode_mode_from_string(const std::string& s) {
    if (s == "flat") return EncodeMode::Flat;
    if (s == "sequence") return EncodeMode::Sequence;
    fail_config("unknown encoding mode '", s, "'");
}

struct NumericStat {
    double mean = 0.0;
    double std = 1.0;
    bool dropped = false;  // constant on training data

    double standardize(double v) const { return (v - mean) / std; }
};

/// Fitted encoding of prefixes into fixed-width vectors. Vocabularies and
/// standardization statistics come from training samples only; categories
/// unseen at fit time encode to an all-zeros block.
///
/// Flat mode: time-derived features are taken from the last event, numeric
/// event attributes are averaged over the prefix, categorical ones are
/// count-encoded, and static attributes are appended once.
/// Sequence mode: one encoded row per event, zero-padded at the front to
/// `max_seq_len` rows, with the static block filled only on the final row.
struct FeatureSchema {
    struct CatFeature {
        std::string name;
        std::vector<std::string> vocab;  // sorted

        int index_of(const std::string& v) const {
            auto it = std::lower_bound(vocab.begin(), vocab.end(), v);
            if (it == vocab.end() || *it != v) return -1;
            return static_cast<int>(it - vocab.begin());
        }
    };
    struct NumFeature {
        std::string name;
        NumericStat stat;
    };

    bool fitted = false;
    int max_seq_len = 0;

    NumericStat elapsed_total;  // t_last - t_first
    NumericStat elapsed_prev;   // t_last - t_prev
    CatFeature activity;        // activity vocabulary
    std::vector<NumFeature> event_nums;   // ordered by name
    std::vector<CatFeature> event_cats;   // ordered by name
    std::vector<NumFeature> static_nums;  // ordered by name
    std::vector<CatFeature> static_cats;  // ordered by name

    std::size_t time_width() const {
        return (elapsed_total.dropped ? 0u : 1u) + (elapsed_prev.dropped ? 0u : 1u);
    }
    std::size_t event_num_width() const {
        std::size_t w = 0;
        for (const auto& f : event_nums)
            if (!f.stat.dropped) ++w;
        return w;
    }
    std::size_t event_cat_width() const {
        std::size_t w = 0;
        for (const auto& f : event_cats) w += f.vocab.size();
        return w;
    }
    std::size_t static_width() const {
        std::size_t w = 0;
        for (const auto& f : static_nums)
            if (!f.stat.dropped) ++w;
        for (const auto& f : static_cats) w += f.vocab.size();
        return w;
    }
    std::size_t flat_width() const {
        return time_width() + activity.vocab.size() + event_num_width() +
               event_cat_width() + static_width();
    }
    std::size_t seq_row_width() const {
        return time_width() + activity.vocab.size() + event_num_width() +
               event_cat_width() + static_width();
    }
    std::size_t width(EncodeMode mode) const {
        return mode == EncodeMode::Flat
                   ? flat_width()
                   : seq_row_width() * static_cast<std::size_t>(max_seq_len);
    }
};

namespace detail {

inline NumericStat make_stat(const std::vector<double>& values) {
    NumericStat st;
    st.mean = mean_of(values);
    st.std = stddev_of(values);
    if (values.empty() || st.std <= 0.0) {
        st.dropped = true;
        st.std = 1.0;
    }
    return st;
}

inline void time_features(std::span<const Event> events, std::size_t i,
                          double* elapsed_total, double* elapsed_prev) {
    *elapsed_total = events[i].timestamp - events[0].timestamp;
    *elapsed_prev = i == 0 ? 0.0 : events[i].timestamp - events[i - 1].timestamp;
}

}  // namespace detail

/// Computes vocabularies and standardization statistics from the training
/// dataset. `max_seq_len` controls sequence-mode padding; 0 means the largest
/// prefix length in the specs.
inline FeatureSchema fit_schema(const Dataset& ds, int max_seq_len = 0) {
    if (ds.samples.empty()) fail("fit_schema: empty dataset");

    FeatureSchema schema;
    schema.max_seq_len =
        max_seq_len > 0 ? max_seq_len : ds.specs.back().prefix_length;

    std::set<std::string> activities;
    std::map<std::string, std::vector<double>> event_num_values;
    std::map<std::string, std::set<std::string>> event_cat_values;
    std::map<std::string, std::vector<double>> static_num_values;
    std::map<std::string, std::set<std::string>> static_cat_values;
    std::vector<double> elapsed_total_values, elapsed_prev_values;

    auto note_type_conflict = [](bool num_seen, bool cat_seen, const std::string& name) {
        if (num_seen && cat_seen)
            fail("attribute '", name, "' is numeric in some events and categorical in others");
    };

    for (const auto& sample : ds.samples) {
        const auto events = sample.prefix().events();
        for (std::size_t i = 0; i < events.size(); ++i) {
            const Event& e = events[i];
            activities.insert(e.activity);
            double et, ep;
            detail::time_features(events, i, &et, &ep);
            elapsed_total_values.push_back(et);
            elapsed_prev_values.push_back(ep);
            for (const auto& [name, value] : e.event_attrs) {
                if (attr_is_num(value)) event_num_values[name].push_back(attr_num(value));
                else event_cat_values[name].insert(attr_cat(value));
                note_type_conflict(event_num_values.count(name) > 0,
                                   event_cat_values.count(name) > 0, name);
            }
        }
        const Event& first = events[0];
        for (const auto& [name, value] : first.static_attrs) {
            if (attr_is_num(value)) static_num_values[name].push_back(attr_num(value));
            else static_cat_values[name].insert(attr_cat(value));
            note_type_conflict(static_num_values.count(name) > 0,
                               static_cat_values.count(name) > 0, name);
        }
    }

    schema.elapsed_total = detail::make_stat(elapsed_total_values);
    schema.elapsed_prev = detail::make_stat(elapsed_prev_values);
    schema.activity.name = "activity";
    schema.activity.vocab.assign(activities.begin(), activities.end());
    for (auto& [name, values] : event_num_values)
        schema.event_nums.push_back({name, detail::make_stat(values)});
    for (auto& [name, values] : event_cat_values) {
        FeatureSchema::CatFeature f;
        f.name = name;
        f.vocab.assign(values.begin(), values.end());
        schema.event_cats.push_back(std::move(f));
    }
    for (auto& [name, values] : static_num_values)
        schema.static_nums.push_back({name, detail::make_stat(values)});
    for (auto& [name, values] : static_cat_values) {
        FeatureSchema::CatFeature f;
        f.name = name;
        f.vocab.assign(values.begin(), values.end());
        schema.static_cats.push_back(std::move(f));
    }
    schema.fitted = true;
    return schema;
}

namespace detail {

inline void append_statics(const Event& first, const FeatureSchema& schema,
                           std::vector<double>& out) {
    for (const auto& f : schema.static_nums) {
        if (f.stat.dropped) continue;
        auto it = first.static_attrs.find(f.name);
        const bool present = it != first.static_attrs.end() && attr_is_num(it->second);
        out.push_back(present ? f.stat.standardize(attr_num(it->second)) : 0.0);
    }
    for (const auto& f : schema.static_cats) {
        std::vector<double> block(f.vocab.size(), 0.0);
        auto it = first.static_attrs.find(f.name);
        if (it != first.static_attrs.end() && !attr_is_num(it->second)) {
            const int idx = f.index_of(attr_cat(it->second));
            if (idx >= 0) block[static_cast<std::size_t>(idx)] = 1.0;
        }
        out.insert(out.end(), block.begin(), block.end());
    }
}

}  // namespace detail

/// Flat (aggregation) encoding of a prefix.
inline std::vector<double> encode_flat(const Prefix& prefix, const FeatureSchema& schema) {
    if (!schema.fitted) fail("encode_flat: schema not fitted");
    if (prefix.length == 0) fail("encode_flat: empty prefix");
    const auto events = prefix.events();
    std::vector<double> out;
    out.reserve(schema.flat_width());

    // Time-derived features come from the last event.
    double et, ep;
    detail::time_features(events, events.size() - 1, &et, &ep);
    if (!schema.elapsed_total.dropped) out.push_back(schema.elapsed_total.standardize(et));
    if (!schema.elapsed_prev.dropped) out.push_back(schema.elapsed_prev.standardize(ep));

    // Activity counts over the prefix.
    std::vector<double> activity_counts(schema.activity.vocab.size(), 0.0);
    for (const Event& e : events) {
        const int idx = schema.activity.index_of(e.activity);
        if (idx >= 0) activity_counts[static_cast<std::size_t>(idx)] += 1.0;
    }
    out.insert(out.end(), activity_counts.begin(), activity_counts.end());

    // Numeric event attributes: mean of the standardized present values.
    for (const auto& f : schema.event_nums) {
        if (f.stat.dropped) continue;
        double sum = 0.0;
        int n = 0;
        for (const Event& e : events) {
            auto it = e.event_attrs.find(f.name);
            if (it != e.event_attrs.end() && attr_is_num(it->second)) {
                sum += f.stat.standardize(attr_num(it->second));
                ++n;
            }
        }
        out.push_back(n > 0 ? sum / n : 0.0);
    }

    // Categorical event attributes: per-category counts.
    for (const auto& f : schema.event_cats) {
        std::vector<double> counts(f.vocab.size(), 0.0);
        for (const Event& e : events) {
            auto it = e.event_attrs.find(f.name);
            if (it != e.event_attrs.end() && !attr_is_num(it->second)) {
                const int idx = f.index_of(attr_cat(it->second));
                if (idx >= 0) counts[static_cast<std::size_t>(idx)] += 1.0;
            }
        }
        out.insert(out.end(), counts.begin(), counts.end());
    }

    detail::append_statics(events[0], schema, out);
    return out;
}

/// Sequence (tensor) encoding: max_seq_len rows, front-padded with zeros; a
/// prefix longer than max_seq_len keeps its most recent events. Statics fill
/// the final row's trailing block.
inline Matrix encode_sequence(const Prefix& prefix, const FeatureSchema& schema) {
    if (!schema.fitted) fail("encode_sequence: schema not fitted");
    if (prefix.length == 0) fail("encode_sequence: empty prefix");
    const auto events = prefix.events();
    const std::size_t row_w = schema.seq_row_width();
    const std::size_t n_rows = static_cast<std::size_t>(schema.max_seq_len);
    Matrix m(n_rows, row_w);

    const std::size_t n_keep = std::min(events.size(), n_rows);
    const std::size_t ev_begin = events.size() - n_keep;  // truncate from the front
    for (std::size_t r = 0; r < n_keep; ++r) {
        const std::size_t ei = ev_begin + r;
        const std::size_t row = n_rows - n_keep + r;
        const Event& e = events[ei];
        std::vector<double> v;
        v.reserve(row_w);
        double et, ep;
        detail::time_features(events, ei, &et, &ep);
        if (!schema.elapsed_total.dropped) v.push_back(schema.elapsed_total.standardize(et));
        if (!schema.elapsed_prev.dropped) v.push_back(schema.elapsed_prev.standardize(ep));
        std::vector<double> act(schema.activity.vocab.size(), 0.0);
        const int ai = schema.activity.index_of(e.activity);
        if (ai >= 0) act[static_cast<std::size_t>(ai)] = 1.0;
        v.insert(v.end(), act.begin(), act.end());
        for (const auto& f : schema.event_nums) {
            if (f.stat.dropped) continue;
            auto it = e.event_attrs.find(f.name);
            const bool present = it != e.event_attrs.end() && attr_is_num(it->second);
            v.push_back(present ? f.stat.standardize(attr_num(it->second)) : 0.0);
        }
        for (const auto& f : schema.event_cats) {
            std::vector<double> block(f.vocab.size(), 0.0);
            auto it = e.event_attrs.find(f.name);
            if (it != e.event_attrs.end() && !attr_is_num(it->second)) {
                const int idx = f.index_of(attr_cat(it->second));
                if (idx >= 0) block[static_cast<std::size_t>(idx)] = 1.0;
            }
            v.insert(v.end(), block.begin(), block.end());
        }
        if (row == n_rows - 1) detail::append_statics(events[0], schema, v);
        else v.resize(row_w, 0.0);
        std::copy(v.begin(), v.end(), m.row(row).begin());
    }
    return m;
}

/// Encodes a prefix as a single vector: flat mode directly, sequence mode as
/// the row-major flattened matrix.
inline std::vector<double> encode_prefix(const Prefix& prefix, const FeatureSchema& schema,
                                         EncodeMode mode) {
    if (mode == EncodeMode::Flat) return encode_flat(prefix, schema);
    Matrix m = encode_sequence(prefix, schema);
    return std::move(m.data);
}

}  // namespace scope
