#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scope/baselines.hpp"
#include "scope/causal.hpp"
#include "scope/encoding.hpp"
#include "scope/policy.hpp"
#include "scope/regressors.hpp"

namespace scope {

using json = nlohmann::json;

inline constexpr int kPolicyFormatVersion = 1;

namespace detail {

inline json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) fail_config("matrix payload size mismatch");
    return m;
}

inline json tree_to_json(const RegressionTree& t) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes)
        nodes.push_back({n.feature, n.threshold, n.value, n.left, n.right});
    return nodes;
}

inline RegressionTree tree_from_json(const json& j) {
    RegressionTree t;
    for (const auto& n : j)
        t.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(),
                                   n.at(2).get<double>(), n.at(3).get<int>(),
                                   n.at(4).get<int>()});
    return t;
}

}  // namespace detail

inline json regressor_to_json(const Regressor& model) {
    json j;
    j["kind"] = to_string(model.kind());
    switch (model.kind()) {
        case ModelKind::Ridge: {
            const auto& m = dynamic_cast<const RidgeRegressor&>(model);
            j["coef"] = m.coef;
            j["feature_means"] = m.feature_means;
            j["intercept"] = m.intercept;
            break;
        }
        case ModelKind::BoostedTrees: {
            const auto& m = dynamic_cast<const BoostedTreesRegressor&>(model);
            j["base"] = m.base;
            j["shrinkage"] = m.shrinkage;
            j["width"] = m.width;
            json trees = json::array();
            for (const auto& t : m.trees) trees.push_back(detail::tree_to_json(t));
            j["trees"] = std::move(trees);
            break;
        }
        case ModelKind::BaggedTrees: {
            const auto& m = dynamic_cast<const BaggedTreesRegressor&>(model);
            j["width"] = m.width;
            json trees = json::array();
            for (const auto& t : m.trees) trees.push_back(detail::tree_to_json(t));
            j["trees"] = std::move(trees);
            break;
        }
        case ModelKind::Mlp: {
            const auto& m = dynamic_cast<const MlpRegressor&>(model);
            json layers = json::array();
            for (std::size_t l = 0; l < m.net.weights.size(); ++l)
                layers.push_back({{"weights", detail::matrix_to_json(m.net.weights[l])},
                                  {"biases", m.net.biases[l]}});
            j["layers"] = std::move(layers);
            break;
        }
        case ModelKind::Tabular: {
            const auto& m = dynamic_cast<const TabularRegressor&>(model);
            j["width"] = m.width;
            j["global_mean"] = m.global_mean;
            std::map<std::vector<double>, std::pair<double, int>> ordered(
                m.cells.begin(), m.cells.end());
            json cells = json::array();
            for (const auto& [key, v] : ordered)
                cells.push_back({{"key", key}, {"sum", v.first}, {"count", v.second}});
            j["cells"] = std::move(cells);
            break;
        }
    }
    return j;
}

inline std::unique_ptr<Regressor> regressor_from_json(const json& j) {
    const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
        case ModelKind::Ridge: {
            auto m = std::make_unique<RidgeRegressor>();
            m->coef = j.at("coef").get<std::vector<double>>();
            m->feature_means = j.at("feature_means").get<std::vector<double>>();
            m->intercept = j.at("intercept").get<double>();
            return m;
        }
        case ModelKind::BoostedTrees: {
            auto m = std::make_unique<BoostedTreesRegressor>();
            m->base = j.at("base").get<double>();
            m->shrinkage = j.at("shrinkage").get<double>();
            m->width = j.at("width").get<std::size_t>();
            for (const auto& t : j.at("trees")) m->trees.push_back(detail::tree_from_json(t));
            return m;
        }
        case ModelKind::BaggedTrees: {
            auto m = std::make_unique<BaggedTreesRegressor>();
            m->width = j.at("width").get<std::size_t>();
            for (const auto& t : j.at("trees")) m->trees.push_back(detail::tree_from_json(t));
            return m;
        }
        case ModelKind::Mlp: {
            auto m = std::make_unique<MlpRegressor>();
            for (const auto& layer : j.at("layers")) {
                m->net.weights.push_back(detail::matrix_from_json(layer.at("weights")));
                m->net.biases.push_back(layer.at("biases").get<std::vector<double>>());
            }
            return m;
        }
        case ModelKind::Tabular: {
            auto m = std::make_unique<TabularRegressor>();
            m->width = j.at("width").get<std::size_t>();
            m->global_mean = j.at("global_mean").get<double>();
            for (const auto& cell : j.at("cells"))
                m->cells[cell.at("key").get<std::vector<double>>()] = {
                    cell.at("sum").get<double>(), cell.at("count").get<int>()};
            return m;
        }
    }
    fail_config("unreachable model kind");
}

namespace detail {

inline json stat_to_json(const NumericStat& s) {
    return json{{"mean", s.mean}, {"std", s.std}, {"dropped", s.dropped}};
}

inline NumericStat stat_from_json(const json& j) {
    NumericStat s;
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.dropped = j.at("dropped").get<bool>();
    return s;
}

inline json cat_to_json(const FeatureSchema::CatFeature& f) {
    return json{{"name", f.name}, {"vocab", f.vocab}};
}

inline FeatureSchema::CatFeature cat_from_json(const json& j) {
    FeatureSchema::CatFeature f;
    f.name = j.at("name").get<std::string>();
    f.vocab = j.at("vocab").get<std::vector<std::string>>();
    return f;
}

}  // namespace detail

inline json schema_to_json(const FeatureSchema& s) {
    json j;
    j["max_seq_len"] = s.max_seq_len;
    j["elapsed_total"] = detail::stat_to_json(s.elapsed_total);
    j["elapsed_prev"] = detail::stat_to_json(s.elapsed_prev);
    j["activity"] = detail::cat_to_json(s.activity);
    json event_nums = json::array(), static_nums = json::array();
    for (const auto& f : s.event_nums)
        event_nums.push_back({{"name", f.name}, {"stat", detail::stat_to_json(f.stat)}});
    for (const auto& f : s.static_nums)
        static_nums.push_back({{"name", f.name}, {"stat", detail::stat_to_json(f.stat)}});
    j["event_nums"] = std::move(event_nums);
    j["static_nums"] = std::move(static_nums);
    json event_cats = json::array(), static_cats = json::array();
    for (const auto& f : s.event_cats) event_cats.push_back(detail::cat_to_json(f));
    for (const auto& f : s.static_cats) static_cats.push_back(detail::cat_to_json(f));
    j["event_cats"] = std::move(event_cats);
    j["static_cats"] = std::move(static_cats);
    return j;
}

inline FeatureSchema schema_from_json(const json& j) {
    FeatureSchema s;
    s.max_seq_len = j.at("max_seq_len").get<int>();
    s.elapsed_total = detail::stat_from_json(j.at("elapsed_total"));
    s.elapsed_prev = detail::stat_from_json(j.at("elapsed_prev"));
    s.activity = detail::cat_from_json(j.at("activity"));
    for (const auto& f : j.at("event_nums"))
        s.event_nums.push_back({f.at("name").get<std::string>(),
                                detail::stat_from_json(f.at("stat"))});
    for (const auto& f : j.at("static_nums"))
        s.static_nums.push_back({f.at("name").get<std::string>(),
                                 detail::stat_from_json(f.at("stat"))});
    for (const auto& f : j.at("event_cats")) s.event_cats.push_back(detail::cat_from_json(f));
    for (const auto& f : j.at("static_cats")) s.static_cats.push_back(detail::cat_from_json(f));
    s.fitted = true;
    return s;
}

inline json specs_to_json(const std::vector<DecisionPointSpec>& specs) {
    json out = json::array();
    for (const auto& s : specs)
        out.push_back({{"index", s.index},
                       {"prefix_length", s.prefix_length},
                       {"actions", s.actions},
                       {"action_attr", s.action_attr}});
    return out;
}

inline std::vector<DecisionPointSpec> specs_from_json(const json& j) {
    std::vector<DecisionPointSpec> out;
    for (const auto& s : j) {
        DecisionPointSpec spec;
        spec.index = s.at("index").get<int>();
        spec.prefix_length = s.at("prefix_length").get<int>();
        spec.actions = s.at("actions").get<std::vector<std::string>>();
        spec.action_attr = s.at("action_attr").get<std::string>();
        out.push_back(std::move(spec));
    }
    return out;
}

inline json stage_to_json(const StageLearner& stage) {
    json j;
    j["learner"] = to_string(stage.kind());
    switch (stage.kind()) {
        case LearnerKind::S: {
            const auto& s = dynamic_cast<const SLearner&>(stage);
            j["n_actions"] = s.n_actions;
            j["model"] = regressor_to_json(*s.model);
            break;
        }
        case LearnerKind::T: {
            const auto& t = dynamic_cast<const TLearner&>(stage);
            json models = json::array();
            for (const auto& m : t.models) models.push_back(regressor_to_json(*m));
            j["models"] = std::move(models);
            break;
        }
        case LearnerKind::RA: {
            const auto& r = dynamic_cast<const RaLearner&>(stage);
            j["variant"] = to_string(r.variant);
            j["stage1"] = stage_to_json(*r.stage1);
            json effects = json::array();
            for (const auto& m : r.effect_models) effects.push_back(regressor_to_json(*m));
            j["effects"] = std::move(effects);
            break;
        }
    }
    return j;
}

inline std::unique_ptr<StageLearner> stage_from_json(const json& j) {
    const LearnerKind kind = learner_kind_from_string(j.at("learner").get<std::string>());
    switch (kind) {
        case LearnerKind::S: {
            auto s = std::make_unique<SLearner>();
            s->n_actions = j.at("n_actions").get<std::size_t>();
            s->model = regressor_from_json(j.at("model"));
            return s;
        }
        case LearnerKind::T: {
            auto t = std::make_unique<TLearner>();
            for (const auto& m : j.at("models")) t->models.push_back(regressor_from_json(m));
            return t;
        }
        case LearnerKind::RA: {
            auto r = std::make_unique<RaLearner>();
            r->variant = ra_variant_from_string(j.at("variant").get<std::string>());
            auto s1 = stage_from_json(j.at("stage1"));
            r->stage1.reset(dynamic_cast<SLearner*>(s1.release()));
            if (!r->stage1) fail_config("ra stage1 payload is not an s-learner");
            for (const auto& m : j.at("effects"))
                r->effect_models.push_back(regressor_from_json(m));
            return r;
        }
    }
    fail_config("unreachable learner kind");
}

inline json model_spec_to_json(const ModelSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["l2"] = s.params.l2;
    j["n_rounds"] = s.params.n_rounds;
    j["max_depth"] = s.params.max_depth;
    j["learning_rate"] = s.params.learning_rate;
    j["min_samples_leaf"] = s.params.min_samples_leaf;
    j["n_trees"] = s.params.n_trees;
    j["max_features"] = s.params.max_features;
    j["hidden"] = s.params.hidden;
    j["mlp_learning_rate"] = s.params.mlp_learning_rate;
    j["epochs"] = s.params.epochs;
    j["batch_size"] = s.params.batch_size;
    return j;
}

inline ModelSpec model_spec_from_json(const json& j) {
    ModelSpec s;
    s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    s.params.l2 = j.at("l2").get<double>();
    s.params.n_rounds = j.at("n_rounds").get<int>();
    s.params.max_depth = j.at("max_depth").get<int>();
    s.params.learning_rate = j.at("learning_rate").get<double>();
    s.params.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    s.params.n_trees = j.at("n_trees").get<int>();
    s.params.max_features = j.at("max_features").get<double>();
    s.params.hidden = j.at("hidden").get<std::vector<int>>();
    s.params.mlp_learning_rate = j.at("mlp_learning_rate").get<double>();
    s.params.epochs = j.at("epochs").get<int>();
    s.params.batch_size = j.at("batch_size").get<int>();
    return s;
}

inline json policy_to_json(const TrainedPolicy& pol) {
    json j;
    j["format_version"] = kPolicyFormatVersion;
    j["type"] = "stage_policy";
    j["direction"] = to_string(pol.direction);
    j["config"] = {{"learner", to_string(pol.config.learner)},
                   {"model", model_spec_to_json(pol.config.model)},
                   {"encode", to_string(pol.config.encode)},
                   {"ra_variant", to_string(pol.config.ra_variant)},
                   {"propagate", pol.config.propagate},
                   {"max_seq_len", pol.config.max_seq_len}};
    j["schema"] = schema_to_json(pol.schema);
    j["specs"] = specs_to_json(pol.specs);
    json stages = json::array();
    for (const auto& s : pol.stages) stages.push_back(stage_to_json(*s));
    j["stages"] = std::move(stages);
    return j;
}

inline TrainedPolicy policy_from_json(const json& j) {
    if (j.at("format_version").get<int>() != kPolicyFormatVersion)
        fail_config("unsupported policy format version");
    if (j.at("type").get<std::string>() != "stage_policy")
        fail_config("not a stage policy artifact");
    TrainedPolicy pol;
    pol.direction = j.at("direction").get<std::string>() == "maximize"
                        ? KpiDirection::Maximize
                        : KpiDirection::Minimize;
    const json& c = j.at("config");
    pol.config.learner = learner_kind_from_string(c.at("learner").get<std::string>());
    pol.config.model = model_spec_from_json(c.at("model"));
    pol.config.encode = encode_mode_from_string(c.at("encode").get<std::string>());
    pol.config.ra_variant = ra_variant_from_string(c.at("ra_variant").get<std::string>());
    pol.config.propagate = c.at("propagate").get<bool>();
    pol.config.max_seq_len = c.at("max_seq_len").get<int>();
    pol.schema = schema_from_json(j.at("schema"));
    pol.specs = specs_from_json(j.at("specs"));
    for (const auto& s : j.at("stages")) pol.stages.push_back(stage_from_json(s));
    pol.records.resize(pol.stages.size());
    return pol;
}

inline json kmeansq_to_json(const KMeansQPolicy& pol) {
    json j;
    j["format_version"] = kPolicyFormatVersion;
    j["type"] = "kmeansq_policy";
    j["direction"] = to_string(pol.direction);
    j["config"] = {{"n_clusters", pol.config.n_clusters},
                   {"alpha", pol.config.qlearn.alpha},
                   {"gamma", pol.config.qlearn.gamma},
                   {"epsilon", pol.config.qlearn.epsilon},
                   {"episodes", pol.config.qlearn.episodes},
                   {"max_steps", pol.config.qlearn.max_steps},
                   {"encode", to_string(pol.config.encode)},
                   {"max_seq_len", pol.config.max_seq_len},
                   {"silhouette_cap", pol.config.silhouette_cap}};
    j["schema"] = schema_to_json(pol.schema);
    j["specs"] = specs_to_json(pol.specs);
    j["centroids"] = detail::matrix_to_json(pol.kmeans.centroids);
    std::map<std::uint64_t, int> ordered(pol.state_ids.begin(), pol.state_ids.end());
    json states = json::array();
    for (const auto& [key, id] : ordered) states.push_back({key, id});
    j["state_ids"] = std::move(states);
    j["q"] = detail::matrix_to_json(pol.q);
    j["observed"] = pol.observed;
    j["fallback_action"] = pol.fallback_action;
    j["silhouette_score"] = pol.silhouette_score;
    j["avg_value"] = pol.avg_value;
    return j;
}

inline KMeansQPolicy kmeansq_from_json(const json& j) {
    if (j.at("format_version").get<int>() != kPolicyFormatVersion)
        fail_config("unsupported policy format version");
    if (j.at("type").get<std::string>() != "kmeansq_policy")
        fail_config("not a kmeans-q policy artifact");
    KMeansQPolicy pol;
    pol.direction = j.at("direction").get<std::string>() == "maximize"
                        ? KpiDirection::Maximize
                        : KpiDirection::Minimize;
    const json& c = j.at("config");
    pol.config.n_clusters = c.at("n_clusters").get<std::size_t>();
    pol.config.qlearn.alpha = c.at("alpha").get<double>();
    pol.config.qlearn.gamma = c.at("gamma").get<double>();
    pol.config.qlearn.epsilon = c.at("epsilon").get<double>();
    pol.config.qlearn.episodes = c.at("episodes").get<int>();
    pol.config.qlearn.max_steps = c.at("max_steps").get<int>();
    pol.config.encode = encode_mode_from_string(c.at("encode").get<std::string>());
    pol.config.max_seq_len = c.at("max_seq_len").get<int>();
    pol.config.silhouette_cap = c.at("silhouette_cap").get<std::size_t>();
    pol.schema = schema_from_json(j.at("schema"));
    pol.specs = specs_from_json(j.at("specs"));
    pol.kmeans.centroids = detail::matrix_from_json(j.at("centroids"));
    for (const auto& entry : j.at("state_ids"))
        pol.state_ids[entry.at(0).get<std::uint64_t>()] = entry.at(1).get<int>();
    pol.q = detail::matrix_from_json(j.at("q"));
    pol.observed = j.at("observed").get<std::vector<std::vector<int>>>();
    pol.fallback_action = j.at("fallback_action").get<std::vector<int>>();
    pol.silhouette_score = j.at("silhouette_score").get<double>();
    pol.avg_value = j.at("avg_value").get<double>();
    return pol;
}

inline json load_artifact_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot read '", path, "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail_config("'", path, "' is not valid JSON: ", e.what());
    }
    return j;
}

inline void save_policy(const TrainedPolicy& pol, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write '", path, "'");
    out << policy_to_json(pol).dump(2) << "\n";
}

inline TrainedPolicy load_policy(const std::string& path) {
    return policy_from_json(load_artifact_json(path));
}

inline void save_kmeansq(const KMeansQPolicy& pol, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write '", path, "'");
    out << kmeansq_to_json(pol).dump(2) << "\n";
}

inline KMeansQPolicy load_kmeansq(const std::string& path) {
    return kmeansq_from_json(load_artifact_json(path));
}

}  // namespace scope
