#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scope/common.hpp"
#include "scope/encoding.hpp"
#include "scope/event_log.hpp"
#include "scope/rng.hpp"
#include "scope/simulator.hpp"

namespace scope {

// --- k-means ------------------------------------------------------------------

struct KMeansModel {
    Matrix centroids;  // one row per cluster

    std::size_t assign(std::span<const double> x) const {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows; ++c) {
            double d = 0.0;
            auto row = centroids.row(c);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double diff = x[j] - row[j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        d += diff * diff;
    }
    return d;
}

}  // namespace detail

/// Lloyd's algorithm with distance-squared weighted seeding. Empty clusters
/// keep their previous centroid. Deterministic under a fixed seed.
inline KMeansModel fit_kmeans(const Matrix& X, std::size_t k, std::uint64_t seed,
                              int max_iter = 100) {
    if (X.rows == 0) fail("kmeans: no points");
    if (k < 1) fail_config("kmeans: k must be >= 1");
    k = std::min(k, X.rows);
    Rng rng(seed);
    KMeansModel model;
    model.centroids = Matrix(k, X.cols);

    std::vector<std::size_t> chosen;
    chosen.push_back(rng.uniform_int(X.rows));
    std::vector<double> d2(X.rows, 0.0);
    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < X.rows; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c : chosen)
                best = std::min(best, detail::sq_dist(X.row(i), X.row(c)));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.uniform_int(X.rows);
        } else {
            const double u = rng.uniform01() * total;
            double acc = 0.0;
            pick = X.rows - 1;
            for (std::size_t i = 0; i < X.rows; ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
    }
    for (std::size_t c = 0; c < k; ++c) {
        auto src = X.row(chosen[c]);
        std::copy(src.begin(), src.end(), model.centroids.row(c).begin());
    }

    std::vector<std::size_t> labels(X.rows, 0);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < X.rows; ++i) {
            const std::size_t c = model.assign(X.row(i));
            if (c != labels[i]) {
                labels[i] = c;
                changed = true;
            }
        }
        if (!changed && it > 0) break;
        Matrix sums(k, X.cols);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < X.rows; ++i) {
            auto row = X.row(i);
            auto dst = sums.row(labels[i]);
            for (std::size_t j = 0; j < X.cols; ++j) dst[j] += row[j];
            ++counts[labels[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            auto dst = model.centroids.row(c);
            auto src = sums.row(c);
            for (std::size_t j = 0; j < X.cols; ++j)
                dst[j] = src[j] / static_cast<double>(counts[c]);
        }
    }
    return model;
}

/// Mean silhouette coefficient. Quadratic in the number of points, so callers
/// should subsample large inputs. Singletons score zero.
inline double silhouette(const Matrix& X, const std::vector<std::size_t>& labels,
                         std::size_t k) {
    if (X.rows < 2 || k < 2) return 0.0;
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t l : labels) ++counts[l];
    double total = 0.0;
    std::vector<double> mean_dist(k);
    for (std::size_t i = 0; i < X.rows; ++i) {
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (std::size_t j = 0; j < X.rows; ++j) {
            if (i == j) continue;
            mean_dist[labels[j]] += std::sqrt(detail::sq_dist(X.row(i), X.row(j)));
        }
        const std::size_t li = labels[i];
        if (counts[li] <= 1) continue;  // singleton contributes 0
        const double a = mean_dist[li] / static_cast<double>(counts[li] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == li || counts[c] == 0) continue;
            b = std::min(b, mean_dist[c] / static_cast<double>(counts[c]));
        }
        if (!std::isfinite(b)) continue;
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(X.rows);
}

// --- Empirical MDP and tabular Q-learning ------------------------------------

/// Finite MDP assembled from logged transitions. Episodes replayed from it
/// draw successor/reward pairs uniformly from the observed outcomes of each
/// (state, action), reproducing the empirical frequencies.
struct EmpiricalMdp {
    struct Outcome {
        int next = -1;  // -1 ends the episode
        double reward = 0.0;
    };

    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::vector<std::vector<Outcome>>> outcomes;  // [state][action]
    std::vector<std::size_t> initial_states;                  // with multiplicity

    void resize(std::size_t states, std::size_t actions) {
        n_states = states;
        n_actions = actions;
        outcomes.assign(states, std::vector<std::vector<Outcome>>(actions));
    }

    void add_transition(std::size_t s, std::size_t a, int next, double reward) {
        outcomes[s][a].push_back(Outcome{next, reward});
    }

    std::vector<std::vector<int>> observed_actions() const {
        std::vector<std::vector<int>> obs(n_states);
        for (std::size_t s = 0; s < n_states; ++s)
            for (std::size_t a = 0; a < n_actions; ++a)
                if (!outcomes[s][a].empty()) obs[s].push_back(static_cast<int>(a));
        return obs;
    }
};

struct QLearningParams {
    double alpha = 0.1;
    double gamma = 1.0;
    double epsilon = 0.1;
    int episodes = 20000;
    int max_steps = 1000;  // guards cycles in the empirical model
};

struct QLearnResult {
    Matrix q;
    double avg_return = 0.0;  // mean undiscounted return over replay episodes
};

/// Tabular Q-learning over episodes sampled from the empirical MDP, with
/// epsilon-greedy exploration restricted to actions observed at each state.
/// Rewards are maximized; minimizing callers negate them. Unvisited pairs
/// stay at zero.
inline QLearnResult q_learn(const EmpiricalMdp& mdp, const QLearningParams& p,
                            std::uint64_t seed) {
    if (mdp.initial_states.empty()) fail("q_learn: no initial states");
    if (p.alpha <= 0 || p.alpha > 1 || p.epsilon < 0 || p.epsilon > 1 ||
        p.gamma < 0 || p.gamma > 1 || p.episodes < 1)
        fail_config("q_learn: parameters out of range");
    Matrix q(mdp.n_states, mdp.n_actions);
    const auto observed = mdp.observed_actions();
    Rng rng(seed);
    auto greedy = [&](std::size_t s) {
        const auto& acts = observed[s];
        int best = acts.front();
        for (int a : acts)
            if (q.at(s, static_cast<std::size_t>(a)) >
                q.at(s, static_cast<std::size_t>(best)))
                best = a;
        return best;
    };
    double return_sum = 0.0;
    for (int e = 0; e < p.episodes; ++e) {
        std::size_t s = mdp.initial_states[rng.uniform_int(mdp.initial_states.size())];
        for (int step = 0; step < p.max_steps; ++step) {
            const auto& acts = observed[s];
            if (acts.empty()) break;
            int a = rng.uniform01() < p.epsilon
                        ? acts[rng.uniform_int(acts.size())]
                        : greedy(s);
            const auto& outs = mdp.outcomes[s][static_cast<std::size_t>(a)];
            const auto& o = outs[rng.uniform_int(outs.size())];
            return_sum += o.reward;
            double target = o.reward;
            if (o.next >= 0) {
                const auto ns = static_cast<std::size_t>(o.next);
                if (!observed[ns].empty()) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (int na : observed[ns])
                        best = std::max(best, q.at(ns, static_cast<std::size_t>(na)));
                    target += p.gamma * best;
                }
            }
            auto& cell = q.at(s, static_cast<std::size_t>(a));
            cell += p.alpha * (target - cell);
            if (o.next < 0) break;
            s = static_cast<std::size_t>(o.next);
        }
    }
    QLearnResult res;
    res.q = std::move(q);
    res.avg_return = return_sum / static_cast<double>(p.episodes);
    return res;
}

// --- Cluster-state Q-learning policy ------------------------------------------

struct KMeansQConfig {
    std::size_t n_clusters = 8;
    QLearningParams qlearn;
    EncodeMode encode = EncodeMode::Flat;
    int max_seq_len = 0;
    std::size_t silhouette_cap = 2000;  // subsample bound for scoring
};

/// Baseline that discretizes prefixes into (cluster, last activity) states,
/// builds the empirical MDP over those states with the case KPI as terminal
/// reward, and solves it with tabular Q-learning. Decisions share one global
/// action space sized by the widest decision point.
struct KMeansQPolicy {
    KMeansQConfig config;
    KpiDirection direction = KpiDirection::Maximize;
    FeatureSchema schema;
    std::vector<DecisionPointSpec> specs;
    KMeansModel kmeans;
    std::unordered_map<std::uint64_t, int> state_ids;
    Matrix q;
    std::vector<std::vector<int>> observed;  // per state
    std::vector<int> fallback_action;        // per decision point, most frequent
    double silhouette_score = 0.0;
    double avg_value = 0.0;  // mean episode return seen during replay training

    std::uint64_t state_key(std::size_t cluster, const std::string& activity) const {
        const int ai = schema.activity.index_of(activity);
        const auto span = schema.activity.vocab.size() + 1;
        return cluster * span + static_cast<std::uint64_t>(ai + 1);
    }

    int lookup_state(const Prefix& prefix) const {
        const auto x = encode_prefix(prefix, schema, config.encode);
        const std::size_t c = kmeans.assign(x);
        const auto it = state_ids.find(state_key(c, prefix.last().activity));
        return it == state_ids.end() ? -1 : it->second;
    }

    int choose(const Prefix& prefix, int k) const {
        const std::size_t n_k = specs[static_cast<std::size_t>(k - 1)].actions.size();
        const int state = lookup_state(prefix);
        if (state >= 0) {
            int best = -1;
            for (int a : observed[static_cast<std::size_t>(state)]) {
                if (static_cast<std::size_t>(a) >= n_k) continue;
                if (best < 0 || q.at(static_cast<std::size_t>(state),
                                     static_cast<std::size_t>(a)) >
                                    q.at(static_cast<std::size_t>(state),
                                         static_cast<std::size_t>(best)))
                    best = a;
            }
            if (best >= 0) return best;
        }
        return fallback_action[static_cast<std::size_t>(k - 1)];
    }
};

inline KMeansQPolicy train_kmeans_q(const Dataset& ds, const KMeansQConfig& cfg,
                                    KpiDirection direction, std::uint64_t seed) {
    validate_specs(ds.specs);
    if (ds.samples.empty()) fail("train: dataset has no samples");
    KMeansQPolicy pol;
    pol.config = cfg;
    pol.direction = direction;
    pol.specs = ds.specs;
    pol.schema = fit_schema(ds, cfg.max_seq_len);

    Matrix X(ds.samples.size(), pol.schema.width(cfg.encode));
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto x = encode_prefix(ds.samples[i].prefix(), pol.schema, cfg.encode);
        std::copy(x.begin(), x.end(), X.row(i).begin());
    }
    pol.kmeans = fit_kmeans(X, cfg.n_clusters, substream_seed(seed, "kmeans"));

    // Dense state ids over the observed (cluster, last activity) pairs.
    std::vector<int> sample_state(ds.samples.size());
    std::vector<std::size_t> labels(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        labels[i] = pol.kmeans.assign(X.row(i));
        const auto key = pol.state_key(
            labels[i], ds.samples[i].prefix().last().activity);
        const auto it =
            pol.state_ids.emplace(key, static_cast<int>(pol.state_ids.size())).first;
        sample_state[i] = it->second;
    }

    std::size_t max_actions = 0;
    for (const auto& spec : ds.specs) max_actions = std::max(max_actions, spec.actions.size());

    EmpiricalMdp mdp;
    mdp.resize(pol.state_ids.size(), max_actions);
    const double sign = direction == KpiDirection::Maximize ? 1.0 : -1.0;

    // Per-case chains ordered by decision index; the terminal step carries the
    // (sign-adjusted) case KPI, intermediate steps reward zero.
    std::map<int, std::vector<std::size_t>> by_case;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        by_case[ds.samples[i].case_index].push_back(i);
    for (auto& [case_index, chain] : by_case) {
        std::sort(chain.begin(), chain.end(), [&](std::size_t a, std::size_t b) {
            return ds.samples[a].decision_index < ds.samples[b].decision_index;
        });
        for (std::size_t j = 0; j < chain.size(); ++j) {
            const Sample& s = ds.samples[chain[j]];
            const bool last = j + 1 == chain.size();
            const int next = last ? -1 : sample_state[chain[j + 1]];
            const double reward = last ? sign * s.outcome : 0.0;
            mdp.add_transition(static_cast<std::size_t>(sample_state[chain[j]]),
                               static_cast<std::size_t>(s.action), next, reward);
        }
        mdp.initial_states.push_back(static_cast<std::size_t>(sample_state[chain.front()]));
    }

    QLearnResult learned = q_learn(mdp, cfg.qlearn, substream_seed(seed, "qlearn"));
    pol.q = std::move(learned.q);
    pol.avg_value = learned.avg_return;
    pol.observed = mdp.observed_actions();

    // Fallback per decision point: the most frequently logged action there.
    pol.fallback_action.assign(ds.specs.size(), 0);
    for (std::size_t k = 0; k < ds.specs.size(); ++k) {
        std::vector<std::size_t> counts(ds.specs[k].actions.size(), 0);
        for (const Sample& s : ds.samples)
            if (s.decision_index == static_cast<int>(k) + 1)
                ++counts[static_cast<std::size_t>(s.action)];
        std::size_t best = 0;
        for (std::size_t a = 1; a < counts.size(); ++a)
            if (counts[a] > counts[best]) best = a;
        pol.fallback_action[k] = static_cast<int>(best);
    }

    // Cluster quality for tuning: silhouette on a deterministic subsample.
    {
        std::vector<std::size_t> pick(ds.samples.size());
        std::iota(pick.begin(), pick.end(), 0u);
        if (pick.size() > cfg.silhouette_cap) {
            Rng rng(substream_seed(seed, "silhouette"));
            rng.shuffle(pick);
            pick.resize(cfg.silhouette_cap);
        }
        Matrix Xs(pick.size(), X.cols);
        std::vector<std::size_t> ls(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) {
            auto src = X.row(pick[i]);
            std::copy(src.begin(), src.end(), Xs.row(i).begin());
            ls[i] = labels[pick[i]];
        }
        pol.silhouette_score = silhouette(Xs, ls, cfg.n_clusters);
    }
    return pol;
}

}  // namespace scope
