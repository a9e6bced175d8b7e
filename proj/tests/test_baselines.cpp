#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "scope/baselines.hpp"
#include "scope/serialize.hpp"
#include "scope/toy_process.hpp"

namespace {

using namespace scope;

Matrix three_blobs(std::vector<std::size_t>* labels_out = nullptr) {
    // Tight clusters at (0,0), (10,0) and (0,10).
    const std::vector<std::pair<double, double>> centers = {{0, 0}, {10, 0}, {0, 10}};
    Rng rng(2024);
    Matrix X(0, 2);
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (int i = 0; i < 20; ++i) {
            const std::vector<double> row = {centers[c].first + 0.1 * rng.normal(),
                                             centers[c].second + 0.1 * rng.normal()};
            X.push_row(row);
            labels.push_back(c);
        }
    if (labels_out) *labels_out = labels;
    return X;
}

TEST(KMeans, RecoversWellSeparatedBlobs) {
    std::vector<std::size_t> truth;
    const Matrix X = three_blobs(&truth);
    const KMeansModel model = fit_kmeans(X, 3, 99);
    // Same-blob points always land in the same cluster, different blobs never do.
    for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = i + 1; j < X.rows; ++j)
            EXPECT_EQ(model.assign(X.row(i)) == model.assign(X.row(j)),
                      truth[i] == truth[j]);
    // Each centroid sits on top of one blob center.
    std::vector<bool> hit(3, false);
    const std::vector<std::vector<double>> centers = {{0, 0}, {10, 0}, {0, 10}};
    for (std::size_t c = 0; c < 3; ++c) {
        const auto row = model.centroids.row(c);
        for (std::size_t b = 0; b < 3; ++b)
            if (std::abs(row[0] - centers[b][0]) < 0.2 &&
                std::abs(row[1] - centers[b][1]) < 0.2)
                hit[b] = true;
    }
    EXPECT_TRUE(hit[0] && hit[1] && hit[2]);
}

TEST(KMeans, DeterministicUnderAFixedSeed) {
    const Matrix X = three_blobs();
    const KMeansModel a = fit_kmeans(X, 3, 7);
    const KMeansModel b = fit_kmeans(X, 3, 7);
    EXPECT_EQ(a.centroids.data, b.centroids.data);
}

TEST(KMeans, CapsClusterCountAtThePointCount) {
    Matrix X(0, 1);
    for (double v : {1.0, 5.0, 9.0}) X.push_row(std::vector<double>{v});
    const KMeansModel model = fit_kmeans(X, 10, 3);
    EXPECT_EQ(model.centroids.rows, 3u);
    EXPECT_THROW(fit_kmeans(X, 0, 3), ConfigError);
    EXPECT_THROW(fit_kmeans(Matrix(0, 1), 2, 3), std::runtime_error);
}

TEST(Silhouette, SeparatedClustersScoreHighMixedLabelsLow) {
    std::vector<std::size_t> truth;
    const Matrix X = three_blobs(&truth);
    const double good = silhouette(X, truth, 3);
    EXPECT_GT(good, 0.9);
    std::vector<std::size_t> mixed(truth);
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = i % 3;
    EXPECT_LT(silhouette(X, mixed, 3), good);
}

TEST(Silhouette, DegenerateInputsScoreZero) {
    std::vector<std::size_t> truth;
    const Matrix X = three_blobs(&truth);
    EXPECT_DOUBLE_EQ(silhouette(X, truth, 1), 0.0);  // fewer than two clusters
    Matrix two(0, 1);
    two.push_row(std::vector<double>{1.0});
    two.push_row(std::vector<double>{2.0});
    // Everything in one cluster leaves no neighbor cluster to compare against.
    EXPECT_DOUBLE_EQ(silhouette(two, {0, 0}, 2), 0.0);
}

TEST(EmpiricalMdp, TracksObservedActionsPerState) {
    EmpiricalMdp mdp;
    mdp.resize(2, 3);
    mdp.add_transition(0, 0, 1, 0.0);
    mdp.add_transition(0, 2, -1, 4.0);
    mdp.add_transition(1, 1, -1, 2.0);
    const auto obs = mdp.observed_actions();
    EXPECT_EQ(obs[0], (std::vector<int>{0, 2}));
    EXPECT_EQ(obs[1], (std::vector<int>{1}));
}

TEST(QLearning, ConvergesToTheExactActionValues) {
    // Deterministic chain: (0,0) moves to state 1 with reward 1, (0,1) ends
    // with 0; at state 1, action 0 ends with 2 and action 1 ends with 5.
    EmpiricalMdp mdp;
    mdp.resize(2, 2);
    mdp.add_transition(0, 0, 1, 1.0);
    mdp.add_transition(0, 1, -1, 0.0);
    mdp.add_transition(1, 0, -1, 2.0);
    mdp.add_transition(1, 1, -1, 5.0);
    mdp.initial_states = {0};
    QLearningParams p;
    p.alpha = 0.2;
    p.gamma = 0.9;
    p.epsilon = 0.3;
    p.episodes = 8000;
    const QLearnResult res = q_learn(mdp, p, 4242);
    EXPECT_NEAR(res.q.at(1, 0), 2.0, 1e-3);
    EXPECT_NEAR(res.q.at(1, 1), 5.0, 1e-3);
    EXPECT_NEAR(res.q.at(0, 0), 1.0 + 0.9 * 5.0, 1e-3);
    EXPECT_NEAR(res.q.at(0, 1), 0.0, 1e-3);
    // Returns per episode range over {0, 3, 6}; mostly greedy runs score 6.
    EXPECT_GT(res.avg_return, 2.0);
    EXPECT_LT(res.avg_return, 6.0);
}

TEST(QLearning, GammaZeroIgnoresTheContinuation) {
    EmpiricalMdp mdp;
    mdp.resize(2, 1);
    mdp.add_transition(0, 0, 1, 1.0);
    mdp.add_transition(1, 0, -1, 100.0);
    mdp.initial_states = {0};
    QLearningParams p;
    p.alpha = 0.5;
    p.gamma = 0.0;
    p.epsilon = 0.0;
    p.episodes = 200;
    const QLearnResult res = q_learn(mdp, p, 9);
    EXPECT_NEAR(res.q.at(0, 0), 1.0, 1e-6);
}

TEST(QLearning, RejectsBadParametersAndEmptyStarts) {
    EmpiricalMdp mdp;
    mdp.resize(1, 1);
    mdp.add_transition(0, 0, -1, 1.0);
    mdp.initial_states = {0};
    QLearningParams p;
    p.alpha = 0.0;
    EXPECT_THROW(q_learn(mdp, p, 1), ConfigError);
    EmpiricalMdp empty;
    empty.resize(1, 1);
    EXPECT_THROW(q_learn(empty, QLearningParams{}, 1), std::runtime_error);
}

class KMeansQTrained : public ::testing::Test {
protected:
    static const ToyProcess& toy() {
        static const ToyProcess t = [] {
            ToyProcess toy;
            toy.init_probs = {0.5, 0.5};
            toy.next_state = {{0, 1}, {0, 1}};
            toy.mean_y = {{{3, 1}, {2, 6}}, {{4, 9}, {7, 2}}};
            toy.p_a1 = {{0.7, 0.3}, {0.7, 0.3}};
            toy.p_a2 = {{0.5, 0.5}, {0.5, 0.5}};
            return toy;
        }();
        return t;
    }

    static const ToyProcess::SampledLog& sampled() {
        static const auto s = toy().sample_log(400, 606);
        return s;
    }

    static const KMeansQPolicy& policy() {
        static const KMeansQPolicy pol = [] {
            const Dataset ds = build_dataset(sampled().log, toy().specs(),
                                             outcome_from_map(sampled().outcomes));
            KMeansQConfig cfg;
            cfg.n_clusters = 4;
            cfg.qlearn.episodes = 2000;
            return train_kmeans_q(ds, cfg, KpiDirection::Maximize, 5150);
        }();
        return pol;
    }
};

TEST_F(KMeansQTrained, ChoosesValidActionsEverywhere) {
    for (std::size_t s1 = 0; s1 < 2; ++s1)
        for (std::size_t a1 = 0; a1 < 2; ++a1) {
            const Trace t = toy().make_trace("probe", s1, a1, 0);
            const int c1 = policy().choose(Prefix{&t, 1}, 1);
            const int c2 = policy().choose(Prefix{&t, 2}, 2);
            EXPECT_GE(c1, 0);
            EXPECT_LT(c1, 2);
            EXPECT_GE(c2, 0);
            EXPECT_LT(c2, 2);
        }
    EXPECT_GE(policy().silhouette_score, -1.0);
    EXPECT_LE(policy().silhouette_score, 1.0);
    EXPECT_TRUE(std::isfinite(policy().avg_value));
}

TEST_F(KMeansQTrained, FallbackIsTheMostFrequentLoggedAction) {
    // a1 is drawn with propensities {0.7, 0.3}, a2 with {0.5, 0.5}; count the
    // realized modes directly from the sampled log.
    std::vector<std::size_t> c1(2, 0), c2(2, 0);
    for (std::size_t i = 0; i < sampled().a1.size(); ++i) {
        ++c1[sampled().a1[i]];
        ++c2[sampled().a2[i]];
    }
    EXPECT_EQ(policy().fallback_action[0], c1[1] > c1[0] ? 1 : 0);
    EXPECT_EQ(policy().fallback_action[1], c2[1] > c2[0] ? 1 : 0);
}

TEST_F(KMeansQTrained, SerializationRoundTripsBehaviorAndBytes) {
    const json j = kmeansq_to_json(policy());
    const KMeansQPolicy back = kmeansq_from_json(j);
    for (std::size_t s1 = 0; s1 < 2; ++s1)
        for (std::size_t a1 = 0; a1 < 2; ++a1) {
            const Trace t = toy().make_trace("probe", s1, a1, 0);
            EXPECT_EQ(policy().choose(Prefix{&t, 1}, 1), back.choose(Prefix{&t, 1}, 1));
            EXPECT_EQ(policy().choose(Prefix{&t, 2}, 2), back.choose(Prefix{&t, 2}, 2));
        }
    EXPECT_EQ(j.dump(), kmeansq_to_json(back).dump());
    EXPECT_DOUBLE_EQ(policy().silhouette_score, back.silhouette_score);
    EXPECT_DOUBLE_EQ(policy().avg_value, back.avg_value);
}

}  // namespace
