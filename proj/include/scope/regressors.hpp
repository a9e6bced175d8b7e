#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scope/common.hpp"
#include "scope/rng.hpp"

namespace scope {

enum class ModelKind { Ridge, BoostedTrees, BaggedTrees, Mlp, Tabular };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Ridge: return "ridge";
        case ModelKind::BoostedTrees: return "boosted_trees";
        case ModelKind::BaggedTrees: return "bagged_trees";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Tabular: return "tabular";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "ridge") return ModelKind::Ridge;
    if (s == "boosted_trees") return ModelKind::BoostedTrees;
    if (s == "bagged_trees") return ModelKind::BaggedTrees;
    if (s == "mlp") return ModelKind::Mlp;
    if (s == "tabular") return ModelKind::Tabular;
    fail_config("unknown base model kind '", s, "'");
}

struct ModelParams {
    // ridge
    double l2 = 1e-6;
    // trees
    int n_rounds = 300;         // boosting rounds
    int max_depth = 4;
    double learning_rate = 0.1; // boosting shrinkage
    int min_samples_leaf = 10;
    int n_trees = 100;          // bagged ensemble size
    double max_features = 1.0;  // fraction of features tried per split (bagged)
    // mlp
    std::vector<int> hidden = {32};
    double mlp_learning_rate = 0.02;
    int epochs = 150;
    int batch_size = 32;
};

struct ModelSpec {
    ModelKind kind = ModelKind::BoostedTrees;
    ModelParams params;
};

inline void validate_model_spec(const ModelSpec& spec) {
    const ModelParams& p = spec.params;
    switch (spec.kind) {
        case ModelKind::Ridge:
            if (p.l2 < 0) fail_config("ridge l2 must be >= 0");
            break;
        case ModelKind::BoostedTrees:
            if (p.n_rounds < 1 || p.max_depth < 1 || p.learning_rate <= 0 ||
                p.min_samples_leaf < 1)
                fail_config("boosted_trees hyperparameters must be positive");
            break;
        case ModelKind::BaggedTrees:
            if (p.n_trees < 1 || p.max_depth < 1 || p.min_samples_leaf < 1 ||
                p.max_features <= 0 || p.max_features > 1.0)
                fail_config("bagged_trees hyperparameters out of range");
            break;
        case ModelKind::Mlp:
            if (p.mlp_learning_rate <= 0 || p.epochs < 1 || p.batch_size < 1)
                fail_config("mlp hyperparameters must be positive");
            for (int h : p.hidden)
                if (h < 1) fail_config("mlp hidden sizes must be positive");
            break;
        case ModelKind::Tabular:
            break;
    }
}

/// Pluggable regression model contract: deterministic predictions after fit,
/// bit-identical refits under the same seed and data.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual double predict_one(std::span<const double> x) const = 0;
    virtual std::size_t input_width() const = 0;
    virtual ModelKind kind() const = 0;

    std::vector<double> predict(const Matrix& X) const {
        check_width(X.cols);
        std::vector<double> out(X.rows);
        for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict_one(X.row(i));
        return out;
    }

protected:
    void check_width(std::size_t w) const {
        if (w != input_width())
            fail("predict: feature width ", w, " does not match training width ",
                 input_width());
    }
};

// --- Ridge -------------------------------------------------------------------

namespace detail {

/// Solves A x = b for symmetric positive definite A (in place Cholesky).
inline std::vector<double> solve_spd(Matrix A, std::vector<double> b) {
    const std::size_t n = A.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double d = A.at(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= A.at(j, k) * A.at(j, k);
        if (d <= 1e-12) fail("linear system is singular or indefinite");
        const double l = std::sqrt(d);
        A.at(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= A.at(i, k) * A.at(j, k);
            A.at(i, j) = s / l;
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= A.at(i, k) * b[k];
        b[i] = s / A.at(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= A.at(k, ii) * b[k];
        b[ii] = s / A.at(ii, ii);
    }
    return b;
}

}  // namespace detail

/// Least squares with an L2 penalty on the slopes; unpenalized intercept via
/// centering, solved in closed form.
class RidgeRegressor : public Regressor {
public:
    std::vector<double> coef;
    std::vector<double> feature_means;
    double intercept = 0.0;

    RidgeRegressor() = default;

    RidgeRegressor(const Matrix& X, std::span<const double> y, double l2) {
        const std::size_t n = X.rows, d = X.cols;
        feature_means.assign(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) feature_means[j] += X.at(i, j);
        for (auto& m : feature_means) m /= static_cast<double>(n);
        const double y_mean = mean_of(y);

        Matrix G(d, d);
        std::vector<double> b(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double xj = X.at(i, j) - feature_means[j];
                b[j] += xj * (y[i] - y_mean);
                for (std::size_t k = 0; k <= j; ++k)
                    G.at(j, k) += xj * (X.at(i, k) - feature_means[k]);
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k < j; ++k) G.at(k, j) = G.at(j, k);
            G.at(j, j) += l2;
        }
        coef = detail::solve_spd(std::move(G), std::move(b));
        intercept = y_mean;
    }

    double predict_one(std::span<const double> x) const override {
        check_width(x.size());
        double s = intercept;
        for (std::size_t j = 0; j < coef.size(); ++j)
            s += coef[j] * (x[j] - feature_means[j]);
        return s;
    }
    std::size_t input_width() const override { return coef.size(); }
    ModelKind kind() const override { return ModelKind::Ridge; }
};

// --- Regression trees ----------------------------------------------------------

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict_one(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                        : nd.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

namespace detail {

struct TreeBuilder {
    const Matrix& X;
    std::span<const double> y;
    int max_depth;
    int min_leaf;
    int features_per_split;  // <= 0 means all
    Rng* rng;                // only used when subsampling features
    RegressionTree tree;

    int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
        const std::size_t n = hi - lo;
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            sum += y[idx[i]];
            sum2 += y[idx[i]] * y[idx[i]];
        }
        const double node_mean = sum / static_cast<double>(n);
        const double node_sse = sum2 - sum * sum / static_cast<double>(n);

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{-1, 0.0, node_mean, -1, -1});
        if (depth >= max_depth || n < 2 * static_cast<std::size_t>(min_leaf) ||
            node_sse <= 1e-12)
            return node_id;

        // Split search: variance reduction; best gain wins, ties go to the
        // lowest feature index then the lowest threshold (scan order).
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 1e-12;

        std::vector<int> features;
        const int d = static_cast<int>(X.cols);
        if (features_per_split > 0 && features_per_split < d) {
            features.resize(static_cast<std::size_t>(d));
            std::iota(features.begin(), features.end(), 0);
            for (int i = 0; i < features_per_split; ++i) {
                const auto j = i + static_cast<int>(rng->uniform_int(
                                       static_cast<std::uint64_t>(d - i)));
                std::swap(features[static_cast<std::size_t>(i)],
                          features[static_cast<std::size_t>(j)]);
            }
            features.resize(static_cast<std::size_t>(features_per_split));
            std::sort(features.begin(), features.end());
        } else {
            features.resize(static_cast<std::size_t>(d));
            std::iota(features.begin(), features.end(), 0);
        }

        std::vector<std::size_t> order(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                       idx.begin() + static_cast<std::ptrdiff_t>(hi));
        for (int f : features) {
            const auto fu = static_cast<std::size_t>(f);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = X.at(a, fu), vb = X.at(b, fu);
                if (va != vb) return va < vb;
                return a < b;
            });
            double left_sum = 0.0, left_sum2 = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double v = y[order[i]];
                left_sum += v;
                left_sum2 += v * v;
                const double x_here = X.at(order[i], fu);
                const double x_next = X.at(order[i + 1], fu);
                if (x_here == x_next) continue;
                const std::size_t nl = i + 1, nr = n - nl;
                if (nl < static_cast<std::size_t>(min_leaf) ||
                    nr < static_cast<std::size_t>(min_leaf))
                    continue;
                const double right_sum = sum - left_sum;
                const double right_sum2 = sum2 - left_sum2;
                const double sse_l = left_sum2 - left_sum * left_sum / static_cast<double>(nl);
                const double sse_r = right_sum2 - right_sum * right_sum / static_cast<double>(nr);
                const double gain = node_sse - sse_l - sse_r;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = x_here + 0.5 * (x_next - x_here);
                }
            }
        }
        if (best_feature < 0) return node_id;

        const auto bf = static_cast<std::size_t>(best_feature);
        const auto mid_it = std::stable_partition(
            idx.begin() + static_cast<std::ptrdiff_t>(lo),
            idx.begin() + static_cast<std::ptrdiff_t>(hi),
            [&](std::size_t i) { return X.at(i, bf) <= best_threshold; });
        const std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());

        tree.nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int left = build(idx, lo, mid, depth + 1);
        const int right = build(idx, mid, hi, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

inline RegressionTree fit_tree(const Matrix& X, std::span<const double> y,
                               std::vector<std::size_t> idx, int max_depth,
                               int min_leaf, int features_per_split = 0,
                               Rng* rng = nullptr) {
    TreeBuilder b{X, y, max_depth, min_leaf, features_per_split, rng, {}};
    b.build(idx, 0, idx.size(), 0);
    return std::move(b.tree);
}

}  // namespace detail

/// Gradient-boosted regression trees on squared error: stage-wise residual
/// fitting with shrinkage. Fully deterministic.
class BoostedTreesRegressor : public Regressor {
public:
    double base = 0.0;
    double shrinkage = 0.1;
    std::vector<RegressionTree> trees;
    std::size_t width = 0;
    std::vector<double> train_mse_history;  // after each round

    BoostedTreesRegressor() = default;

    BoostedTreesRegressor(const Matrix& X, std::span<const double> y,
                          const ModelParams& p) {
        width = X.cols;
        shrinkage = p.learning_rate;
        base = mean_of(y);
        const std::size_t n = X.rows;
        std::vector<double> residual(n);
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - base;
        std::vector<std::size_t> idx(n);
        trees.reserve(static_cast<std::size_t>(p.n_rounds));
        train_mse_history.reserve(static_cast<std::size_t>(p.n_rounds));
        for (int r = 0; r < p.n_rounds; ++r) {
            std::iota(idx.begin(), idx.end(), 0u);
            RegressionTree t =
                detail::fit_tree(X, residual, idx, p.max_depth, p.min_samples_leaf);
            double mse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                residual[i] -= shrinkage * t.predict_one(X.row(i));
                mse += residual[i] * residual[i];
            }
            trees.push_back(std::move(t));
            train_mse_history.push_back(mse / static_cast<double>(n));
        }
    }

    double predict_one(std::span<const double> x) const override {
        check_width(x.size());
        double s = base;
        for (const auto& t : trees) s += shrinkage * t.predict_one(x);
        return s;
    }
    std::size_t input_width() const override { return width; }
    ModelKind kind() const override { return ModelKind::BoostedTrees; }
};

/// Bootstrap-aggregated regression trees with per-split feature subsampling.
class BaggedTreesRegressor : public Regressor {
public:
    std::vector<RegressionTree> trees;
    std::size_t width = 0;

    BaggedTreesRegressor() = default;

    BaggedTreesRegressor(const Matrix& X, std::span<const double> y,
                         const ModelParams& p, std::uint64_t seed) {
        width = X.cols;
        const std::size_t n = X.rows;
        int features_per_split = static_cast<int>(
            std::max(1.0, std::floor(p.max_features * static_cast<double>(X.cols))));
        if (features_per_split >= static_cast<int>(X.cols)) features_per_split = 0;
        Rng rng(seed);
        trees.reserve(static_cast<std::size_t>(p.n_trees));
        for (int t = 0; t < p.n_trees; ++t) {
            std::vector<std::size_t> idx(n);
            for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(n));
            std::sort(idx.begin(), idx.end());
            trees.push_back(detail::fit_tree(X, y, std::move(idx), p.max_depth,
                                             p.min_samples_leaf, features_per_split,
                                             &rng));
        }
    }

    double predict_one(std::span<const double> x) const override {
        check_width(x.size());
        double s = 0.0;
        for (const auto& t : trees) s += t.predict_one(x);
        return s / static_cast<double>(trees.size());
    }
    std::size_t input_width() const override { return width; }
    ModelKind kind() const override { return ModelKind::BaggedTrees; }
};

// --- Multilayer perceptron ------------------------------------------------------

/// Fully connected network with tanh hidden units and a linear scalar output,
/// trained by mini-batch gradient descent on mean squared error. Weights are
/// public so training state can be inspected and checked numerically.
struct Mlp {
    std::vector<Matrix> weights;               // [layer](out x in)
    std::vector<std::vector<double>> biases;   // [layer](out)

    std::size_t input_dim() const { return weights.front().cols; }
    std::size_t num_layers() const { return weights.size(); }

    void init(std::size_t input, const std::vector<int>& hidden, Rng& rng) {
        weights.clear();
        biases.clear();
        std::size_t in = input;
        std::vector<std::size_t> outs;
        for (int h : hidden) outs.push_back(static_cast<std::size_t>(h));
        outs.push_back(1);
        for (std::size_t out : outs) {
            Matrix w(out, in);
            const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
            for (auto& v : w.data) v = rng.uniform(-bound, bound);
            weights.push_back(std::move(w));
            biases.emplace_back(out, 0.0);
            in = out;
        }
    }

    void init_zero(std::size_t input, const std::vector<int>& hidden) {
        Rng rng(0);
        init(input, hidden, rng);
        for (auto& w : weights)
            std::fill(w.data.begin(), w.data.end(), 0.0);
    }

    double forward_one(std::span<const double> x) const {
        std::vector<double> a(x.begin(), x.end());
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const Matrix& w = weights[l];
            std::vector<double> z(w.rows);
            for (std::size_t o = 0; o < w.rows; ++o) {
                double s = biases[l][o];
                for (std::size_t i = 0; i < w.cols; ++i) s += w.at(o, i) * a[i];
                z[o] = s;
            }
            if (l + 1 < weights.size())
                for (auto& v : z) v = std::tanh(v);
            a = std::move(z);
        }
        return a[0];
    }

    /// Mean squared error over the batch.
    double loss(const Matrix& X, std::span<const double> y) const {
        double s = 0.0;
        for (std::size_t i = 0; i < X.rows; ++i) {
            const double d = forward_one(X.row(i)) - y[i];
            s += d * d;
        }
        return s / static_cast<double>(X.rows);
    }

    /// Backpropagated gradient of `loss` w.r.t. all weights and biases.
    void loss_gradient(const Matrix& X, std::span<const double> y,
                       std::vector<Matrix>* gw,
                       std::vector<std::vector<double>>* gb) const {
        gw->clear();
        gb->clear();
        for (std::size_t l = 0; l < weights.size(); ++l) {
            gw->emplace_back(weights[l].rows, weights[l].cols);
            gb->emplace_back(biases[l].size(), 0.0);
        }
        const double inv_n = 1.0 / static_cast<double>(X.rows);
        std::vector<std::vector<double>> acts(weights.size() + 1);
        for (std::size_t s = 0; s < X.rows; ++s) {
            auto xrow = X.row(s);
            acts[0].assign(xrow.begin(), xrow.end());
            for (std::size_t l = 0; l < weights.size(); ++l) {
                const Matrix& w = weights[l];
                acts[l + 1].assign(w.rows, 0.0);
                for (std::size_t o = 0; o < w.rows; ++o) {
                    double z = biases[l][o];
                    for (std::size_t i = 0; i < w.cols; ++i) z += w.at(o, i) * acts[l][i];
                    acts[l + 1][o] = l + 1 < weights.size() ? std::tanh(z) : z;
                }
            }
            std::vector<double> delta{2.0 * inv_n * (acts.back()[0] - y[s])};
            for (std::size_t li = weights.size(); li-- > 0;) {
                const Matrix& w = weights[li];
                for (std::size_t o = 0; o < w.rows; ++o) {
                    (*gb)[li][o] += delta[o];
                    for (std::size_t i = 0; i < w.cols; ++i)
                        (*gw)[li].at(o, i) += delta[o] * acts[li][i];
                }
                if (li == 0) break;
                std::vector<double> prev(w.cols, 0.0);
                for (std::size_t i = 0; i < w.cols; ++i) {
                    double s2 = 0.0;
                    for (std::size_t o = 0; o < w.rows; ++o) s2 += w.at(o, i) * delta[o];
                    // activation at layer li is tanh(z); derivative = 1 - a^2
                    prev[i] = s2 * (1.0 - acts[li][i] * acts[li][i]);
                }
                delta = std::move(prev);
            }
        }
    }

    std::vector<double> flatten_params() const {
        std::vector<double> out;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            out.insert(out.end(), weights[l].data.begin(), weights[l].data.end());
            out.insert(out.end(), biases[l].begin(), biases[l].end());
        }
        return out;
    }

    void set_params(std::span<const double> flat) {
        std::size_t pos = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (auto& v : weights[l].data) v = flat[pos++];
            for (auto& v : biases[l]) v = flat[pos++];
        }
    }

    void train(const Matrix& X, std::span<const double> y, double lr, int epochs,
               int batch_size, Rng& rng) {
        const std::size_t n = X.rows;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n);
        std::vector<Matrix> gw;
        std::vector<std::vector<double>> gb;
        for (int e = 0; e < epochs; ++e) {
            rng.shuffle(order);
            for (std::size_t start = 0; start < n; start += bs) {
                const std::size_t stop = std::min(start + bs, n);
                Matrix xb(stop - start, X.cols);
                std::vector<double> yb(stop - start);
                for (std::size_t i = start; i < stop; ++i) {
                    auto r = X.row(order[i]);
                    std::copy(r.begin(), r.end(), xb.row(i - start).begin());
                    yb[i - start] = y[order[i]];
                }
                loss_gradient(xb, yb, &gw, &gb);
                for (std::size_t l = 0; l < weights.size(); ++l) {
                    for (std::size_t i = 0; i < weights[l].data.size(); ++i)
                        weights[l].data[i] -= lr * gw[l].data[i];
                    for (std::size_t i = 0; i < biases[l].size(); ++i)
                        biases[l][i] -= lr * gb[l][i];
                }
            }
        }
    }
};

class MlpRegressor : public Regressor {
public:
    Mlp net;

    MlpRegressor() = default;

    MlpRegressor(const Matrix& X, std::span<const double> y, const ModelParams& p,
                 std::uint64_t seed) {
        Rng rng(seed);
        net.init(X.cols, p.hidden, rng);
        net.train(X, y, p.mlp_learning_rate, p.epochs, p.batch_size, rng);
    }

    double predict_one(std::span<const double> x) const override {
        check_width(x.size());
        return net.forward_one(x);
    }
    std::size_t input_width() const override { return net.input_dim(); }
    ModelKind kind() const override { return ModelKind::Mlp; }
};

/// Compares backpropagation against central finite differences at the seeded
/// initial weights. Returns the maximum relative error over all parameters.
inline double grad_check(const ModelParams& params, const Matrix& X,
                         std::span<const double> y, std::uint64_t seed,
                         double step = 1e-5) {
    Mlp net;
    Rng rng(seed);
    net.init(X.cols, params.hidden, rng);
    std::vector<Matrix> gw;
    std::vector<std::vector<double>> gb;
    net.loss_gradient(X, y, &gw, &gb);
    std::vector<double> analytic;
    for (std::size_t l = 0; l < gw.size(); ++l) {
        analytic.insert(analytic.end(), gw[l].data.begin(), gw[l].data.end());
        analytic.insert(analytic.end(), gb[l].begin(), gb[l].end());
    }
    std::vector<double> flat = net.flatten_params();
    double max_rel = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double keep = flat[i];
        flat[i] = keep + step;
        net.set_params(flat);
        const double up = net.loss(X, y);
        flat[i] = keep - step;
        net.set_params(flat);
        const double down = net.loss(X, y);
        flat[i] = keep;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
    }
    net.set_params(flat);
    return max_rel;
}

// --- Tabular ---------------------------------------------------------------------

/// Group-by-mean model keyed on the exact feature vector. On discrete inputs
/// with full support this realizes the conditional sample mean, which makes it
/// the saturated oracle model for the dynamic-programming checks.
class TabularRegressor : public Regressor {
public:
    struct VecHash {
        std::size_t operator()(const std::vector<double>& v) const {
            std::uint64_t h = 0x9e3779b97f4a7c15ULL;
            for (double d : v) {
                std::uint64_t bits;
                static_assert(sizeof(bits) == sizeof(d));
                std::memcpy(&bits, &d, sizeof(bits));
                h = mix64(h ^ bits);
            }
            return static_cast<std::size_t>(h);
        }
    };

    std::unordered_map<std::vector<double>, std::pair<double, int>, VecHash> cells;
    double global_mean = 0.0;
    std::size_t width = 0;

    TabularRegressor() = default;

    TabularRegressor(const Matrix& X, std::span<const double> y) {
        width = X.cols;
        for (std::size_t i = 0; i < X.rows; ++i) {
            auto r = X.row(i);
            auto& cell = cells[std::vector<double>(r.begin(), r.end())];
            cell.first += y[i];
            cell.second += 1;
        }
        global_mean = mean_of(y);
    }

    double predict_one(std::span<const double> x) const override {
        check_width(x.size());
        const auto it = cells.find(std::vector<double>(x.begin(), x.end()));
        if (it == cells.end()) return global_mean;
        return it->second.first / it->second.second;
    }
    std::size_t input_width() const override { return width; }
    ModelKind kind() const override { return ModelKind::Tabular; }
};

// --- Factory ----------------------------------------------------------------------

inline std::unique_ptr<Regressor> fit_regressor(const ModelSpec& spec, const Matrix& X,
                                                std::span<const double> y,
                                                std::uint64_t seed) {
    if (X.rows == 0 || y.empty()) fail("fit: empty training data");
    if (X.rows != y.size())
        fail("fit: ", X.rows, " rows but ", y.size(), " targets");
    if (!X.all_finite()) fail("fit: non-finite feature value");
    for (double v : y)
        if (!std::isfinite(v)) fail("fit: non-finite target value");
    validate_model_spec(spec);

    switch (spec.kind) {
        case ModelKind::Ridge:
            return std::make_unique<RidgeRegressor>(X, y, spec.params.l2);
        case ModelKind::BoostedTrees:
            return std::make_unique<BoostedTreesRegressor>(X, y, spec.params);
        case ModelKind::BaggedTrees:
            return std::make_unique<BaggedTreesRegressor>(X, y, spec.params, seed);
        case ModelKind::Mlp:
            return std::make_unique<MlpRegressor>(X, y, spec.params, seed);
        case ModelKind::Tabular:
            return std::make_unique<TabularRegressor>(X, y);
    }
    fail("unreachable model kind");
}

}  // namespace scope
