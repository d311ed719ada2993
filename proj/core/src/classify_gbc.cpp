#include <algorithm>
#include <cmath>
#include <numeric>

#include "hemisym/classify.hpp"

namespace hemisym {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

constexpr int kMinLeaf = 2;
constexpr double kMaxLeafValue = 10.0;

struct TreeBuilder {
    const std::vector<FeatureArray>& xs;
    const std::vector<double>& residual;
    const std::vector<double>& hessian;
    int max_depth;
    GbcTree tree;

    int build(std::vector<int> idx, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        double sum_r = 0.0, sum_h = 0.0;
        for (int i : idx) {
            sum_r += residual[i];
            sum_h += hessian[i];
        }

        int best_feature = -1;
        double best_threshold = 0.0, best_gain = 0.0;
        if (depth < max_depth && static_cast<int>(idx.size()) >= 2 * kMinLeaf) {
            // Exact greedy split: squared-error reduction on the residuals,
            // thresholds at midpoints between distinct consecutive values.
            const double parent_score = sum_r * sum_r / idx.size();
            for (int f = 0; f < kNumFeatures; ++f) {
                std::sort(idx.begin(), idx.end(), [&](int a, int b) {
                    if (xs[a][f] != xs[b][f]) return xs[a][f] < xs[b][f];
                    return a < b;
                });
                double left_r = 0.0;
                for (std::size_t pos = 0; pos + 1 < idx.size(); ++pos) {
                    left_r += residual[idx[pos]];
                    if (xs[idx[pos]][f] == xs[idx[pos + 1]][f]) continue;
                    const std::size_t nl = pos + 1, nr = idx.size() - nl;
                    if (nl < kMinLeaf || nr < kMinLeaf) continue;
                    const double right_r = sum_r - left_r;
                    const double gain =
                        left_r * left_r / nl + right_r * right_r / nr - parent_score;
                    if (gain > best_gain + 1e-15) {
                        best_gain = gain;
                        best_feature = f;
                        best_threshold = 0.5 * (xs[idx[pos]][f] + xs[idx[pos + 1]][f]);
                    }
                }
            }
        }

        if (best_feature < 0) {
            GbcNode& leaf = tree.nodes[node_id];
            leaf.feature = -1;
            leaf.value = std::clamp(sum_r / (sum_h + 1e-12), -kMaxLeafValue, kMaxLeafValue);
            return node_id;
        }

        std::vector<int> left_idx, right_idx;
        for (int i : idx) {
            if (xs[i][best_feature] <= best_threshold) left_idx.push_back(i);
            else right_idx.push_back(i);
        }
        const int left_id = build(std::move(left_idx), depth + 1);
        const int right_id = build(std::move(right_idx), depth + 1);
        GbcNode& node = tree.nodes[node_id];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }
};

} // namespace

double GbcTree::eval(const FeatureArray& x) const {
    int node = 0;
    while (nodes[node].feature >= 0)
        node = x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                               : nodes[node].right;
    return nodes[node].value;
}

double GbcModel::raw_score(const FeatureArray& x) const {
    double f = init_log_odds;
    for (const GbcTree& t : trees) f += learning_rate * t.eval(x);
    return f;
}

double GbcModel::score(const FeatureArray& x) const { return sigmoid(raw_score(x)); }

GbcModel train_gbc(const Dataset& data, int n_estimators, int max_depth,
                   double learning_rate, std::vector<double>* staged_loss) {
    data.validate_for_training();
    if (n_estimators < 1) throw InputError("train_gbc: n_estimators must be at least 1");
    if (max_depth < 1) throw InputError("train_gbc: max_depth must be at least 1");
    if (learning_rate < 0.0) throw InputError("train_gbc: learning rate must be non-negative");

    const std::size_t n = data.size();
    const double positive = static_cast<double>(
        std::count(data.labels.begin(), data.labels.end(), 1));
    const double prior = positive / n;

    GbcModel model;
    model.learning_rate = learning_rate;
    model.init_log_odds = std::log(prior / (1.0 - prior));

    std::vector<double> f(n, model.init_log_odds);
    std::vector<double> residual(n), hessian(n);
    if (staged_loss) staged_loss->clear();

    for (int stage = 0; stage < n_estimators; ++stage) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(f[i]);
            residual[i] = data.labels[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        TreeBuilder builder{data.features, residual, hessian, max_depth, {}};
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        builder.build(std::move(all), 0);
        model.trees.push_back(std::move(builder.tree));

        for (std::size_t i = 0; i < n; ++i)
            f[i] += learning_rate * model.trees.back().eval(data.features[i]);

        if (staged_loss) {
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                loss += softplus(f[i]) - data.labels[i] * f[i];
            staged_loss->push_back(loss / n);
        }
    }
    return model;
}

} // namespace hemisym
