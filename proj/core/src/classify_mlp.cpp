#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hemisym/classify.hpp"

namespace hemisym {

namespace {

constexpr std::array<int, 5> kLayerSizes{kNumFeatures, 50, 50, 50, 1};

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Activations {
    // a[0] is the input; a[l] the post-activation output of layer l.
    std::vector<std::vector<double>> a;
};

double forward(const MlpModel& m, const FeatureArray& x, Activations* acts) {
    const int layers = static_cast<int>(m.layer_sizes.size()) - 1;
    std::vector<double> cur(x.begin(), x.end());
    if (acts) acts->a.assign(1, cur);
    for (int l = 0; l < layers; ++l) {
        const int in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        std::vector<double> next(out);
        for (int o = 0; o < out; ++o) {
            double z = m.biases[l][o];
            const double* wrow = &m.weights[l][static_cast<size_t>(o) * in];
            for (int i = 0; i < in; ++i) z += wrow[i] * cur[i];
            next[o] = l + 1 < layers ? std::max(0.0, z) : z; // ReLU hidden, linear output
        }
        cur = std::move(next);
        if (acts) acts->a.push_back(cur);
    }
    return cur[0]; // logit
}

} // namespace

double MlpModel::logit(const FeatureArray& x) const { return forward(*this, x, nullptr); }
double MlpModel::score(const FeatureArray& x) const { return sigmoid(logit(x)); }

MlpModel make_mlp(std::uint64_t seed) {
    MlpModel m;
    m.layer_sizes.assign(kLayerSizes.begin(), kLayerSizes.end());
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        std::normal_distribution<double> init(0.0, std::sqrt(2.0 / in)); // He init for ReLU
        std::vector<double> w(static_cast<size_t>(in) * out);
        for (double& v : w) v = init(rng);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    return m;
}

double mlp_loss_and_gradient(const MlpModel& model,
                             const std::vector<FeatureArray>& xs,
                             const std::vector<int>& ys,
                             MlpModel* grad) {
    if (xs.empty() || xs.size() != ys.size())
        throw InputError("mlp_loss_and_gradient: bad batch");
    const int layers = static_cast<int>(model.layer_sizes.size()) - 1;
    if (grad) {
        grad->layer_sizes = model.layer_sizes;
        grad->weights.assign(layers, {});
        grad->biases.assign(layers, {});
        for (int l = 0; l < layers; ++l) {
            grad->weights[l].assign(model.weights[l].size(), 0.0);
            grad->biases[l].assign(model.biases[l].size(), 0.0);
        }
    }

    const double inv_n = 1.0 / xs.size();
    double loss = 0.0;
    Activations acts;
    for (std::size_t r = 0; r < xs.size(); ++r) {
        const double z = forward(model, xs[r], grad ? &acts : nullptr);
        const double y = ys[r];
        loss += softplus(z) - y * z; // binary cross-entropy on the logit
        if (!grad) continue;

        // Backprop; delta starts at dL/dz = sigmoid(z) - y.
        std::vector<double> delta{(sigmoid(z) - y) * inv_n};
        for (int l = layers - 1; l >= 0; --l) {
            const int in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
            const std::vector<double>& a_in = acts.a[l];
            for (int o = 0; o < out; ++o) {
                grad->biases[l][o] += delta[o];
                double* grow = &grad->weights[l][static_cast<size_t>(o) * in];
                for (int i = 0; i < in; ++i) grow[i] += delta[o] * a_in[i];
            }
            if (l == 0) break;
            std::vector<double> prev(in, 0.0);
            for (int o = 0; o < out; ++o) {
                const double* wrow = &model.weights[l][static_cast<size_t>(o) * in];
                for (int i = 0; i < in; ++i) prev[i] += wrow[i] * delta[o];
            }
            for (int i = 0; i < in; ++i)
                if (acts.a[l][i] <= 0.0) prev[i] = 0.0; // ReLU mask
            delta = std::move(prev);
        }
    }
    return loss * inv_n;
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    long t = 0;

    explicit AdamState(const MlpModel& m) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            mw.emplace_back(m.weights[l].size(), 0.0);
            vw.emplace_back(m.weights[l].size(), 0.0);
            mb.emplace_back(m.biases[l].size(), 0.0);
            vb.emplace_back(m.biases[l].size(), 0.0);
        }
    }

    void step(MlpModel& m, const MlpModel& g, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            auto update = [&](std::vector<double>& p, const std::vector<double>& gr,
                              std::vector<double>& mm, std::vector<double>& vv) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    mm[i] = b1 * mm[i] + (1.0 - b1) * gr[i];
                    vv[i] = b2 * vv[i] + (1.0 - b2) * gr[i] * gr[i];
                    p[i] -= lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
                }
            };
            update(m.weights[l], g.weights[l], mw[l], vw[l]);
            update(m.biases[l], g.biases[l], mb[l], vb[l]);
        }
    }
};

} // namespace

MlpModel train_mlp(const Dataset& data, std::uint64_t seed, const MlpConfig& config) {
    data.validate_for_training();
    const std::size_t n = data.size();

    std::mt19937_64 rng(seed);
    MlpModel model = make_mlp(rng());

    // Validation split for early stopping. Keep both classes in the
    // training part by swapping a held-out row in when needed.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = std::min(n - 2, static_cast<std::size_t>(
                                            std::lround(config.val_fraction * n)));
    std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train(order.begin() + n_val, order.end());
    for (int cls = 0; cls <= 1; ++cls) {
        const bool present = std::any_of(train.begin(), train.end(),
                                         [&](std::size_t i) { return data.labels[i] == cls; });
        if (!present)
            for (std::size_t v = 0; v < val.size(); ++v)
                if (data.labels[val[v]] == cls) {
                    train.push_back(val[v]);
                    val.erase(val.begin() + v);
                    break;
                }
    }

    const auto gather = [&](const std::vector<std::size_t>& idx,
                            std::vector<FeatureArray>& xs, std::vector<int>& ys) {
        xs.clear();
        ys.clear();
        for (std::size_t i : idx) {
            xs.push_back(data.features[i]);
            ys.push_back(data.labels[i]);
        }
    };

    std::vector<FeatureArray> val_x;
    std::vector<int> val_y;
    gather(val, val_x, val_y);

    AdamState adam(model);
    MlpModel grad;
    MlpModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    int stale = 0;

    std::vector<FeatureArray> batch_x;
    std::vector<int> batch_y;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t start = 0; start < train.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(train.size(),
                                              start + static_cast<std::size_t>(config.batch_size));
            std::vector<std::size_t> idx(train.begin() + start, train.begin() + stop);
            gather(idx, batch_x, batch_y);
            mlp_loss_and_gradient(model, batch_x, batch_y, &grad);
            adam.step(model, grad, config.learning_rate);
        }

        const double val_loss = val_x.empty()
                                    ? mlp_loss_and_gradient(model, batch_x, batch_y, nullptr)
                                    : mlp_loss_and_gradient(model, val_x, val_y, nullptr);
        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            best = model;
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    return best;
}

} // namespace hemisym
