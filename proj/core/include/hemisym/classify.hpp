#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hemisym/features.hpp"

namespace hemisym {

constexpr int kNumFeatures = 7;
using FeatureArray = std::array<double, kNumFeatures>;

/// Labeled feature rows. Label 1 = asymmetric (the positive class).
struct Dataset {
    std::vector<FeatureArray> features;
    std::vector<int> labels;
    std::vector<std::string> ids;

    std::size_t size() const { return features.size(); }
    void add(std::string id, const FeatureArray& x, int label);
    /// Throws unless both classes are present and all entries are finite
    /// and within [0,1].
    void validate_for_training() const;
    static Dataset from_rows(const std::vector<FeatureRow>& rows);
};

// --- Support vector machine (RBF kernel, trained with SMO) ----------------

struct SvmModel {
    double c = 0.1;
    double gamma = 0.01;
    double bias = 0.0;
    std::vector<FeatureArray> support_vectors;
    std::vector<double> dual_coef; // alpha_i * y_i

    /// Decision value d(x) = sum_i dual_coef_i k(sv_i, x) + bias.
    double decision(const FeatureArray& x) const;
    double score(const FeatureArray& x) const;  // logistic(decision)
    int predict_label(const FeatureArray& x) const { return decision(x) >= 0.0 ? 1 : 0; }
};

SvmModel train_svm(const Dataset& data, double c, double gamma, double tol = 1e-4);

// --- Multi-layer perceptron (7 -> 50 -> 50 -> 50 -> 1) ---------------------

struct MlpConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 500;
    int patience = 20;
    double val_fraction = 0.1;
};

struct MlpModel {
    std::vector<int> layer_sizes;                 // {7, 50, 50, 50, 1}
    std::vector<std::vector<double>> weights;     // weights[l]: out x in, row-major
    std::vector<std::vector<double>> biases;

    /// Pre-sigmoid output (logit).
    double logit(const FeatureArray& x) const;
    double score(const FeatureArray& x) const;    // sigmoid(logit)
    int predict_label(const FeatureArray& x) const { return score(x) >= 0.5 ? 1 : 0; }
};

MlpModel make_mlp(std::uint64_t seed);

/// Mean binary cross-entropy over the rows, with the analytic gradient
/// accumulated into grad (same shapes as the model) when non-null.
double mlp_loss_and_gradient(const MlpModel& model,
                             const std::vector<FeatureArray>& xs,
                             const std::vector<int>& ys,
                             MlpModel* grad);

MlpModel train_mlp(const Dataset& data, std::uint64_t seed, const MlpConfig& config = {});

// --- Gradient-boosted trees (log-loss, Newton leaf values) ----------------

struct GbcNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;     // leaf value
};

struct GbcTree {
    std::vector<GbcNode> nodes; // nodes[0] is the root
    double eval(const FeatureArray& x) const;
};

struct GbcModel {
    double init_log_odds = 0.0;
    double learning_rate = 0.1;
    std::vector<GbcTree> trees;

    double raw_score(const FeatureArray& x) const;
    double score(const FeatureArray& x) const;    // logistic(raw)
    int predict_label(const FeatureArray& x) const { return score(x) >= 0.5 ? 1 : 0; }
};

/// Stagewise boosting on log-loss; each stage fits a regression tree to the
/// residuals with exact greedy splits (min 2 samples per leaf) and sets leaf
/// values by one Newton step. staged_loss, when non-null, receives the mean
/// training log-loss after every stage.
GbcModel train_gbc(const Dataset& data, int n_estimators, int max_depth,
                   double learning_rate, std::vector<double>* staged_loss = nullptr);

// --- Ensemble ---------------------------------------------------------------

struct EnsembleConfig {
    double svm_c = 0.1;
    double svm_gamma = 0.01;
    int gbc_n_estimators = 100;
    int gbc_max_depth = 3;
    double gbc_learning_rate = 0.1;
    MlpConfig mlp;

    /// Strict JSON parse with sections {svm, mlp, gbc}; unknown keys rejected.
    static EnsembleConfig from_json_text(const std::string& text);
    static EnsembleConfig from_json_file(const std::filesystem::path& path);
    std::string to_json_text() const;
};

struct TrainedEnsemble {
    SvmModel svm;
    MlpModel mlp;
    GbcModel gbc;
    EnsembleConfig config;
    std::uint64_t seed = 0;
};

TrainedEnsemble train_ensemble(const Dataset& data, const EnsembleConfig& config,
                               std::uint64_t seed);

struct Prediction {
    int label = 0;               // majority of votes; 1 = asymmetric
    std::array<int, 3> votes{};  // svm, mlp, gbc hard labels
    double score = 0.0;          // mean of the three calibrated scores
};

/// Majority of three binary votes.
int majority_label(const std::array<int, 3>& votes);

/// Degenerate feature vectors short-circuit to asymmetric with score 1.
Prediction predict(const TrainedEnsemble& model, const FeatureVector& fv);

void save_ensemble(const TrainedEnsemble& model, const std::filesystem::path& path);
TrainedEnsemble load_ensemble(const std::filesystem::path& path);

} // namespace hemisym
