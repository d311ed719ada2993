#pragma once

#include <map>
#include <string>
#include <vector>

#include "hemisym/classify.hpp"

namespace hemisym {

// --- Folds ------------------------------------------------------------------

struct FoldPlan {
    int k = 5;
    std::vector<int> assignments; // per-row fold index in [0, k)
    std::uint64_t seed = 0;
    bool stratified = true;
};

/// Stratified shuffled fold assignment: per-class counts per fold differ by
/// at most 1 from proportional, total fold sizes differ by at most 1.
FoldPlan make_folds(const Dataset& data, int k, std::uint64_t seed);

// --- Classification metrics --------------------------------------------------

struct Confusion {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

/// Metrics on the positive (asymmetric) class. Undefined values (for example
/// recall with no positive examples) are explicit nullopt, never silently 0.
struct MetricsRecord {
    Confusion confusion;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> auc; // rank / Mann-Whitney formulation, ties count 1/2
};

struct LabeledScore {
    int label = 0;
    double score = 0.0;
};

MetricsRecord classification_metrics(const std::vector<LabeledScore>& predictions,
                                     const std::vector<int>& truths);

// --- Segmentation reporting ---------------------------------------------------

struct SegPairResult {
    std::string id;
    std::string condition;
    double iou_left = 0.0;
    double iou_right = 0.0;
    double mean() const { return 0.5 * (iou_left + iou_right); }
};

struct SegReport {
    double mean_iou = 0.0; // over both sides of all pairs
    std::map<std::string, double> per_condition;
    std::vector<SegPairResult> pairs;
};

/// Mean IoU of predicted vs. truth hemithoraces, with a per-condition
/// breakdown keyed by caller-supplied tags (empty tags allowed).
SegReport segmentation_iou_report(const std::vector<HemithoraxPair>& predicted,
                                  const std::vector<HemithoraxPair>& truth,
                                  const std::vector<std::string>& conditions = {},
                                  const std::vector<std::string>& ids = {});

// --- Dataset manifest ---------------------------------------------------------

struct ManifestRow {
    std::string id;
    std::filesystem::path image;
    std::filesystem::path ribs_mask;
    std::filesystem::path spine_mask;
    std::filesystem::path left_mask;  // ground-truth hemithoraces
    std::filesystem::path right_mask;
    std::optional<int> label;
};

/// JSON array of rows {id, image, ribs_mask, spine_mask, left_mask,
/// right_mask, label}; paths are resolved relative to the manifest location.
std::vector<ManifestRow> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

// --- Robustness experiment ------------------------------------------------------

enum class Condition { Normal, Under, Over, Obscured };

Condition condition_from_string(const std::string& s);
std::string to_string(Condition c);

/// Corrupt a radiograph per the condition: gamma drawn uniformly from
/// [0.2,0.5] (under) or [2,5] (over) followed by Gaussian noise with sigma
/// uniform in [0,10] on the 8-bit scale; obscured paints a bright ellipse
/// occluder (axis divisors uniform in [2,4]) derived from the thorax fit of
/// the true ribs. Normal returns the image unchanged.
GrayImage apply_condition(const GrayImage& img, Condition condition, std::uint64_t seed,
                          const BinaryMask* true_ribs, const SnakeParams& params);

struct RobustnessReport {
    Condition condition = Condition::Normal;
    SegReport seg;
    std::map<std::string, double> runtime_stats; // milliseconds per stage
    std::string to_json_text() const;
};

/// Apply the condition's corruption to each manifest image, recover the rib
/// mask from the corrupted radiograph with the rendering-matched bone
/// segmenter, run the one-snake pipeline, and report hemithorax IoU vs. the
/// manifest ground truth.
RobustnessReport run_robustness_experiment(const std::vector<ManifestRow>& manifest,
                                           Condition condition, const SnakeParams& params,
                                           std::uint64_t seed, int workers = 1);

// --- Cross-validation ------------------------------------------------------------

struct CvRowRecord {
    std::string id;
    int fold = 0;
    int truth = 0;
    Prediction ensemble;
    std::array<LabeledScore, 3> members; // svm, mlp, gbc
};

struct ModelMetrics {
    MetricsRecord svm, mlp, gbc, ensemble;
};

struct EvalReport {
    std::vector<ModelMetrics> per_fold;
    ModelMetrics overall_pooled;
    ModelMetrics overall_averaged; // mean of per-fold metric values
    Confusion confusion;           // ensemble, pooled over folds
    std::map<std::string, double> runtime_stats;
    std::vector<CvRowRecord> rows;

    std::string to_json_text() const;
};

/// Per fold: train the ensemble on the other folds, predict the held-out
/// rows; reports per-fold and overall metrics for each member model and the
/// ensemble.
EvalReport run_cv(const Dataset& data, const FoldPlan& folds, const EnsembleConfig& config,
                  std::uint64_t seed);

// --- Hyperparameter grid search ------------------------------------------------

struct ParamGrid {
    std::vector<double> svm_c{0.1};
    std::vector<double> svm_gamma{0.01};
    std::vector<int> gbc_n_estimators{100};
    std::vector<int> gbc_max_depth{3};
    std::vector<double> gbc_learning_rate{0.1};
    std::vector<double> mlp_learning_rate{1e-3};
};

/// Exhaustive search over the grid, scored by pooled ensemble F1 under
/// k-fold cross-validation; ties keep the earliest candidate.
EnsembleConfig grid_search(const Dataset& data, const ParamGrid& grid, int k,
                           std::uint64_t seed);

} // namespace hemisym
