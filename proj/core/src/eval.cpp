#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "hemisym/eval.hpp"
#include "hemisym/phantom.hpp"

namespace hemisym {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic parallel map over [0, n): results land in indexed slots.
template <typename Fn>
void parallel_rows(std::size_t n, int workers, Fn&& fn) {
    workers = std::max(1, workers);
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

FoldPlan make_folds(const Dataset& data, int k, std::uint64_t seed) {
    if (k < 2) throw InputError("make_folds: k must be at least 2");
    data.validate_for_training();

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
    for (int cls = 0; cls <= 1; ++cls)
        if (static_cast<int>(by_class[cls].size()) < k)
            throw InputError("make_folds: class " + std::to_string(cls) +
                             " has fewer rows than k");

    std::mt19937_64 rng(seed);
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.stratified = true;
    plan.assignments.assign(data.size(), -1);

    std::vector<std::size_t> load(k, 0);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t>& rows = by_class[cls];
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t base = rows.size() / k;
        const int rem = static_cast<int>(rows.size() % k);

        // Give the remainder rows to the currently lightest folds so total
        // fold sizes stay within one of each other.
        std::vector<int> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return load[a] < load[b]; });
        std::vector<std::size_t> quota(k, base);
        for (int r = 0; r < rem; ++r) ++quota[order[r]];

        std::size_t pos = 0;
        for (int f = 0; f < k; ++f) {
            for (std::size_t j = 0; j < quota[f]; ++j)
                plan.assignments[rows[pos++]] = f;
            load[f] += quota[f];
        }
    }
    return plan;
}

MetricsRecord classification_metrics(const std::vector<LabeledScore>& predictions,
                                     const std::vector<int>& truths) {
    if (predictions.size() != truths.size() || predictions.empty())
        throw InputError("classification_metrics: size mismatch or empty input");

    MetricsRecord m;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool pred = predictions[i].label == 1;
        const bool truth = truths[i] == 1;
        if (pred && truth) ++m.confusion.tp;
        else if (pred && !truth) ++m.confusion.fp;
        else if (!pred && truth) ++m.confusion.fn;
        else ++m.confusion.tn;
    }
    const Confusion& c = m.confusion;
    if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);

    // AUC via average ranks so ties count one half.
    const long n_pos = c.tp + c.fn;
    const long n_neg = c.fp + c.tn;
    if (n_pos > 0 && n_neg > 0) {
        std::vector<std::size_t> order(predictions.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return predictions[a].score < predictions[b].score;
        });
        std::vector<double> rank(predictions.size());
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() &&
                   predictions[order[j + 1]].score == predictions[order[i]].score)
                ++j;
            const double avg = 0.5 * (i + j) + 1.0; // 1-based average rank
            for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
            i = j + 1;
        }
        double rank_sum_pos = 0.0;
        for (std::size_t r = 0; r < truths.size(); ++r)
            if (truths[r] == 1) rank_sum_pos += rank[r];
        m.auc = (rank_sum_pos - 0.5 * n_pos * (n_pos + 1.0)) /
                (static_cast<double>(n_pos) * n_neg);
    }
    return m;
}

SegReport segmentation_iou_report(const std::vector<HemithoraxPair>& predicted,
                                  const std::vector<HemithoraxPair>& truth,
                                  const std::vector<std::string>& conditions,
                                  const std::vector<std::string>& ids) {
    if (predicted.size() != truth.size())
        throw InputError("segmentation_iou_report: length mismatch");
    if (!conditions.empty() && conditions.size() != predicted.size())
        throw InputError("segmentation_iou_report: condition tag length mismatch");

    SegReport report;
    std::map<std::string, std::pair<double, std::size_t>> per_condition;
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        SegPairResult r;
        r.id = i < ids.size() ? ids[i] : std::to_string(i);
        r.condition = conditions.empty() ? std::string{} : conditions[i];
        r.iou_left = mask_iou(predicted[i].left, truth[i].left);
        r.iou_right = mask_iou(predicted[i].right, truth[i].right);
        acc += r.mean();
        auto& [sum, count] = per_condition[r.condition];
        sum += r.mean();
        ++count;
        report.pairs.push_back(std::move(r));
    }
    report.mean_iou = predicted.empty() ? 0.0 : acc / predicted.size();
    for (const auto& [tag, agg] : per_condition)
        report.per_condition[tag] = agg.first / agg.second;
    return report;
}

// --- Manifest ----------------------------------------------------------------

std::vector<ManifestRow> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("manifest: invalid JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw InputError("manifest: expected a JSON array");

    const std::filesystem::path base = path.parent_path();
    std::vector<ManifestRow> rows;
    for (const json& rj : j) {
        ManifestRow r;
        try {
            r.id = rj.at("id").get<std::string>();
            r.image = base / rj.at("image").get<std::string>();
            r.ribs_mask = base / rj.at("ribs_mask").get<std::string>();
            r.spine_mask = base / rj.at("spine_mask").get<std::string>();
            r.left_mask = base / rj.at("left_mask").get<std::string>();
            r.right_mask = base / rj.at("right_mask").get<std::string>();
            if (rj.contains("label") && !rj.at("label").is_null())
                r.label = rj.at("label").get<int>();
        } catch (const json::exception& e) {
            throw InputError("manifest: malformed row in " + path.string() + ": " + e.what());
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    json j = json::array();
    const std::filesystem::path base = path.parent_path();
    const auto rel = [&](const std::filesystem::path& p) {
        return p.lexically_proximate(base).generic_string();
    };
    for (const ManifestRow& r : rows) {
        json rj{{"id", r.id},
                {"image", rel(r.image)},
                {"ribs_mask", rel(r.ribs_mask)},
                {"spine_mask", rel(r.spine_mask)},
                {"left_mask", rel(r.left_mask)},
                {"right_mask", rel(r.right_mask)}};
        if (r.label) rj["label"] = *r.label;
        else rj["label"] = nullptr;
        j.push_back(std::move(rj));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open manifest for writing: " + path.string());
    out << j.dump(2) << "\n";
}

// --- Robustness ----------------------------------------------------------------

Condition condition_from_string(const std::string& s) {
    if (s == "normal") return Condition::Normal;
    if (s == "under") return Condition::Under;
    if (s == "over") return Condition::Over;
    if (s == "obscured") return Condition::Obscured;
    throw InputError("unknown condition '" + s +
                     "' (expected normal, under, over, or obscured)");
}

std::string to_string(Condition c) {
    switch (c) {
        case Condition::Normal: return "normal";
        case Condition::Under: return "under";
        case Condition::Over: return "over";
        case Condition::Obscured: return "obscured";
    }
    return "normal";
}

GrayImage apply_condition(const GrayImage& img, Condition condition, std::uint64_t seed,
                          const BinaryMask* true_ribs, const SnakeParams& params) {
    std::mt19937_64 rng(seed);
    switch (condition) {
        case Condition::Normal:
            return img;
        case Condition::Under:
        case Condition::Over: {
            std::uniform_real_distribution<double> gamma_range(
                condition == Condition::Under ? 0.2 : 2.0,
                condition == Condition::Under ? 0.5 : 5.0);
            std::uniform_real_distribution<double> sigma_range(0.0, 10.0);
            const double gamma = gamma_range(rng);
            const double sigma = sigma_range(rng);
            return add_gaussian_noise(gamma_transform(img, gamma), sigma, rng());
        }
        case Condition::Obscured: {
            if (!true_ribs)
                throw InputError("obscured condition requires the true rib mask");
            // The occluder shape comes from the thorax of the uncorrupted
            // ribs: contour fit, then a moment-matched ellipse.
            const EnergyField field = external_energy_field(*true_ribs, params);
            const Contour init = init_rectangle(*true_ribs, 10.0, params.n_vertices);
            const SnakeResult res = evolve(init, field, params);
            const BinaryMask thorax =
                contour_to_mask(res.contour, true_ribs->width, true_ribs->height);
            const Ellipse e = fit_ellipse(thorax);
            return obstruct(img, e, rng());
        }
    }
    return img;
}

std::string RobustnessReport::to_json_text() const {
    json pairs = json::array();
    for (const SegPairResult& p : seg.pairs)
        pairs.push_back({{"id", p.id},
                         {"condition", p.condition},
                         {"iou_left", p.iou_left},
                         {"iou_right", p.iou_right}});
    json j{{"condition", to_string(condition)},
           {"mean_iou", seg.mean_iou},
           {"per_condition", seg.per_condition},
           {"pairs", pairs},
           {"runtime_stats", runtime_stats}};
    return j.dump(2);
}

RobustnessReport run_robustness_experiment(const std::vector<ManifestRow>& manifest,
                                           Condition condition, const SnakeParams& params,
                                           std::uint64_t seed, int workers) {
    // Fail fast on missing files, naming each one.
    std::string missing;
    for (const ManifestRow& row : manifest)
        for (const auto* p : {&row.image, &row.ribs_mask, &row.spine_mask,
                              &row.left_mask, &row.right_mask})
            if (!std::filesystem::exists(*p)) missing += "\n  " + p->string();
    if (!missing.empty()) throw IoError("manifest references missing files:" + missing);

    const auto t0 = Clock::now();
    std::vector<HemithoraxPair> predicted(manifest.size());
    std::vector<HemithoraxPair> truth(manifest.size());
    std::vector<std::string> ids(manifest.size());

    parallel_rows(manifest.size(), workers, [&](std::size_t i) {
        const ManifestRow& row = manifest[i];
        const GrayImage img = load_gray(row.image);
        const BinaryMask ribs = load_mask(row.ribs_mask);
        const BinaryMask spine = load_mask(row.spine_mask);

        const GrayImage corrupted =
            apply_condition(img, condition, splitmix64(seed + i), &ribs, params);

        // Stand-in segmenter: recover bone from the (possibly corrupted)
        // radiograph; the spine channel is taken as given, matching the
        // pipeline's separate rib/spine inputs.
        BinaryMask bone = recover_bone_mask(corrupted);
        for (std::size_t b = 0; b < bone.bits.size(); ++b)
            if (spine.bits[b]) bone.bits[b] = 0;

        predicted[i] = segment_hemithoraces(bone, spine, params, SnakeMode::OneSnake);

        const SpineLine spine_line = fit_spine_midline(spine);
        truth[i] = HemithoraxPair{load_mask(row.left_mask), load_mask(row.right_mask),
                                  spine_line};
        ids[i] = row.id;
    });

    RobustnessReport report;
    report.condition = condition;
    const std::vector<std::string> tags(manifest.size(), to_string(condition));
    report.seg = segmentation_iou_report(predicted, truth, tags, ids);
    report.runtime_stats["total_ms"] = ms_since(t0);
    report.runtime_stats["per_image_ms"] =
        manifest.empty() ? 0.0 : ms_since(t0) / manifest.size();
    return report;
}

// --- Cross-validation -------------------------------------------------------------

namespace {

json metrics_to_json(const MetricsRecord& m) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    return json{{"precision", opt(m.precision)},
                {"recall", opt(m.recall)},
                {"f1", opt(m.f1)},
                {"auc", opt(m.auc)},
                {"confusion",
                 {{"tp", m.confusion.tp},
                  {"fp", m.confusion.fp},
                  {"fn", m.confusion.fn},
                  {"tn", m.confusion.tn}}}};
}

json model_metrics_to_json(const ModelMetrics& m) {
    return json{{"svm", metrics_to_json(m.svm)},
                {"mlp", metrics_to_json(m.mlp)},
                {"gbc", metrics_to_json(m.gbc)},
                {"ensemble", metrics_to_json(m.ensemble)}};
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& vals) {
    double acc = 0.0;
    int n = 0;
    for (const auto& v : vals)
        if (v) {
            acc += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return acc / n;
}

MetricsRecord average_metrics(const std::vector<MetricsRecord>& per_fold) {
    MetricsRecord avg;
    std::vector<std::optional<double>> p, r, f, a;
    for (const MetricsRecord& m : per_fold) {
        p.push_back(m.precision);
        r.push_back(m.recall);
        f.push_back(m.f1);
        a.push_back(m.auc);
        avg.confusion.tp += m.confusion.tp;
        avg.confusion.fp += m.confusion.fp;
        avg.confusion.fn += m.confusion.fn;
        avg.confusion.tn += m.confusion.tn;
    }
    avg.precision = mean_defined(p);
    avg.recall = mean_defined(r);
    avg.f1 = mean_defined(f);
    avg.auc = mean_defined(a);
    return avg;
}

} // namespace

std::string EvalReport::to_json_text() const {
    json folds = json::array();
    for (std::size_t f = 0; f < per_fold.size(); ++f) {
        json fj = model_metrics_to_json(per_fold[f]);
        fj["fold"] = static_cast<int>(f);
        folds.push_back(std::move(fj));
    }
    json rows_json = json::array();
    for (const CvRowRecord& r : rows) {
        rows_json.push_back({{"id", r.id},
                             {"fold", r.fold},
                             {"truth", r.truth},
                             {"ensemble_label", r.ensemble.label},
                             {"ensemble_score", r.ensemble.score},
                             {"votes", r.ensemble.votes},
                             {"svm_label", r.members[0].label},
                             {"svm_score", r.members[0].score},
                             {"mlp_label", r.members[1].label},
                             {"mlp_score", r.members[1].score},
                             {"gbc_label", r.members[2].label},
                             {"gbc_score", r.members[2].score}});
    }
    json j{{"per_fold", folds},
           {"overall_pooled", model_metrics_to_json(overall_pooled)},
           {"overall_averaged", model_metrics_to_json(overall_averaged)},
           {"confusion",
            {{"tp", confusion.tp},
             {"fp", confusion.fp},
             {"fn", confusion.fn},
             {"tn", confusion.tn}}},
           {"runtime_stats", runtime_stats},
           {"rows", rows_json}};
    return j.dump(2);
}

EvalReport run_cv(const Dataset& data, const FoldPlan& folds, const EnsembleConfig& config,
                  std::uint64_t seed) {
    if (folds.assignments.size() != data.size())
        throw InputError("run_cv: fold plan does not match the dataset");

    EvalReport report;
    const auto t_all = Clock::now();

    struct PerModel {
        std::vector<LabeledScore> preds;
        std::vector<int> truths;
    };
    std::array<PerModel, 4> pooled; // svm, mlp, gbc, ensemble
    std::array<std::vector<MetricsRecord>, 4> fold_metrics;

    for (int f = 0; f < folds.k; ++f) {
        Dataset train;
        std::vector<std::size_t> test_rows;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (folds.assignments[i] == f) test_rows.push_back(i);
            else train.add(data.ids[i], data.features[i], data.labels[i]);
        }
        if (test_rows.empty()) continue;

        const auto t_train = Clock::now();
        const TrainedEnsemble model =
            train_ensemble(train, config, splitmix64(seed + static_cast<std::uint64_t>(f)));
        report.runtime_stats["train_fold" + std::to_string(f) + "_ms"] = ms_since(t_train);

        std::array<PerModel, 4> fold_preds;
        for (std::size_t i : test_rows) {
            const FeatureArray& x = data.features[i];
            FeatureVector fv;
            fv.sim_area = x[0];
            fv.sim_perimeter = x[1];
            fv.sim_centroid_dx = x[2];
            fv.sim_first_rib_width = x[3];
            fv.hist_jsd = x[4];
            fv.hist_intersection = x[5];
            fv.reg_iou = x[6];
            fv.degenerate = std::all_of(x.begin(), x.end(),
                                        [](double v) { return v == 0.0; });

            CvRowRecord rec;
            rec.id = data.ids[i];
            rec.fold = f;
            rec.truth = data.labels[i];
            rec.ensemble = predict(model, fv);
            rec.members[0] = {model.svm.predict_label(x), model.svm.score(x)};
            rec.members[1] = {model.mlp.predict_label(x), model.mlp.score(x)};
            rec.members[2] = {model.gbc.predict_label(x), model.gbc.score(x)};

            for (int mi = 0; mi < 3; ++mi) {
                fold_preds[mi].preds.push_back(rec.members[mi]);
                fold_preds[mi].truths.push_back(rec.truth);
                pooled[mi].preds.push_back(rec.members[mi]);
                pooled[mi].truths.push_back(rec.truth);
            }
            fold_preds[3].preds.push_back({rec.ensemble.label, rec.ensemble.score});
            fold_preds[3].truths.push_back(rec.truth);
            pooled[3].preds.push_back({rec.ensemble.label, rec.ensemble.score});
            pooled[3].truths.push_back(rec.truth);

            report.rows.push_back(std::move(rec));
        }

        ModelMetrics fm;
        fm.svm = classification_metrics(fold_preds[0].preds, fold_preds[0].truths);
        fm.mlp = classification_metrics(fold_preds[1].preds, fold_preds[1].truths);
        fm.gbc = classification_metrics(fold_preds[2].preds, fold_preds[2].truths);
        fm.ensemble = classification_metrics(fold_preds[3].preds, fold_preds[3].truths);
        report.per_fold.push_back(fm);
        for (int mi = 0; mi < 4; ++mi)
            fold_metrics[mi].push_back(mi == 0 ? fm.svm : mi == 1 ? fm.mlp
                                                 : mi == 2        ? fm.gbc
                                                                  : fm.ensemble);
    }

    report.overall_pooled.svm = classification_metrics(pooled[0].preds, pooled[0].truths);
    report.overall_pooled.mlp = classification_metrics(pooled[1].preds, pooled[1].truths);
    report.overall_pooled.gbc = classification_metrics(pooled[2].preds, pooled[2].truths);
    report.overall_pooled.ensemble =
        classification_metrics(pooled[3].preds, pooled[3].truths);
    report.overall_averaged.svm = average_metrics(fold_metrics[0]);
    report.overall_averaged.mlp = average_metrics(fold_metrics[1]);
    report.overall_averaged.gbc = average_metrics(fold_metrics[2]);
    report.overall_averaged.ensemble = average_metrics(fold_metrics[3]);
    report.confusion = report.overall_pooled.ensemble.confusion;
    report.runtime_stats["total_ms"] = ms_since(t_all);
    return report;
}

EnsembleConfig grid_search(const Dataset& data, const ParamGrid& grid, int k,
                           std::uint64_t seed) {
    const FoldPlan folds = make_folds(data, k, seed);
    EnsembleConfig best;
    double best_f1 = -1.0;
    for (double c : grid.svm_c)
        for (double g : grid.svm_gamma)
            for (int ne : grid.gbc_n_estimators)
                for (int md : grid.gbc_max_depth)
                    for (double glr : grid.gbc_learning_rate)
                        for (double mlr : grid.mlp_learning_rate) {
                            EnsembleConfig cand;
                            cand.svm_c = c;
                            cand.svm_gamma = g;
                            cand.gbc_n_estimators = ne;
                            cand.gbc_max_depth = md;
                            cand.gbc_learning_rate = glr;
                            cand.mlp.learning_rate = mlr;
                            const EvalReport rep = run_cv(data, folds, cand, seed);
                            const double f1 =
                                rep.overall_pooled.ensemble.f1.value_or(0.0);
                            if (f1 > best_f1) {
                                best_f1 = f1;
                                best = cand;
                            }
                        }
    return best;
}

} // namespace hemisym
