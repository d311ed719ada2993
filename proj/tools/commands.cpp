#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "hemisym/eval.hpp"
#include "hemisym/phantom.hpp"

#include "commands.hpp"

namespace hemisym::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

SnakeParams snake_params_from(const std::optional<std::string>& path) {
    return path ? SnakeParams::from_json_file(*path) : SnakeParams{};
}

EnsembleConfig ensemble_config_from(const std::optional<std::string>& path) {
    return path ? EnsembleConfig::from_json_file(*path) : EnsembleConfig{};
}

int run_guarded(const char* command, const std::function<int()>& body) {
    try {
        return body();
    } catch (const InputError& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitNumeric;
    } catch (const IoError& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitNumeric;
    }
}

json shape_stats_json(const ShapeStats& s) {
    return json{{"area", s.area},
                {"perimeter", s.perimeter},
                {"centroid", {s.centroid.x, s.centroid.y}},
                {"centroid_dx", s.centroid_dx},
                {"first_rib_width", s.first_rib_width},
                {"first_rib_endpoint", {s.first_rib_endpoint.x, s.first_rib_endpoint.y}}};
}

} // namespace

int cmd_segment(const SegmentArgs& args) {
    return run_guarded("segment", [&] {
        const SnakeParams params = snake_params_from(args.params);
        const SnakeMode mode = snake_mode_from_string(args.mode);
        const BinaryMask ribs = load_mask(args.ribs);
        const BinaryMask spine = load_mask(args.spine);

        const auto t0 = Clock::now();
        const HemithoraxPair pair = segment_hemithoraces(ribs, spine, params, mode);
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

        const std::filesystem::path left_path = args.out + "_left.png";
        const std::filesystem::path right_path = args.out + "_right.png";
        save_mask(pair.left, left_path);
        save_mask(pair.right, right_path);

        json sidecar{
            {"mode", to_string(mode)},
            {"params", json::parse(params.to_json_text())},
            {"timing_ms", elapsed_ms},
            {"spine",
             {{"point", {pair.spine.point.x, pair.spine.point.y}},
              {"direction", {pair.spine.direction.x, pair.spine.direction.y}},
              {"extent", {pair.spine.y_min, pair.spine.y_max}}}},
        };
        if (!pair.left.empty())
            sidecar["left"] = shape_stats_json(shape_stats(pair.left, pair.spine, Side::Left));
        if (!pair.right.empty())
            sidecar["right"] =
                shape_stats_json(shape_stats(pair.right, pair.spine, Side::Right));

        const std::filesystem::path stats_path = args.out + "_stats.json";
        std::ofstream out(stats_path);
        if (!out) throw IoError("cannot write sidecar: " + stats_path.string());
        out << sidecar.dump(2) << "\n";

        std::cout << "wrote " << left_path.string() << ", " << right_path.string() << ", "
                  << stats_path.string() << "\n";
        return kExitOk;
    });
}

int cmd_features(const FeaturesArgs& args) {
    return run_guarded("features", [&] {
        const SnakeParams params = snake_params_from(args.params);
        const SnakeMode mode = snake_mode_from_string(args.mode);
        const std::vector<ManifestRow> manifest = load_manifest(args.manifest);
        if (manifest.empty()) throw InputError("manifest has no rows");

        std::vector<FeatureRow> rows(manifest.size());
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= manifest.size()) return;
                try {
                    const ManifestRow& row = manifest[i];
                    const BinaryMask ribs = load_mask(row.ribs_mask);
                    const BinaryMask spine = load_mask(row.spine_mask);
                    const HemithoraxPair pair =
                        segment_hemithoraces(ribs, spine, params, mode);
                    rows[i] = FeatureRow{row.id, extract_features(pair), row.label};
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        };
        const int workers = std::max(1, args.workers);
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }
        if (error) std::rethrow_exception(error);

        write_features_csv(args.out, rows);
        std::cout << "wrote " << rows.size() << " feature rows to " << args.out << "\n";
        return kExitOk;
    });
}

int cmd_train(const TrainArgs& args) {
    return run_guarded("train", [&] {
        const std::vector<FeatureRow> rows = read_features_csv(args.features);
        for (const FeatureRow& r : rows)
            if (!r.label)
                throw InputError("row '" + r.id + "' has no label; training needs labels");
        const Dataset data = Dataset::from_rows(rows);
        const EnsembleConfig config = ensemble_config_from(args.params);
        const TrainedEnsemble model = train_ensemble(data, config, args.seed);
        save_ensemble(model, args.out);

        std::size_t correct = 0;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (predict(model, rows[i].fv).label == data.labels[i]) ++correct;
        std::cout << "trained ensemble on " << data.size() << " rows; training accuracy "
                  << static_cast<double>(correct) / data.size() << "; model written to "
                  << args.out << "\n";
        return kExitOk;
    });
}

int cmd_classify(const ClassifyArgs& args) {
    return run_guarded("classify", [&] {
        const TrainedEnsemble model = load_ensemble(args.model);

        FeatureVector fv;
        if (args.ribs && args.spine) {
            const SnakeParams params = snake_params_from(args.params);
            const SnakeMode mode = snake_mode_from_string(args.mode);
            const BinaryMask ribs = load_mask(*args.ribs);
            const BinaryMask spine = load_mask(*args.spine);
            fv = extract_features(segment_hemithoraces(ribs, spine, params, mode));
        } else if (args.features) {
            const std::vector<FeatureRow> rows = read_features_csv(*args.features);
            if (rows.size() != 1)
                throw InputError("classify expects exactly one feature row, got " +
                                 std::to_string(rows.size()));
            fv = rows[0].fv;
        } else {
            throw InputError("classify needs either --features or --ribs and --spine");
        }

        const Prediction p = predict(model, fv);
        std::cout << (p.label == 1 ? "asymmetric" : "symmetric") << " " << p.score << "\n";
        return kExitOk;
    });
}

int cmd_corrupt(const CorruptArgs& args) {
    return run_guarded("corrupt", [&] {
        const GrayImage img = load_gray(args.image);
        Condition condition;
        if (args.mode == "under") condition = Condition::Under;
        else if (args.mode == "over") condition = Condition::Over;
        else if (args.mode == "obscured") condition = Condition::Obscured;
        else
            throw InputError("corrupt mode must be under, over, or obscured");

        std::optional<BinaryMask> ribs;
        if (condition == Condition::Obscured) {
            if (!args.ribs) throw InputError("--mode obscured requires --ribs");
            ribs = load_mask(*args.ribs);
        }
        const SnakeParams params = snake_params_from(args.params);
        const GrayImage out =
            apply_condition(img, condition, args.seed, ribs ? &*ribs : nullptr, params);
        save_gray(out, args.out);
        std::cout << "wrote " << args.out << "\n";
        return kExitOk;
    });
}

int cmd_evaluate(const EvaluateArgs& args) {
    return run_guarded("evaluate", [&] {
        if (args.condition) {
            if (!args.manifest)
                throw InputError("evaluate with --condition requires --manifest");
            const Condition condition = condition_from_string(*args.condition);
            const SnakeParams params = snake_params_from(args.params);
            const std::vector<ManifestRow> manifest = load_manifest(*args.manifest);
            const RobustnessReport report = run_robustness_experiment(
                manifest, condition, params, args.seed, args.workers);
            std::ofstream out(args.out);
            if (!out) throw IoError("cannot write report: " + args.out);
            out << report.to_json_text() << "\n";
            std::cout << "condition " << to_string(condition) << ": mean hemithorax IoU "
                      << report.seg.mean_iou << "; report written to " << args.out << "\n";
            return kExitOk;
        }

        if (!args.features)
            throw InputError("evaluate needs --features (CV mode) or --manifest with "
                             "--condition (robustness mode)");
        const std::vector<FeatureRow> rows = read_features_csv(*args.features);
        for (const FeatureRow& r : rows)
            if (!r.label)
                throw InputError("row '" + r.id + "' has no label; evaluation needs labels");
        const Dataset data = Dataset::from_rows(rows);
        const EnsembleConfig config = ensemble_config_from(args.params);
        const FoldPlan folds = make_folds(data, args.folds, args.seed);
        const EvalReport report = run_cv(data, folds, config, args.seed);

        std::ofstream out(args.out);
        if (!out) throw IoError("cannot write report: " + args.out);
        out << report.to_json_text() << "\n";

        const auto fmt = [](const std::optional<double>& v) {
            return v ? std::to_string(*v) : std::string("n/a");
        };
        std::cout << args.folds << "-fold CV (pooled): ensemble F1 "
                  << fmt(report.overall_pooled.ensemble.f1) << ", AUC "
                  << fmt(report.overall_pooled.ensemble.auc) << "; report written to "
                  << args.out << "\n";
        return kExitOk;
    });
}

int cmd_phantom(const PhantomArgs& args) {
    return run_guarded("phantom", [&] {
        const auto rows = generate_corpus(args.n, args.asym_fraction, args.seed, args.out_dir);
        std::cout << "wrote " << rows.size() << " phantoms to " << args.out_dir << "\n";
        return kExitOk;
    });
}

} // namespace hemisym::cli
