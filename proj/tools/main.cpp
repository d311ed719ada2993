#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace hemisym::cli;

    CLI::App app{"hemisym - hemithorax recovery and symmetry classification for "
                 "VD/DV thoracic radiograph masks"};
    app.require_subcommand(1);

    SegmentArgs seg;
    CLI::App* segment = app.add_subcommand(
        "segment", "Fit the thorax to a rib mask and split it into hemithoraces");
    segment->add_option("--ribs", seg.ribs, "Rib mask PNG")->required();
    segment->add_option("--spine", seg.spine, "Spine mask PNG")->required();
    segment->add_option("--mode", seg.mode, "one-snake | two-snake");
    segment->add_option("--params", seg.params, "Snake parameter JSON");
    segment->add_option("--out", seg.out, "Output path prefix")->required();

    FeaturesArgs feat;
    CLI::App* features = app.add_subcommand(
        "features", "Run the pipeline over a manifest and write the feature CSV");
    features->add_option("--manifest", feat.manifest, "Dataset manifest JSON")->required();
    features->add_option("--out", feat.out, "Output CSV path")->required();
    features->add_option("--mode", feat.mode, "one-snake | two-snake");
    features->add_option("--params", feat.params, "Snake parameter JSON");
    features->add_option("--workers", feat.workers, "Parallel workers");

    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "Train the three-model ensemble");
    train->add_option("--features", tr.features, "Labeled feature CSV")->required();
    train->add_option("--out", tr.out, "Model artifact path")->required();
    train->add_option("--params", tr.params, "Classifier config JSON");
    train->add_option("--seed", tr.seed, "Training seed");

    ClassifyArgs cl;
    CLI::App* classify = app.add_subcommand(
        "classify", "Classify one radiograph as symmetric or asymmetric");
    classify->add_option("--model", cl.model, "Model artifact path")->required();
    classify->add_option("--features", cl.features, "Feature CSV with exactly one row");
    classify->add_option("--ribs", cl.ribs, "Rib mask PNG");
    classify->add_option("--spine", cl.spine, "Spine mask PNG");
    classify->add_option("--mode", cl.mode, "one-snake | two-snake");
    classify->add_option("--params", cl.params, "Snake parameter JSON");

    CorruptArgs co;
    CLI::App* corrupt = app.add_subcommand(
        "corrupt", "Apply an exposure or obstruction corruption to a radiograph");
    corrupt->add_option("--image", co.image, "Input radiograph PNG")->required();
    corrupt->add_option("--mode", co.mode, "under | over | obscured")->required();
    corrupt->add_option("--out", co.out, "Output PNG")->required();
    corrupt->add_option("--ribs", co.ribs, "Rib mask PNG (obscured mode)");
    corrupt->add_option("--params", co.params, "Snake parameter JSON (obscured mode)");
    corrupt->add_option("--seed", co.seed, "Corruption seed");

    EvaluateArgs ev;
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "Cross-validated classification or segmentation robustness");
    evaluate->add_option("--features", ev.features, "Labeled feature CSV (CV mode)");
    evaluate->add_option("--manifest", ev.manifest, "Dataset manifest (robustness mode)");
    evaluate->add_option("--condition", ev.condition, "normal | under | over | obscured");
    evaluate->add_option("--params", ev.params,
                         "Classifier config JSON (CV) or snake JSON (robustness)");
    evaluate->add_option("--folds", ev.folds, "Fold count");
    evaluate->add_option("--seed", ev.seed, "Seed");
    evaluate->add_option("--workers", ev.workers, "Parallel workers");
    evaluate->add_option("--out", ev.out, "Report JSON path")->required();

    PhantomArgs ph;
    CLI::App* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom corpus");
    phantom->add_option("--n", ph.n, "Corpus size")->required();
    phantom->add_option("--asym-fraction", ph.asym_fraction, "Asymmetric fraction");
    phantom->add_option("--seed", ph.seed, "Generation seed");
    phantom->add_option("--out-dir", ph.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return kExitUsage;
    }

    if (segment->parsed()) return cmd_segment(seg);
    if (features->parsed()) return cmd_features(feat);
    if (train->parsed()) return cmd_train(tr);
    if (classify->parsed()) return cmd_classify(cl);
    if (corrupt->parsed()) return cmd_corrupt(co);
    if (evaluate->parsed()) return cmd_evaluate(ev);
    if (phantom->parsed()) return cmd_phantom(ph);
    return kExitUsage;
}
