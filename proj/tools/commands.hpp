#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace hemisym::cli {

// Exit codes shared by every subcommand:
//   0 ok, 2 usage/input, 3 numerical failure, 4 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

struct SegmentArgs {
    std::string ribs, spine, mode = "one-snake", out;
    std::optional<std::string> params;
};

struct FeaturesArgs {
    std::string manifest, out, mode = "one-snake";
    std::optional<std::string> params;
    int workers = 1;
};

struct TrainArgs {
    std::string features, out;
    std::optional<std::string> params;
    std::uint64_t seed = 0;
};

struct ClassifyArgs {
    std::string model;
    std::optional<std::string> features, ribs, spine, params;
    std::string mode = "one-snake";
};

struct CorruptArgs {
    std::string image, mode, out;
    std::optional<std::string> ribs, params;
    std::uint64_t seed = 0;
};

struct EvaluateArgs {
    std::optional<std::string> features;   // CV mode
    std::optional<std::string> manifest;   // robustness mode
    std::optional<std::string> condition;
    std::optional<std::string> params;
    std::string out;
    int folds = 5;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct PhantomArgs {
    int n = 100;
    double asym_fraction = 0.3;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_segment(const SegmentArgs& args);
int cmd_features(const FeaturesArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_classify(const ClassifyArgs& args);
int cmd_corrupt(const CorruptArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_phantom(const PhantomArgs& args);

} // namespace hemisym::cli
