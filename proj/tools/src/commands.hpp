#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "swm/network.hpp"
#include "swm/pipeline.hpp"
#include "swm/synthdata.hpp"
#include "swm/training.hpp"

namespace swm::cli {

using Json = nlohmann::ordered_json;

/// Provenance shared by every command: the effective configuration as the
/// parser rendered it, and the seed (absent for commands without randomness).
struct Provenance {
    std::string command;
    std::string config;
    std::optional<std::uint64_t> seed;

    Json to_json() const;
};

struct SynthOptions {
    SyntheticAtlasSpec spec;
    std::string out_dir;
    std::size_t subjects = 0;
    std::size_t subject_per_cluster = 600;
    std::size_t subject_dwm = 4000;
};

struct TrainOptions {
    std::string data;
    std::string labels;
    std::string val_data;
    std::string val_labels;
    std::string out;
    std::string history;
    std::optional<std::uint32_t> classes;
    std::string method = "scl";  // stage two only: scl | ce
    TrainingConfig config;
};

struct ParcellateOptions {
    std::string stage_one;
    std::string stage_two;
    std::string tractogram;
    std::string out;
    std::string extended;
    InferenceOptions inference;
};

struct EvalOptions {
    std::vector<std::string> subjects;  // tractogram,predicted[,truth]
    std::string atlas_data;
    std::string atlas_labels;
    std::optional<std::uint32_t> clusters;
    std::string out;
    std::string heatmap_dir;
    std::size_t cir_threshold = 10;
    std::size_t points = 15;
    std::size_t heatmap_points = 15;
    double voxel_size = 2.0;
};

struct ImportanceOptions {
    std::string model;
    std::string data;
    std::string out;
};

struct FlopsOptions {
    Architecture arch;
    std::string out;
};

struct CrossvalOptions {
    std::string d1;
    std::string d1_labels;
    std::string d2;
    std::string d2_labels;
    std::uint32_t folds = 5;
    std::string method = "scl";
    std::string out;
    InferenceOptions inference;
    TrainingConfig config;
};

/// Each command writes its deterministic artifacts and returns a summary
/// (provenance, outputs, timing) for stdout.
Json cmd_synth(const SynthOptions& o, const Provenance& p);
Json cmd_train_stage1(const TrainOptions& o, const Provenance& p);
Json cmd_train_stage2(const TrainOptions& o, const Provenance& p);
Json cmd_parcellate(const ParcellateOptions& o, const Provenance& p);
Json cmd_eval(const EvalOptions& o, const Provenance& p);
Json cmd_importance(const ImportanceOptions& o, const Provenance& p);
Json cmd_flops(const FlopsOptions& o, const Provenance& p);
Json cmd_crossval(const CrossvalOptions& o, const Provenance& p);

}  // namespace swm::cli
