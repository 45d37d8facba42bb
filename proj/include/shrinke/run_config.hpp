#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "shrinke/model.hpp"
#include "shrinke/training.hpp"

namespace shrinke {

/// One flat configuration for a run: model + training hyperparameters, data
/// paths and evaluation options. Serialized in full into the run manifest so
/// every run can be reproduced.
struct RunConfig {
    Index dim = 200;
    double temperature = 1.0;
    std::uint64_t seed = 1;
    double init_scale = 0.1;
    double shrink_bias_init = -4.0;

    double learning_rate = 1e-4;
    int batch_size = 128;
    int epochs = 0;
    int n_neg = 64;
    double smoothing = 0.1;
    bool deterministic = false;
    int threads = 0;
    int eval_every = 0;  // validate every k epochs; 0 disables periodic validation

    bool no_rotation = false;
    bool no_translation = false;
    bool no_shrinking = false;

    double valid_fraction = 0.2;  // used only when the dataset has no valid split
    bool filter_include_test = false;

    std::string data_dir;
    std::string out_dir;

    ModelConfig modelConfig() const;
    TrainConfig trainConfig() const;
    Ablation ablation() const { return {no_rotation, no_translation, no_shrinking}; }
    std::string filterMode() const { return filter_include_test ? "train+valid+test" : "train+valid"; }

    nlohmann::ordered_json toJson() const;
    /// Rejects unknown keys so config typos fail loudly.
    static RunConfig fromJson(const nlohmann::json& j);
    static RunConfig fromJsonFile(const std::filesystem::path& file);
};

}  // namespace shrinke
