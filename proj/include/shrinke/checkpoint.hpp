#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shrinke/model.hpp"
#include "shrinke/run_config.hpp"

namespace shrinke {

inline constexpr int kCheckpointFormatVersion = 1;

/// Everything about a run needed to reload and reproduce it; stored as
/// manifest.json next to params.bin.
struct CheckpointMeta {
    int format_version = kCheckpointFormatVersion;
    RunConfig config;
    std::int32_t num_entities = 0;
    std::int32_t num_relations_base = 0;
    std::uint64_t vocab_hash = 0;
    int epoch = 0;
    std::optional<double> validation_mrr;
    std::string filter_mode;
    std::string data_source_dir;
    std::vector<std::pair<std::string, std::uint64_t>> data_file_hashes;
    bool carved_validation = false;  // validation split carved from train (with config seed)
};

/// Writes manifest.json and params.bin (little-endian float32 tensors behind a
/// JSON header) into dir. Deterministic: the same model and meta produce
/// byte-identical files.
void saveCheckpoint(const std::filesystem::path& dir, const Model& model,
                    const CheckpointMeta& meta);

struct LoadedCheckpoint {
    Model model;
    CheckpointMeta meta;
};

/// Loads a checkpoint directory; rejects unknown format versions loudly.
LoadedCheckpoint loadCheckpoint(const std::filesystem::path& dir);

}  // namespace shrinke
