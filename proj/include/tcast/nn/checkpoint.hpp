#pragma once

#include "tcast/ingest.hpp"
#include "tcast/nn/params.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tcast::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to run inference on new data besides the weights.
struct CheckpointMeta {
    std::vector<std::string> station_ids;
    NormalizationParams flow_norm;    // one column per station
    NormalizationParams weather_norm; // temperature, wind, precipitation
    Matrix adjacency;                 // with self-loops, as used in training
    int cadence_minutes = 15;
    double cv = 0.0;
};

struct Checkpoint {
    ForecastModel model;
    CheckpointMeta meta;
};

/// Binary layout: magic "TCASTCKP", u32 version, shape, metadata, a tensor table of
/// (name, rows, cols) and then every tensor as column-major little-endian f64.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws DataError on a bad magic, unsupported version, truncated file, or a tensor table
/// that does not match the stored shape.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tcast::nn
