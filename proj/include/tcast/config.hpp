#pragma once

#include "tcast/adjacency.hpp"
#include "tcast/ingest.hpp"
#include "tcast/nn/params.hpp"
#include "tcast/nn/train.hpp"
#include "tcast/weather.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tcast {

struct RunConfig {
    std::filesystem::path data_dir;
    std::filesystem::path output_dir = "out";

    std::vector<double> cvs{0.1, 0.3, 0.5, 0.7, 1.0};
    int samples = 50;
    AggregationMode aggregation = AggregationMode::mean;
    double alpha = 0.10;
    std::uint64_t seed = 2019;
    double kernel_sigma = 0.5;
    double min_availability = 0.4;
    bool per_node_intervals = false;

    double train_fraction = 0.70;
    double validation_fraction = 0.15;

    IngestConfig ingest;
    IdwConfig idw;
    nn::ModelShape model;
    nn::TrainConfig training;

    int turning_k = 3;
    double turning_tau = 0.0; // 0 selects the median edge travel time

    int parallel_scenarios = 1;
    bool denormalized = false;

    /// Throws ConfigError naming the offending key.
    void validate() const;

    /// Flat key/value view used for the manifest.
    std::map<std::string, std::string> describe() const;
};

/// Reads `key = value` lines: '#' starts a comment, strings may be quoted, lists use
/// [a, b, c], an optional [section] header prefixes keys with "section.". Unknown keys and
/// malformed values raise ConfigError with the line number.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Applies one key/value pair (same keys and syntax as the file).
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Shortest round-trip decimal form.
std::string format_number(double value);

} // namespace tcast
