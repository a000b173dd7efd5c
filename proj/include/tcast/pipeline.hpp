#pragma once

#include "tcast/adjacency.hpp"
#include "tcast/config.hpp"
#include "tcast/conformal.hpp"
#include "tcast/eval.hpp"
#include "tcast/graph.hpp"
#include "tcast/ingest.hpp"
#include "tcast/nn/train.hpp"
#include "tcast/weather.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tcast {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kModelMethod = "GAT-LSTM-ACP";
inline constexpr const char* kSplitMethod = "GAT-LSTM-SplitCP";

/// Loaded, filtered and feature-engineered data shared by every scenario.
struct PreparedData {
    Dataset dataset; // restricted to the graph's stations, in graph order
    TrafficGraph graph;
    AvailabilityMatrix availability;
    std::vector<StationWeatherSeries> station_weather; // hourly, one per node
    NormalizationParams flow_norm;
    NormalizationParams weather_norm;
    nn::SequenceData sequence;
    std::size_t train_end = 0;
    std::size_t validation_end = 0;
    std::vector<std::size_t> train_windows;
    std::vector<std::size_t> validation_windows;
    std::vector<std::size_t> test_windows;

    std::vector<std::string> station_ids() const;
};

PreparedData prepare_data(const RunConfig& config);

/// Min-max parameters for (temperature, wind, precipitation) over the first train_steps rows
/// of every station.
NormalizationParams fit_weather_normalization(const std::vector<Matrix>& weather_steps, std::size_t train_steps);

/// Per-step node features: normalized flow then normalized temperature, wind, precipitation.
nn::SequenceData build_sequence(const Matrix& flows, const std::vector<Matrix>& weather_steps,
                                const NormalizationParams& flow_norm, const NormalizationParams& weather_norm);

struct AdjacencyBuild {
    std::vector<AdaptiveAdjacency> adjacencies; // one for mean mode, M for per-sample mode
    WeatherWeights weights;
    std::size_t edges = 0;
};

/// Samples travel times, fuses weather correlations from the training period, applies the
/// Gaussian kernel and the availability merge, then aggregates.
AdjacencyBuild build_adjacency(const PreparedData& data, const ScenarioConfig& scenario, AggregationMode mode,
                               double floor_minutes);

/// Values at the test targets laid out window-major, then node, then horizon step.
std::vector<double> gather_targets(const Matrix& step_values, const std::vector<std::size_t>& windows, int horizon);

/// HA, SAF and LTM scored on the test targets.
std::vector<MetricCell> baseline_cells(const PreparedData& data, const RunConfig& config, double cv);

struct ScenarioOutcome {
    double cv = 0.0;
    std::filesystem::path directory;
    std::vector<MetricCell> cells;
    int best_epoch = 0;
    int epochs_run = 0;
    double q = 0.0;
};

/// Builds the adjacency for one CV, trains, calibrates and scores; writes adjacency.csv,
/// model.ckpt, calibration.json, predictions.csv and metrics.json into `directory`.
/// On failure writes a `.failed` marker and rethrows.
ScenarioOutcome run_scenario(const PreparedData& data, const RunConfig& config, double cv,
                             const std::filesystem::path& directory);

/// The CV sweep: one directory per CV plus metrics.json, report.txt and manifest.json at the top.
MetricReport run_scenarios(const RunConfig& config);

std::string scenario_directory_name(double cv);

struct PredictOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data_dir;
    std::optional<std::filesystem::path> calibration;
    std::optional<double> alpha;
    std::optional<Timestamp> at; // first forecast step; default is right after the data
    std::filesystem::path output;
};

/// Writes station_id,timestamp,point,lower,upper in vehicle units. Without a calibration the
/// bounds are left empty. Returns the number of rows written.
std::size_t predict_to_csv(const PredictOptions& options);

/// FNV-1a 64-bit digest of a file as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

} // namespace tcast
