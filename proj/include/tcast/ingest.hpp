#pragma once

#include "tcast/common.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tcast {

enum class StationKind { CCS, NCCS };

struct StationRecord {
    std::string station_id;
    double latitude = 0.0;  // degrees
    double longitude = 0.0; // degrees
    StationKind kind = StationKind::CCS;
    std::uint64_t raw_count_total = 0; // C_i: number of count records the station reported
};

struct SensorRecord {
    std::string sensor_id;
    double latitude = 0.0;
    double longitude = 0.0;
};

struct WeatherRecord {
    std::string sensor_id;
    Timestamp timestamp = 0;
    double temperature_f = 0.0;
    double wind_mph = 0.0;
    std::string precip_type;
    double precip_intensity = 0.0; // ordinal from encode_precipitation
};

/// One historical travel-time reading for a link; hour is -1 when the source has no time of day.
struct TravelTimeObservation {
    int hour = -1;
    double minutes = 0.0;
};

/// Mean travel times between stations.
/// minutes(i, j): finite value, NaN when marked missing (needs repair), +inf when no link.
/// The diagonal is always NaN.
struct TravelTimeMatrix {
    Matrix minutes;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<TravelTimeObservation>> history;
    std::vector<std::string> station_ids; // optional, for error messages

    std::size_t size() const { return static_cast<std::size_t>(minutes.rows()); }
    std::string station_name(std::size_t index) const;

    /// Builds a matrix whose every finite or NaN off-diagonal entry becomes a single observation.
    static TravelTimeMatrix from_dense(const Matrix& minutes);
};

struct TravelTimeRepair {
    std::size_t from = 0;
    std::size_t to = 0;
    int hour = -1;
    double original = 0.0;
    double replacement = 0.0;
    bool used_row_median = false;
};

/// Flows on a uniform time grid: rows are steps, columns are stations.
/// NaN marks an interval that could not be recovered by interpolation.
struct FlowPanel {
    std::vector<Timestamp> timestamps;
    int cadence_minutes = 15;
    Matrix values;

    std::size_t steps() const { return timestamps.size(); }
    std::size_t stations() const { return static_cast<std::size_t>(values.cols()); }
};

struct IngestConfig {
    double floor_minutes = 1.65;
    int cadence_minutes = 15;
    int max_interpolation_gap = 4;
};

struct DataPaths {
    std::filesystem::path stations;
    std::filesystem::path flows;
    std::filesystem::path weather;
    std::filesystem::path sensors;
    std::filesystem::path travel_time;

    /// stations.csv, flows.csv, weather.csv, sensors.csv, travel_time.csv inside dir.
    static DataPaths from_directory(const std::filesystem::path& dir);
};

struct IngestReport {
    std::map<std::string, std::size_t> rows_read;
    std::size_t flows_negative_dropped = 0;
    std::size_t flows_off_cadence_dropped = 0;
    std::size_t flows_duplicate_dropped = 0;
    std::size_t flows_missing = 0;
    std::size_t flows_interpolated = 0;
    std::size_t flows_unrecoverable = 0;
    std::vector<TravelTimeRepair> travel_time_repairs;

    std::string summary() const;
};

struct Dataset {
    std::vector<StationRecord> stations;
    std::vector<SensorRecord> sensors;
    std::vector<WeatherRecord> weather; // sorted by (sensor, timestamp)
    TravelTimeMatrix travel_times;      // cleaned
    FlowPanel flows;
    IngestReport report;

    std::size_t station_index(std::string_view id) const;

    /// Restricts the dataset to the given station indices (in the given order).
    Dataset subset(const std::vector<std::size_t>& keep) const;
};

/// Loads, validates, and cleans the five input tables.
Dataset load_dataset(const DataPaths& paths, const IngestConfig& config = {});

/// Replaces every reading below floor (or missing) by the link's median reading for the same
/// hour of day, falling back to the median of the row's valid link means; then recomputes
/// link means. Throws DataError naming the station when a row has no valid reading at all.
TravelTimeMatrix clean_travel_times(const TravelTimeMatrix& matrix, double floor_minutes,
                                    std::vector<TravelTimeRepair>* repairs = nullptr);

/// Ordinal precipitation intensity: No Precip=0, Light=1, Moderate=2, Heavy Rain=3,
/// Heavy Snow=4, Ice/Freezing=5. Throws DataError for labels outside the vocabulary.
int encode_precipitation(std::string_view label);
std::string_view decode_precipitation(int ordinal);

/// Fills interior gaps of at most max_gap consecutive NaN steps by linear interpolation.
/// Returns the number of filled entries.
std::size_t interpolate_gaps(Eigen::Ref<Vector> series, int max_gap);

/// Per-column min-max scaling. Constant columns scale to 0.
struct NormalizationParams {
    Vector lo;
    Vector hi;

    double normalize(std::size_t column, double x) const;
    double denormalize(std::size_t column, double y) const;
    bool constant(std::size_t column) const { return hi(static_cast<Eigen::Index>(column)) <= lo(static_cast<Eigen::Index>(column)); }
    std::size_t size() const { return static_cast<std::size_t>(lo.size()); }

    /// Fits on rows [0, fit_rows) ignoring NaN.
    static NormalizationParams fit(const Matrix& values, std::size_t fit_rows);
    Matrix apply(const Matrix& values) const;
    Matrix invert(const Matrix& values) const;
};

struct NormalizedFlows {
    FlowPanel panel;
    NormalizationParams params;
};

/// Per-station min-max scaling using statistics from the first train_steps rows only.
/// Constant stations are scaled to 0 with a warning.
NormalizedFlows normalize_flows(const FlowPanel& flows, std::size_t train_steps);

} // namespace tcast
