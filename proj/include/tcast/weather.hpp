#pragma once

#include "tcast/common.hpp"
#include "tcast/graph.hpp"
#include "tcast/ingest.hpp"
#include "tcast/stochastic.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tcast {

enum class WeatherVariable : std::size_t { temperature = 0, wind = 1, precipitation = 2 };
inline constexpr std::size_t kWeatherVariables = 3;

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

struct IdwConfig {
    int k_nearest = 3;
    double power = 2.0;
    double epsilon_km = 1e-6;
};

/// sum_k w_k / (d_k + eps)^p  /  sum_k 1 / (d_k + eps)^p
double idw_value(std::span<const double> values, std::span<const double> distances_km, double power,
                 double epsilon_km);

/// Interpolated weather at one station, one row per hourly timestamp.
struct StationWeatherSeries {
    std::string station_id;
    std::vector<Timestamp> timestamps;
    std::array<std::vector<double>, kWeatherVariables> values;

    const std::vector<double>& operator[](WeatherVariable v) const { return values[static_cast<std::size_t>(v)]; }
    std::size_t size() const { return timestamps.size(); }

    /// Rows [first, last) as a new series.
    StationWeatherSeries slice(std::size_t first, std::size_t last) const;
};

/// IDW over the k nearest sensors (by haversine distance) that reported at each timestamp,
/// applied independently to temperature, wind speed and precipitation ordinal.
/// Uses all available sensors with a warning when fewer than k reported.
StationWeatherSeries idw_interpolate(const StationRecord& station, const std::vector<SensorRecord>& sensors,
                                     const std::vector<WeatherRecord>& records, const IdwConfig& config = {});

/// Forward-fills hourly weather onto the given steps (steps x 3). Steps before the first
/// observation take the first observation.
Matrix align_weather(const StationWeatherSeries& series, const std::vector<Timestamp>& steps);

/// Pearson correlation; nullopt when either side is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct EdgeWeatherCorrelations {
    std::array<double, kWeatherVariables> rho{};
    std::array<bool, kWeatherVariables> defined{};

    /// rho where defined, 0 otherwise.
    double effective(std::size_t k) const { return defined[k] ? rho[k] : 0.0; }
};

/// Correlation of the travel-time draw series with the midpoint weather series (w_i + w_j) / 2.
/// The travel-time series must have one draw per weather timestamp.
EdgeWeatherCorrelations edge_correlations(std::span<const double> travel_time_samples,
                                          const StationWeatherSeries& weather_i,
                                          const StationWeatherSeries& weather_j);

/// Per-edge regression row: correlation features and the edge's mean dynamic travel time.
struct EdgeFeatureRow {
    std::size_t from = 0;
    std::size_t to = 0;
    EdgeWeatherCorrelations correlations;
    double mean_travel_time = 0.0;
};

/// For every edge, draws one log-normal travel time per weather timestamp from stream
/// (seed, weather_correlation, i, j) and correlates it with the edge's midpoint weather.
std::vector<EdgeFeatureRow> compute_edge_features(const TrafficGraph& graph, const TravelTimeMatrix& mean_matrix,
                                                  const std::vector<StationWeatherSeries>& station_weather,
                                                  const ScenarioConfig& config);

struct WeatherWeights {
    std::array<double, kWeatherVariables> alpha{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::array<double, kWeatherVariables> beta{};
    double intercept = 0.0;
    double residual_rms = 0.0;
    bool fallback = false; // equal weights used because the fit was degenerate
};

/// alpha_k = |beta_k| / sum |beta|; equal weights when every beta is zero.
std::array<double, kWeatherVariables> normalize_weights(const std::array<double, kWeatherVariables>& beta);

/// Cross-edge OLS of mean dynamic travel time on (rho_temp, rho_wind, rho_precip) with intercept.
/// Rank-deficient designs fall back to equal weights with a warning.
WeatherWeights fit_weather_weights(std::span<const EdgeFeatureRow> rows);

/// rho_k per edge as dense matrices (0 off-edge and where undefined).
std::array<Matrix, kWeatherVariables> correlation_matrices(std::span<const EdgeFeatureRow> rows, std::size_t n);

/// T_adj = T * (1 + sum_k alpha_k rho_k), clamped below at floor_minutes. Non-finite entries pass through.
std::vector<Matrix> adjust_travel_times(const std::vector<Matrix>& samples,
                                        const std::array<Matrix, kWeatherVariables>& correlations,
                                        const WeatherWeights& weights, double floor_minutes);

} // namespace tcast
