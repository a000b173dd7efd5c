#include "tcast/weather.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace tcast {

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * deg;
    const double dlon = (lon2 - lon1) * deg;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double idw_value(std::span<const double> values, std::span<const double> distances_km, double power,
                 double epsilon_km) {
    if (values.empty() || values.size() != distances_km.size()) {
        throw DataError("IDW needs matching, nonempty value and distance lists");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double w = 1.0 / std::pow(distances_km[k] + epsilon_km, power);
        num += w * values[k];
        den += w;
    }
    return num / den;
}

StationWeatherSeries StationWeatherSeries::slice(std::size_t first, std::size_t last) const {
    StationWeatherSeries out;
    out.station_id = station_id;
    last = std::min(last, size());
    first = std::min(first, last);
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(last));
    for (std::size_t v = 0; v < kWeatherVariables; ++v) {
        out.values[v].assign(values[v].begin() + static_cast<std::ptrdiff_t>(first),
                             values[v].begin() + static_cast<std::ptrdiff_t>(last));
    }
    return out;
}

StationWeatherSeries idw_interpolate(const StationRecord& station, const std::vector<SensorRecord>& sensors,
                                     const std::vector<WeatherRecord>& records, const IdwConfig& config) {
    if (sensors.empty()) {
        throw DataError("no weather sensors available for station '" + station.station_id + "'");
    }
    if (config.k_nearest < 1) {
        throw ConfigError("IDW needs k_nearest >= 1");
    }
    std::map<std::string, double> distance;
    for (const auto& s : sensors) {
        distance[s.sensor_id] = haversine_km(station.latitude, station.longitude, s.latitude, s.longitude);
    }
    std::map<Timestamp, std::vector<const WeatherRecord*>> by_time;
    for (const auto& r : records) {
        if (distance.contains(r.sensor_id)) {
            by_time[r.timestamp].push_back(&r);
        }
    }
    if (by_time.empty()) {
        throw DataError("no weather observations available for station '" + station.station_id + "'");
    }

    StationWeatherSeries out;
    out.station_id = station.station_id;
    bool warned = false;
    const auto k = static_cast<std::size_t>(config.k_nearest);
    for (auto& [ts, obs] : by_time) {
        std::stable_sort(obs.begin(), obs.end(), [&](const WeatherRecord* a, const WeatherRecord* b) {
            const double da = distance[a->sensor_id], db = distance[b->sensor_id];
            return da != db ? da < db : a->sensor_id < b->sensor_id;
        });
        const std::size_t use = std::min(k, obs.size());
        if (use < k && !warned) {
            spdlog::warn("station '{}': only {} weather sensor(s) reported at {}; using all available",
                         station.station_id, use, ts);
            warned = true;
        }
        std::vector<double> d(use), temp(use), wind(use), precip(use);
        for (std::size_t i = 0; i < use; ++i) {
            d[i] = distance[obs[i]->sensor_id];
            temp[i] = obs[i]->temperature_f;
            wind[i] = obs[i]->wind_mph;
            precip[i] = obs[i]->precip_intensity;
        }
        out.timestamps.push_back(ts);
        out.values[0].push_back(idw_value(temp, d, config.power, config.epsilon_km));
        out.values[1].push_back(idw_value(wind, d, config.power, config.epsilon_km));
        out.values[2].push_back(idw_value(precip, d, config.power, config.epsilon_km));
    }
    return out;
}

Matrix align_weather(const StationWeatherSeries& series, const std::vector<Timestamp>& steps) {
    if (series.size() == 0) {
        throw DataError("station '" + series.station_id + "' has no weather to align");
    }
    Matrix out(static_cast<Eigen::Index>(steps.size()), static_cast<Eigen::Index>(kWeatherVariables));
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < steps.size(); ++s) {
        while (cursor + 1 < series.size() && series.timestamps[cursor + 1] <= steps[s]) {
            ++cursor;
        }
        for (std::size_t v = 0; v < kWeatherVariables; ++v) {
            out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(v)) = series.values[v][cursor];
        }
    }
    return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw DataError("correlation needs two equal-length series of at least two points");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // Relative guard so that series constant up to rounding count as constant.
    const auto negligible = [n](double ss, double mean) { return ss <= 1e-24 * n * std::max(1.0, mean * mean); };
    if (negligible(sxx, mx) || negligible(syy, my)) {
        return std::nullopt;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

EdgeWeatherCorrelations edge_correlations(std::span<const double> travel_time_samples,
                                          const StationWeatherSeries& weather_i,
                                          const StationWeatherSeries& weather_j) {
    if (weather_i.timestamps != weather_j.timestamps) {
        throw DataError("weather series of '" + weather_i.station_id + "' and '" + weather_j.station_id +
                        "' are not aligned");
    }
    if (travel_time_samples.size() != weather_i.size()) {
        throw DataError("travel-time series length does not match the weather series");
    }
    EdgeWeatherCorrelations out;
    std::vector<double> mid(weather_i.size());
    for (std::size_t v = 0; v < kWeatherVariables; ++v) {
        for (std::size_t t = 0; t < mid.size(); ++t) {
            mid[t] = 0.5 * (weather_i.values[v][t] + weather_j.values[v][t]);
        }
        if (const auto r = pearson(travel_time_samples, mid)) {
            out.rho[v] = *r;
            out.defined[v] = true;
        }
    }
    return out;
}

std::vector<EdgeFeatureRow> compute_edge_features(const TrafficGraph& graph, const TravelTimeMatrix& mean_matrix,
                                                  const std::vector<StationWeatherSeries>& station_weather,
                                                  const ScenarioConfig& config) {
    config.validate();
    if (station_weather.size() != graph.size()) {
        throw DataError("one weather series per graph node is required");
    }
    std::vector<EdgeFeatureRow> rows;
    rows.reserve(graph.edges.size());
    for (const auto& [i, j] : graph.edges) {
        const double mean = mean_matrix.minutes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const auto params = lognormal_params(mean, config.cv);
        CounterRng rng(config.seed, {stream::weather_correlation, i, j});
        const auto draws = sample_lognormal(params, station_weather[i].size(), rng);
        EdgeFeatureRow row;
        row.from = i;
        row.to = j;
        row.correlations = edge_correlations(draws, station_weather[i], station_weather[j]);
        row.mean_travel_time = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
        rows.push_back(row);
    }
    return rows;
}

std::array<double, kWeatherVariables> normalize_weights(const std::array<double, kWeatherVariables>& beta) {
    double total = 0.0;
    for (const double b : beta) {
        total += std::abs(b);
    }
    std::array<double, kWeatherVariables> alpha{};
    if (!(total > 0.0) || !std::isfinite(total)) {
        alpha.fill(1.0 / kWeatherVariables);
        return alpha;
    }
    for (std::size_t k = 0; k < kWeatherVariables; ++k) {
        alpha[k] = std::abs(beta[k]) / total;
    }
    return alpha;
}

WeatherWeights fit_weather_weights(std::span<const EdgeFeatureRow> rows) {
    if (rows.size() < kWeatherVariables + 1) {
        throw DataError("weather-weight regression needs at least 4 edges, got " + std::to_string(rows.size()));
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix design(n, static_cast<Eigen::Index>(kWeatherVariables + 1));
    Vector target(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        design(r, 0) = 1.0;
        for (std::size_t k = 0; k < kWeatherVariables; ++k) {
            design(r, static_cast<Eigen::Index>(k + 1)) = row.correlations.effective(k);
        }
        target(r) = row.mean_travel_time;
    }
    WeatherWeights out;
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols()) {
        spdlog::warn("weather-weight regression is rank deficient (rank {} of {}); using equal weights", qr.rank(),
                     design.cols());
        out.fallback = true;
        return out;
    }
    const Vector coef = qr.solve(target);
    out.intercept = coef(0);
    for (std::size_t k = 0; k < kWeatherVariables; ++k) {
        out.beta[k] = coef(static_cast<Eigen::Index>(k + 1));
    }
    out.residual_rms = std::sqrt((design * coef - target).squaredNorm() / static_cast<double>(n));
    out.alpha = normalize_weights(out.beta);
    return out;
}

std::array<Matrix, kWeatherVariables> correlation_matrices(std::span<const EdgeFeatureRow> rows, std::size_t n) {
    std::array<Matrix, kWeatherVariables> out;
    for (auto& m : out) {
        m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    }
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < kWeatherVariables; ++k) {
            out[k](static_cast<Eigen::Index>(row.from), static_cast<Eigen::Index>(row.to)) = row.correlations.effective(k);
        }
    }
    return out;
}

std::vector<Matrix> adjust_travel_times(const std::vector<Matrix>& samples,
                                        const std::array<Matrix, kWeatherVariables>& correlations,
                                        const WeatherWeights& weights, double floor_minutes) {
    std::vector<Matrix> out;
    out.reserve(samples.size());
    for (const auto& sample : samples) {
        Matrix adj = sample;
        for (Eigen::Index i = 0; i < adj.rows(); ++i) {
            for (Eigen::Index j = 0; j < adj.cols(); ++j) {
                if (!std::isfinite(adj(i, j))) {
                    continue;
                }
                double factor = 1.0;
                for (std::size_t k = 0; k < kWeatherVariables; ++k) {
                    factor += weights.alpha[k] * correlations[k](i, j);
                }
                adj(i, j) = std::max(adj(i, j) * factor, floor_minutes);
            }
        }
        out.push_back(std::move(adj));
    }
    return out;
}

} // namespace tcast
