#include "tcast/synthetic.hpp"

#include "tcast/ingest.hpp"
#include "tcast/rng.hpp"
#include "tcast/timeutil.hpp"
#include "tcast/weather.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace tcast {

namespace {

constexpr double kCenterLat = 39.96;
constexpr double kCenterLon = -83.00;

struct Point {
    double lat;
    double lon;
};

Point on_circle(double radius_km, double angle) {
    const double dlat = radius_km * std::cos(angle) / 111.32;
    const double dlon = radius_km * std::sin(angle) / (111.32 * std::cos(kCenterLat * std::numbers::pi / 180.0));
    return {kCenterLat + dlat, kCenterLon + dlon};
}

std::string fmt(double v, int precision) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << v;
    return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
}

double daily_profile(double hour, bool weekend) {
    const double am = std::exp(-0.5 * std::pow((hour - 8.0) / 1.6, 2));
    const double pm = std::exp(-0.5 * std::pow((hour - 17.0) / 2.0, 2));
    const double night = 0.25 + 0.35 * std::sin(std::numbers::pi * std::clamp((hour - 5.0) / 18.0, 0.0, 1.0));
    return weekend ? 0.75 * (night + 0.3 * pm + 0.2 * am) : night + 0.55 * am + 0.6 * pm;
}

const char* kPrecipLabels[] = {"No Precip", "Light", "Moderate", "Heavy Rain", "Heavy Snow", "Ice/Freezing"};

} // namespace

void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticConfig& config) {
    if (config.stations < 3 || config.nccs < 0 || config.nccs >= config.stations || config.days < 1 ||
        config.sensors < 1 || config.cadence_minutes <= 0 || 60 % config.cadence_minutes != 0) {
        throw ConfigError("invalid synthetic dataset configuration");
    }
    std::filesystem::create_directories(dir);
    const int n = config.stations;
    const int per_hour = 60 / config.cadence_minutes;
    const int hours = config.days * 24;
    const int steps = hours * per_hour;
    const Timestamp cadence = static_cast<Timestamp>(config.cadence_minutes) * kSecondsPerMinute;
    const double two_pi = 2.0 * std::numbers::pi;

    // stations and sensors
    std::vector<Point> station_at, sensor_at;
    for (int i = 0; i < n; ++i) {
        station_at.push_back(on_circle(8.0, two_pi * i / n));
    }
    for (int k = 0; k < config.sensors; ++k) {
        sensor_at.push_back(on_circle(k == 0 ? 1.0 : 12.0, two_pi * (k + 0.5) / config.sensors));
    }

    // regional precipitation: hourly Markov chain of events
    CounterRng wx(config.seed, {stream::synthetic, 1});
    std::vector<int> regional(static_cast<std::size_t>(hours), 0);
    int level = 0;
    for (int h = 0; h < hours; ++h) {
        if (level == 0) {
            if (wx.uniform() < 0.035) {
                level = 1 + static_cast<int>(wx.below(3));
            }
        } else if (wx.uniform() < 0.15) {
            level = 0;
        } else if (wx.uniform() < 0.2) {
            level = std::clamp(level + (wx.uniform() < 0.5 ? -1 : 1), 1, 5);
        }
        regional[static_cast<std::size_t>(h)] = level;
    }
    std::vector<double> drift(static_cast<std::size_t>(hours), 0.0);
    for (int h = 1; h < hours; ++h) {
        drift[static_cast<std::size_t>(h)] = 0.97 * drift[static_cast<std::size_t>(h - 1)] + 1.2 * wx.normal();
    }

    std::ostringstream sensors_csv, weather_csv;
    sensors_csv << "sensor_id,lat,lon\n";
    weather_csv << "sensor_id,timestamp,temp_f,wind_mph,precip_type\n";
    // sensor readings kept for the station-level precipitation effect
    std::vector<std::vector<double>> sensor_precip(static_cast<std::size_t>(config.sensors));
    for (int k = 0; k < config.sensors; ++k) {
        const std::string id = "W" + std::to_string(k + 1);
        sensors_csv << id << ',' << fmt(sensor_at[static_cast<std::size_t>(k)].lat, 5) << ','
                    << fmt(sensor_at[static_cast<std::size_t>(k)].lon, 5) << '\n';
        CounterRng rng(config.seed, {stream::synthetic, 2, static_cast<std::uint64_t>(k)});
        const double offset = rng.uniform(-2.0, 2.0);
        for (int h = 0; h < hours; ++h) {
            const Timestamp ts = config.start + static_cast<Timestamp>(h) * kSecondsPerHour;
            const int p = regional[static_cast<std::size_t>(h)];
            int local = p;
            if (p > 0 && rng.uniform() < 0.25) {
                local = std::max(0, p - 1);
            }
            const double temp = 38.0 + offset + drift[static_cast<std::size_t>(h)] +
                                10.0 * std::sin(two_pi * (hour_of_day(ts) - 9.0) / 24.0) + 0.8 * rng.normal();
            const double wind = std::max(0.0, 6.0 + 2.0 * local + 2.0 * rng.normal());
            sensor_precip[static_cast<std::size_t>(k)].push_back(local);
            weather_csv << id << ',' << format_iso8601(ts) << ',' << fmt(temp, 1) << ',' << fmt(wind, 1) << ','
                        << kPrecipLabels[local] << '\n';
        }
    }

    // station-level precipitation by inverse distance
    std::vector<std::vector<double>> station_precip(static_cast<std::size_t>(n), std::vector<double>(hours));
    for (int i = 0; i < n; ++i) {
        std::vector<double> d;
        for (const auto& s : sensor_at) {
            d.push_back(haversine_km(station_at[static_cast<std::size_t>(i)].lat,
                                     station_at[static_cast<std::size_t>(i)].lon, s.lat, s.lon));
        }
        for (int h = 0; h < hours; ++h) {
            std::vector<double> v;
            for (int k = 0; k < config.sensors; ++k) {
                v.push_back(sensor_precip[static_cast<std::size_t>(k)][static_cast<std::size_t>(h)]);
            }
            station_precip[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)] = idw_value(v, d, 2.0, 1e-6);
        }
    }

    // flows
    CounterRng fr(config.seed, {stream::synthetic, 3});
    std::vector<double> level_of(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        level_of[static_cast<std::size_t>(i)] = 80.0 + 25.0 * i;
    }
    std::vector<double> e(static_cast<std::size_t>(n), 0.0), e_next(static_cast<std::size_t>(n), 0.0);
    std::ostringstream flows_csv;
    flows_csv << "station_id,timestamp,flow\n";
    std::vector<std::vector<std::string>> flow_text(static_cast<std::size_t>(steps),
                                                    std::vector<std::string>(static_cast<std::size_t>(n)));
    for (int s = 0; s < steps; ++s) {
        const Timestamp ts = config.start + static_cast<Timestamp>(s) * cadence;
        const double hour = hour_of_day(ts) + (static_cast<double>(ts % kSecondsPerHour) / kSecondsPerHour);
        const int dow = day_of_week(ts);
        const bool weekend = dow == 0 || dow == 6;
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const auto up = static_cast<std::size_t>((i + n - 1) % n);
            e_next[ui] = 0.93 * e[ui] + 0.05 * e[up] + 0.06 * fr.normal();
        }
        e.swap(e_next);
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            double flow = 0.0;
            if (config.constant_flows) {
                flow = 50.0;
            } else {
                const double precip = station_precip[ui][static_cast<std::size_t>(s / per_hour)];
                const double mean = level_of[ui] * daily_profile(hour, weekend) * (1.0 + e[ui]) * (1.0 - 0.07 * precip);
                flow = std::max(0.0, std::round(mean + 0.25 * std::sqrt(std::max(mean, 1.0)) * fr.normal()));
            }
            flow_text[static_cast<std::size_t>(s)][ui] = fmt(flow, 0);
        }
    }
    if (config.plant_defects && !config.constant_flows) {
        // short gaps that interpolation repairs, one long gap it cannot, and negative counts
        for (int g = 0; g < 12; ++g) {
            const auto s = static_cast<std::size_t>(fr.below(static_cast<std::uint64_t>(steps - 4)) + 1);
            const auto i = static_cast<std::size_t>(fr.below(static_cast<std::uint64_t>(n)));
            const auto len = 1 + fr.below(3);
            for (std::size_t k = 0; k < len; ++k) {
                flow_text[s + k][i] = "";
            }
        }
        for (int k = 0; k < 6; ++k) {
            flow_text[static_cast<std::size_t>(steps / 3 + k)][1] = "";
        }
        for (int k = 0; k < 3; ++k) {
            const auto s = static_cast<std::size_t>(fr.below(static_cast<std::uint64_t>(steps - 2)) + 1);
            flow_text[s][static_cast<std::size_t>(k)] = "-" + std::to_string(5 + k);
        }
    }
    for (int s = 0; s < steps; ++s) {
        const Timestamp ts = config.start + static_cast<Timestamp>(s) * cadence;
        for (int i = 0; i < n; ++i) {
            flows_csv << 'S' << (i + 1) << ',' << format_iso8601(ts) << ','
                      << flow_text[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] << '\n';
        }
    }

    std::ostringstream stations_csv;
    stations_csv << "id,lat,lon,kind,count_total\n";
    for (int i = 0; i < n; ++i) {
        const bool nccs = i >= n - config.nccs;
        const auto count = nccs ? static_cast<long>(steps * (i == n - 1 ? 0.55 : 0.9)) : static_cast<long>(steps);
        stations_csv << 'S' << (i + 1) << ',' << fmt(station_at[static_cast<std::size_t>(i)].lat, 5) << ','
                     << fmt(station_at[static_cast<std::size_t>(i)].lon, 5) << ',' << (nccs ? "NCCS" : "CCS") << ','
                     << count << '\n';
    }

    // travel times: ring in both directions plus a skip-one chord, hourly history
    std::ostringstream tt_csv;
    tt_csv << "from_id,to_id,hour,minutes\n";
    CounterRng tr(config.seed, {stream::synthetic, 4});
    for (int i = 0; i < n; ++i) {
        for (int step : {1, n - 1, 2}) {
            const int j = (i + step) % n;
            const double km = haversine_km(station_at[static_cast<std::size_t>(i)].lat,
                                           station_at[static_cast<std::size_t>(i)].lon,
                                           station_at[static_cast<std::size_t>(j)].lat,
                                           station_at[static_cast<std::size_t>(j)].lon);
            const double base = 60.0 * km / 45.0 * (1.0 + 0.08 * i);
            for (int h = 0; h < 24; ++h) {
                const double rush = std::exp(-0.5 * std::pow((h - 8.0) / 1.5, 2)) +
                                    std::exp(-0.5 * std::pow((h - 17.0) / 1.8, 2));
                for (int r = 0; r < 2; ++r) {
                    double minutes = base * (1.0 + 0.3 * rush) * (1.0 + 0.05 * tr.normal());
                    std::string text = fmt(minutes, 2);
                    if (config.plant_defects && ((i == 0 && step == 1 && h == 3 && r == 0) ||
                                                 (i == 2 && step == 2 && h == 14 && r == 1))) {
                        text = "0.0";
                    } else if (config.plant_defects && i == 4 && step == 1 && h == 22 && r == 0) {
                        text = "";
                    }
                    tt_csv << 'S' << (i + 1) << ",S" << (j + 1) << ',' << h << ',' << text << '\n';
                }
            }
        }
    }

    write_file(dir / "stations.csv", stations_csv.str());
    write_file(dir / "sensors.csv", sensors_csv.str());
    write_file(dir / "weather.csv", weather_csv.str());
    write_file(dir / "flows.csv", flows_csv.str());
    write_file(dir / "travel_time.csv", tt_csv.str());
}

} // namespace tcast
