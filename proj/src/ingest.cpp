#include "tcast/ingest.hpp"

#include "csv.hpp"
#include "tcast/timeutil.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace tcast {

namespace {

constexpr std::array<std::string_view, 6> kPrecipLabels = {
    "No Precip", "Light", "Moderate", "Heavy Rain", "Heavy Snow", "Ice/Freezing"};

std::string where(const csv::Table& t, const csv::Row& r) {
    return t.path.filename().string() + ":" + std::to_string(r.line);
}

double require_double(const csv::Table& t, const csv::Row& r, std::size_t col) {
    double v = 0.0;
    if (csv::parse_double(r.fields[col], v) != csv::Parsed::ok) {
        throw DataError(where(t, r) + ": column '" + t.header[col] + "' is not a number: '" + r.fields[col] + "'");
    }
    return v;
}

Timestamp require_time(const csv::Table& t, const csv::Row& r, std::size_t col) {
    const auto ts = parse_iso8601(r.fields[col]);
    if (!ts) {
        throw DataError(where(t, r) + ": malformed timestamp '" + r.fields[col] + "'");
    }
    return *ts;
}

StationKind parse_kind(const csv::Table& t, const csv::Row& r, std::size_t col) {
    const auto& v = r.fields[col];
    if (v == "CCS") {
        return StationKind::CCS;
    }
    if (v == "NCCS" || v == "N-CCS") {
        return StationKind::NCCS;
    }
    throw DataError(where(t, r) + ": unknown station kind '" + v + "'");
}

std::vector<StationRecord> load_stations(const std::filesystem::path& path, IngestReport& report) {
    const auto t = csv::read(path);
    const auto c_id = t.column("id"), c_lat = t.column("lat"), c_lon = t.column("lon"), c_kind = t.column("kind"),
               c_count = t.column("count_total");
    std::vector<StationRecord> out;
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& r : t.rows) {
        StationRecord s;
        s.station_id = r.fields[c_id];
        s.latitude = require_double(t, r, c_lat);
        s.longitude = require_double(t, r, c_lon);
        s.kind = parse_kind(t, r, c_kind);
        const double count = require_double(t, r, c_count);
        if (s.station_id.empty()) {
            throw DataError(where(t, r) + ": empty station id");
        }
        if (s.latitude < -90.0 || s.latitude > 90.0 || s.longitude < -180.0 || s.longitude > 180.0) {
            throw DataError(where(t, r) + ": coordinates out of range");
        }
        if (count < 0.0 || count != std::floor(count)) {
            throw DataError(where(t, r) + ": count_total must be a nonnegative integer");
        }
        s.raw_count_total = static_cast<std::uint64_t>(count);
        if (!seen.emplace(s.station_id, out.size()).second) {
            throw DataError(where(t, r) + ": duplicate station id '" + s.station_id + "'");
        }
        out.push_back(std::move(s));
    }
    report.rows_read["stations"] = t.rows.size();
    return out;
}

std::vector<SensorRecord> load_sensors(const std::filesystem::path& path, IngestReport& report) {
    const auto t = csv::read(path);
    const auto c_id = t.column("sensor_id"), c_lat = t.column("lat"), c_lon = t.column("lon");
    std::vector<SensorRecord> out;
    std::unordered_map<std::string, int> seen;
    for (const auto& r : t.rows) {
        SensorRecord s{r.fields[c_id], require_double(t, r, c_lat), require_double(t, r, c_lon)};
        if (s.latitude < -90.0 || s.latitude > 90.0 || s.longitude < -180.0 || s.longitude > 180.0) {
            throw DataError(where(t, r) + ": coordinates out of range");
        }
        if (!seen.emplace(s.sensor_id, 0).second) {
            throw DataError(where(t, r) + ": duplicate sensor id '" + s.sensor_id + "'");
        }
        out.push_back(std::move(s));
    }
    report.rows_read["sensors"] = t.rows.size();
    return out;
}

std::vector<WeatherRecord> load_weather(const std::filesystem::path& path, const std::vector<SensorRecord>& sensors,
                                        IngestReport& report) {
    const auto t = csv::read(path);
    const auto c_id = t.column("sensor_id"), c_ts = t.column("timestamp"), c_temp = t.column("temp_f"),
               c_wind = t.column("wind_mph"), c_precip = t.column("precip_type");
    std::unordered_map<std::string, std::size_t> sensor_index;
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        sensor_index.emplace(sensors[i].sensor_id, i);
    }
    std::vector<WeatherRecord> out;
    std::unordered_map<std::string, Timestamp> last_seen;
    for (const auto& r : t.rows) {
        WeatherRecord w;
        w.sensor_id = r.fields[c_id];
        if (!sensor_index.contains(w.sensor_id)) {
            throw DataError(where(t, r) + ": unknown sensor id '" + w.sensor_id + "'");
        }
        w.timestamp = require_time(t, r, c_ts);
        w.temperature_f = require_double(t, r, c_temp);
        w.wind_mph = require_double(t, r, c_wind);
        w.precip_type = r.fields[c_precip];
        try {
            w.precip_intensity = encode_precipitation(w.precip_type);
        } catch (const DataError& e) {
            throw DataError(where(t, r) + ": " + e.what());
        }
        auto [it, inserted] = last_seen.emplace(w.sensor_id, w.timestamp);
        if (!inserted) {
            if (w.timestamp <= it->second) {
                throw DataError(where(t, r) + ": timestamps for sensor '" + w.sensor_id + "' are not strictly increasing");
            }
            it->second = w.timestamp;
        }
        out.push_back(std::move(w));
    }
    std::stable_sort(out.begin(), out.end(), [&](const WeatherRecord& a, const WeatherRecord& b) {
        const auto ia = sensor_index.at(a.sensor_id), ib = sensor_index.at(b.sensor_id);
        return ia != ib ? ia < ib : a.timestamp < b.timestamp;
    });
    report.rows_read["weather"] = t.rows.size();
    return out;
}

TravelTimeMatrix load_travel_times(const std::filesystem::path& path,
                                   const std::unordered_map<std::string, std::size_t>& station_index,
                                   IngestReport& report) {
    const auto t = csv::read(path);
    const auto c_from = t.column("from_id"), c_to = t.column("to_id"), c_min = t.column("minutes");
    const bool has_hour = t.has_column("hour");
    const auto c_hour = has_hour ? t.column("hour") : 0;
    const auto n = static_cast<Eigen::Index>(station_index.size());

    TravelTimeMatrix m;
    m.station_ids.resize(station_index.size());
    for (const auto& [id, idx] : station_index) {
        m.station_ids[idx] = id;
    }
    m.minutes = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
    m.minutes.diagonal().setConstant(std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : t.rows) {
        const auto from = station_index.find(r.fields[c_from]);
        const auto to = station_index.find(r.fields[c_to]);
        if (from == station_index.end() || to == station_index.end()) {
            const auto& bad = from == station_index.end() ? r.fields[c_from] : r.fields[c_to];
            throw DataError(where(t, r) + ": unknown station id '" + bad + "'");
        }
        if (from->second == to->second) {
            continue;
        }
        double minutes = 0.0;
        const auto parsed = csv::parse_double(r.fields[c_min], minutes);
        if (parsed == csv::Parsed::malformed) {
            throw DataError(where(t, r) + ": column 'minutes' is not a number: '" + r.fields[c_min] + "'");
        }
        if (parsed == csv::Parsed::missing) {
            minutes = std::numeric_limits<double>::quiet_NaN();
        }
        int hour = -1;
        if (has_hour && !r.fields[c_hour].empty()) {
            const double h = require_double(t, r, c_hour);
            if (h < 0 || h > 23 || h != std::floor(h)) {
                throw DataError(where(t, r) + ": hour must be an integer in [0, 23]");
            }
            hour = static_cast<int>(h);
        }
        m.history[{from->second, to->second}].push_back({hour, minutes});
        m.minutes(static_cast<Eigen::Index>(from->second), static_cast<Eigen::Index>(to->second)) =
            std::numeric_limits<double>::quiet_NaN();
    }
    report.rows_read["travel_time"] = t.rows.size();
    return m;
}

FlowPanel load_flows(const std::filesystem::path& path,
                     const std::unordered_map<std::string, std::size_t>& station_index,
                     const IngestConfig& config, IngestReport& report) {
    const auto t = csv::read(path);
    const auto c_id = t.column("station_id"), c_ts = t.column("timestamp"), c_flow = t.column("flow");

    struct Entry {
        std::size_t station;
        Timestamp ts;
        double flow;
    };
    std::vector<Entry> entries;
    entries.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        const auto it = station_index.find(r.fields[c_id]);
        if (it == station_index.end()) {
            throw DataError(where(t, r) + ": unknown station id '" + r.fields[c_id] + "'");
        }
        const Timestamp ts = require_time(t, r, c_ts);
        double flow = 0.0;
        const auto parsed = csv::parse_double(r.fields[c_flow], flow);
        if (parsed == csv::Parsed::malformed) {
            throw DataError(where(t, r) + ": column 'flow' is not a number: '" + r.fields[c_flow] + "'");
        }
        if (parsed == csv::Parsed::missing) {
            ++report.flows_missing;
            continue;
        }
        if (flow < 0.0) {
            ++report.flows_negative_dropped;
            continue;
        }
        entries.push_back({it->second, ts, flow});
    }
    report.rows_read["flows"] = t.rows.size();
    if (entries.empty()) {
        throw DataError(path.filename().string() + ": no usable flow rows");
    }

    const Timestamp cadence = static_cast<Timestamp>(config.cadence_minutes) * kSecondsPerMinute;
    Timestamp start = entries.front().ts, end = entries.front().ts;
    for (const auto& e : entries) {
        start = std::min(start, e.ts);
        end = std::max(end, e.ts);
    }
    FlowPanel panel;
    panel.cadence_minutes = config.cadence_minutes;
    const auto steps = static_cast<std::size_t>((end - start) / cadence + 1);
    panel.timestamps.resize(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        panel.timestamps[s] = start + static_cast<Timestamp>(s) * cadence;
    }
    const auto n = static_cast<Eigen::Index>(station_index.size());
    panel.values = Matrix::Constant(static_cast<Eigen::Index>(steps), n, std::numeric_limits<double>::quiet_NaN());
    for (const auto& e : entries) {
        if ((e.ts - start) % cadence != 0) {
            ++report.flows_off_cadence_dropped;
            continue;
        }
        const auto row = static_cast<Eigen::Index>((e.ts - start) / cadence);
        double& cell = panel.values(row, static_cast<Eigen::Index>(e.station));
        if (!std::isnan(cell)) {
            ++report.flows_duplicate_dropped;
            continue;
        }
        cell = e.flow;
    }
    for (Eigen::Index c = 0; c < n; ++c) {
        report.flows_interpolated += interpolate_gaps(panel.values.col(c), config.max_interpolation_gap);
    }
    report.flows_unrecoverable = static_cast<std::size_t>(panel.values.array().isNaN().count());
    return panel;
}

} // namespace

std::string TravelTimeMatrix::station_name(std::size_t index) const {
    return index < station_ids.size() ? "'" + station_ids[index] + "'" : "#" + std::to_string(index);
}

TravelTimeMatrix TravelTimeMatrix::from_dense(const Matrix& minutes) {
    TravelTimeMatrix m;
    m.minutes = minutes;
    const auto n = minutes.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        m.minutes(i, i) = std::numeric_limits<double>::quiet_NaN();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j && !std::isinf(minutes(i, j))) {
                m.history[{static_cast<std::size_t>(i), static_cast<std::size_t>(j)}].push_back({-1, minutes(i, j)});
            }
        }
    }
    return m;
}

DataPaths DataPaths::from_directory(const std::filesystem::path& dir) {
    return DataPaths{dir / "stations.csv", dir / "flows.csv", dir / "weather.csv", dir / "sensors.csv",
                     dir / "travel_time.csv"};
}

std::string IngestReport::summary() const {
    std::ostringstream os;
    for (const auto& [file, rows] : rows_read) {
        os << file << ": " << rows << " rows\n";
    }
    os << "flows: " << flows_negative_dropped << " negative dropped, " << flows_off_cadence_dropped
       << " off-cadence dropped, " << flows_duplicate_dropped << " duplicates dropped, " << flows_missing
       << " missing, " << flows_interpolated << " interpolated, " << flows_unrecoverable << " unrecoverable\n";
    os << "travel_time: " << travel_time_repairs.size() << " readings repaired\n";
    return os.str();
}

std::size_t Dataset::station_index(std::string_view id) const {
    for (std::size_t i = 0; i < stations.size(); ++i) {
        if (stations[i].station_id == id) {
            return i;
        }
    }
    throw DataError("unknown station id '" + std::string(id) + "'");
}

Dataset Dataset::subset(const std::vector<std::size_t>& keep) const {
    Dataset out;
    out.sensors = sensors;
    out.weather = weather;
    out.report = report;
    const auto k = static_cast<Eigen::Index>(keep.size());
    out.flows.timestamps = flows.timestamps;
    out.flows.cadence_minutes = flows.cadence_minutes;
    out.flows.values.resize(flows.values.rows(), k);
    out.travel_times.minutes.resize(k, k);
    std::unordered_map<std::size_t, std::size_t> remap;
    for (Eigen::Index a = 0; a < k; ++a) {
        const auto src = keep[static_cast<std::size_t>(a)];
        remap[src] = static_cast<std::size_t>(a);
        out.travel_times.station_ids.push_back(stations.at(src).station_id);
        out.stations.push_back(stations.at(src));
        out.flows.values.col(a) = flows.values.col(static_cast<Eigen::Index>(src));
        for (Eigen::Index b = 0; b < k; ++b) {
            out.travel_times.minutes(a, b) =
                travel_times.minutes(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(keep[static_cast<std::size_t>(b)]));
        }
    }
    for (const auto& [link, obs] : travel_times.history) {
        const auto f = remap.find(link.first), t = remap.find(link.second);
        if (f != remap.end() && t != remap.end()) {
            out.travel_times.history[{f->second, t->second}] = obs;
        }
    }
    return out;
}

Dataset load_dataset(const DataPaths& paths, const IngestConfig& config) {
    if (!(config.floor_minutes > 0.0)) {
        throw ConfigError("travel-time floor must be positive");
    }
    Dataset ds;
    ds.stations = load_stations(paths.stations, ds.report);
    std::unordered_map<std::string, std::size_t> station_index;
    for (std::size_t i = 0; i < ds.stations.size(); ++i) {
        station_index.emplace(ds.stations[i].station_id, i);
    }
    ds.sensors = load_sensors(paths.sensors, ds.report);
    ds.weather = load_weather(paths.weather, ds.sensors, ds.report);
    ds.flows = load_flows(paths.flows, station_index, config, ds.report);
    const auto raw_tt = load_travel_times(paths.travel_time, station_index, ds.report);
    ds.travel_times = clean_travel_times(raw_tt, config.floor_minutes, &ds.report.travel_time_repairs);
    for (const auto& rep : ds.report.travel_time_repairs) {
        spdlog::debug("travel time {}->{} hour {}: {} replaced by {}", ds.stations[rep.from].station_id,
                      ds.stations[rep.to].station_id, rep.hour, rep.original, rep.replacement);
    }
    return ds;
}

TravelTimeMatrix clean_travel_times(const TravelTimeMatrix& matrix, double floor_minutes,
                                    std::vector<TravelTimeRepair>* repairs) {
    if (!(floor_minutes > 0.0)) {
        throw ConfigError("travel-time floor must be positive");
    }
    const auto valid = [floor_minutes](double v) { return std::isfinite(v) && v >= floor_minutes; };
    const auto n = matrix.size();

    // Row medians over links that have at least one valid reading.
    std::vector<std::vector<double>> row_means(n);
    for (const auto& [link, obs] : matrix.history) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& o : obs) {
            if (valid(o.minutes)) {
                sum += o.minutes;
                ++count;
            }
        }
        if (count > 0) {
            row_means[link.first].push_back(sum / static_cast<double>(count));
        }
    }

    TravelTimeMatrix out;
    out.minutes = matrix.minutes;
    out.station_ids = matrix.station_ids;
    for (const auto& [link, obs] : matrix.history) {
        auto cleaned = obs;
        for (auto& o : cleaned) {
            if (valid(o.minutes)) {
                continue;
            }
            TravelTimeRepair rep{link.first, link.second, o.hour, o.minutes, 0.0, false};
            std::vector<double> same_hour;
            for (const auto& other : obs) {
                if (other.hour == o.hour && valid(other.minutes)) {
                    same_hour.push_back(other.minutes);
                }
            }
            if (!same_hour.empty()) {
                rep.replacement = lower_median(std::move(same_hour));
            } else if (!row_means[link.first].empty()) {
                rep.replacement = lower_median(row_means[link.first]);
                rep.used_row_median = true;
            } else {
                throw DataError("travel times for station " + matrix.station_name(link.first) +
                                " are entirely missing");
            }
            o.minutes = rep.replacement;
            if (repairs) {
                repairs->push_back(rep);
            }
        }
        double sum = 0.0;
        for (const auto& o : cleaned) {
            sum += o.minutes;
        }
        out.minutes(static_cast<Eigen::Index>(link.first), static_cast<Eigen::Index>(link.second)) =
            sum / static_cast<double>(cleaned.size());
        out.history.emplace(link, std::move(cleaned));
    }
    // Entries without history that are still marked missing get the row median.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            if (i == j || !std::isnan(out.minutes(ii, jj))) {
                continue;
            }
            if (row_means[i].empty()) {
                throw DataError("travel times for station " + matrix.station_name(i) + " are entirely missing");
            }
            out.minutes(ii, jj) = lower_median(row_means[i]);
        }
    }
    return out;
}

int encode_precipitation(std::string_view label) {
    for (std::size_t i = 0; i < kPrecipLabels.size(); ++i) {
        if (kPrecipLabels[i] == label) {
            return static_cast<int>(i);
        }
    }
    throw DataError("unknown precipitation category '" + std::string(label) + "'");
}

std::string_view decode_precipitation(int ordinal) {
    if (ordinal < 0 || ordinal >= static_cast<int>(kPrecipLabels.size())) {
        throw DataError("precipitation ordinal out of range: " + std::to_string(ordinal));
    }
    return kPrecipLabels[static_cast<std::size_t>(ordinal)];
}

std::size_t interpolate_gaps(Eigen::Ref<Vector> series, int max_gap) {
    std::size_t filled = 0;
    const auto n = series.size();
    Eigen::Index i = 0;
    while (i < n) {
        if (!std::isnan(series(i))) {
            ++i;
            continue;
        }
        Eigen::Index j = i;
        while (j < n && std::isnan(series(j))) {
            ++j;
        }
        const Eigen::Index gap = j - i;
        if (i > 0 && j < n && gap <= max_gap) {
            const double a = series(i - 1), b = series(j);
            for (Eigen::Index k = i; k < j; ++k) {
                const double frac = static_cast<double>(k - i + 1) / static_cast<double>(gap + 1);
                series(k) = a + frac * (b - a);
                ++filled;
            }
        }
        i = j;
    }
    return filled;
}

double NormalizationParams::normalize(std::size_t column, double x) const {
    const auto c = static_cast<Eigen::Index>(column);
    if (constant(column)) {
        return 0.0;
    }
    return (x - lo(c)) / (hi(c) - lo(c));
}

double NormalizationParams::denormalize(std::size_t column, double y) const {
    const auto c = static_cast<Eigen::Index>(column);
    if (constant(column)) {
        return lo(c);
    }
    return lo(c) + y * (hi(c) - lo(c));
}

NormalizationParams NormalizationParams::fit(const Matrix& values, std::size_t fit_rows) {
    NormalizationParams p;
    const auto cols = values.cols();
    p.lo = Vector::Zero(cols);
    p.hi = Vector::Zero(cols);
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(fit_rows), values.rows());
    for (Eigen::Index c = 0; c < cols; ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double v = values(r, c);
            if (!std::isnan(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!std::isfinite(lo)) {
            lo = hi = 0.0;
        }
        p.lo(c) = lo;
        p.hi(c) = hi;
    }
    return p;
}

Matrix NormalizationParams::apply(const Matrix& values) const {
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        for (Eigen::Index r = 0; r < values.rows(); ++r) {
            out(r, c) = std::isnan(values(r, c)) ? values(r, c) : normalize(static_cast<std::size_t>(c), values(r, c));
        }
    }
    return out;
}

Matrix NormalizationParams::invert(const Matrix& values) const {
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        for (Eigen::Index r = 0; r < values.rows(); ++r) {
            out(r, c) = denormalize(static_cast<std::size_t>(c), values(r, c));
        }
    }
    return out;
}

NormalizedFlows normalize_flows(const FlowPanel& flows, std::size_t train_steps) {
    if (flows.steps() == 0 || flows.stations() == 0) {
        throw DataError("cannot normalize an empty flow panel");
    }
    NormalizedFlows out;
    out.params = NormalizationParams::fit(flows.values, std::max<std::size_t>(train_steps, 1));
    for (std::size_t c = 0; c < out.params.size(); ++c) {
        if (out.params.constant(c)) {
            spdlog::warn("station column {} is constant over the training split; scaled to 0", c);
        }
    }
    out.panel = flows;
    out.panel.values = out.params.apply(flows.values);
    return out;
}

} // namespace tcast
