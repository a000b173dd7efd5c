#include "tcast/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace tcast {

ErrorMetrics mae_rmse(std::span<const double> truth, std::span<const double> predictions) {
    if (truth.size() != predictions.size()) {
        throw DataError("metric inputs differ in length: " + std::to_string(truth.size()) + " vs " +
                        std::to_string(predictions.size()));
    }
    if (truth.empty()) {
        throw DataError("metrics need at least one value");
    }
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const double e = truth[k] - predictions[k];
        if (!std::isfinite(e)) {
            throw DataError("non-finite value in metric inputs");
        }
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(truth.size());
    return {abs_sum / n, std::sqrt(sq_sum / n), truth.size()};
}

IntervalMetrics picp_mpiw(std::span<const double> truth, std::span<const IntervalForecast> intervals) {
    if (truth.size() != intervals.size()) {
        throw DataError("interval metric inputs differ in length");
    }
    if (truth.empty()) {
        throw DataError("interval metrics need at least one value");
    }
    std::size_t covered = 0;
    double width = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (intervals[k].lower <= truth[k] && truth[k] <= intervals[k].upper) {
            ++covered;
        }
        width += intervals[k].upper - intervals[k].lower;
    }
    const double n = static_cast<double>(truth.size());
    return {static_cast<double>(covered) / n, width / n, truth.size()};
}

namespace {

using nlohmann::json;

void put_optional(json& j, const char* key, const std::optional<double>& v) {
    if (v) {
        j[key] = *v;
    }
}

std::optional<double> get_optional(const json& j, const char* key) {
    if (j.contains(key)) {
        return j.at(key).get<double>();
    }
    return std::nullopt;
}

std::string fixed(double v, int precision) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

} // namespace

std::string MetricReport::to_json() const {
    json cells_json = json::array();
    for (const auto& c : cells) {
        json j;
        j["method"] = c.method;
        j["cv"] = c.cv;
        j["n"] = c.n;
        j["mae"] = c.mae;
        j["rmse"] = c.rmse;
        put_optional(j, "picp", c.picp);
        put_optional(j, "mpiw", c.mpiw);
        put_optional(j, "mae_vehicles", c.mae_vehicles);
        put_optional(j, "rmse_vehicles", c.rmse_vehicles);
        put_optional(j, "mpiw_vehicles", c.mpiw_vehicles);
        cells_json.push_back(std::move(j));
    }
    json root;
    root["cells"] = std::move(cells_json);
    return root.dump(2) + "\n";
}

MetricReport MetricReport::from_json(const std::string& text) {
    MetricReport report;
    try {
        const auto root = json::parse(text);
        for (const auto& j : root.at("cells")) {
            MetricCell c;
            c.method = j.at("method").get<std::string>();
            c.cv = j.at("cv").get<double>();
            c.n = j.at("n").get<std::size_t>();
            c.mae = j.at("mae").get<double>();
            c.rmse = j.at("rmse").get<double>();
            c.picp = get_optional(j, "picp");
            c.mpiw = get_optional(j, "mpiw");
            c.mae_vehicles = get_optional(j, "mae_vehicles");
            c.rmse_vehicles = get_optional(j, "rmse_vehicles");
            c.mpiw_vehicles = get_optional(j, "mpiw_vehicles");
            report.cells.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed metric report: ") + e.what());
    }
    return report;
}

std::string MetricReport::to_text() const {
    std::set<double> cvs;
    std::vector<std::string> methods;
    std::map<std::pair<std::string, double>, const MetricCell*> index;
    for (const auto& c : cells) {
        cvs.insert(c.cv);
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
            methods.push_back(c.method);
        }
        index[{c.method, c.cv}] = &c;
    }
    std::size_t name_width = 6;
    for (const auto& m : methods) {
        name_width = std::max(name_width, m.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width)) << "method";
    for (double cv : cvs) {
        out << " | " << std::setw(31) << ("CV " + fixed(cv, 2) + "  mae/rmse/picp/mpiw");
    }
    out << "\n" << std::string(name_width, '-');
    for (std::size_t k = 0; k < cvs.size(); ++k) {
        out << "-+-" << std::string(31, '-');
    }
    out << "\n";
    for (const auto& m : methods) {
        out << std::left << std::setw(static_cast<int>(name_width)) << m;
        for (double cv : cvs) {
            std::string cell = "-";
            if (auto it = index.find({m, cv}); it != index.end()) {
                const auto& c = *it->second;
                cell = fixed(c.mae, 4) + " " + fixed(c.rmse, 4) + " " + (c.picp ? fixed(*c.picp, 3) : "  -  ") + " " +
                       (c.mpiw ? fixed(*c.mpiw, 4) : "-");
            }
            out << " | " << std::setw(31) << cell;
        }
        out << "\n";
    }
    return out.str();
}

MetricReport scenario_report(std::vector<MetricCell> cells) {
    if (cells.empty()) {
        throw DataError("scenario report needs at least one completed cell");
    }
    for (const auto& c : cells) {
        const std::string where = c.method + " at CV " + fixed(c.cv, 2);
        if (c.mae > c.rmse * (1.0 + 1e-12) + 1e-15) {
            throw DataError("mae exceeds rmse for " + where);
        }
        if (c.picp && !(*c.picp >= 0.0 && *c.picp <= 1.0)) {
            throw DataError("picp outside [0, 1] for " + where);
        }
        if (c.mpiw && !(*c.mpiw >= 0.0)) {
            throw DataError("negative mpiw for " + where);
        }
    }
    std::stable_sort(cells.begin(), cells.end(), [](const MetricCell& a, const MetricCell& b) {
        return a.method != b.method ? a.method < b.method : a.cv < b.cv;
    });
    return MetricReport{std::move(cells)};
}

} // namespace tcast
