#include "tcast/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace tcast {

bool TrafficGraph::has_edge(std::size_t from, std::size_t to) const {
    return std::find(edges.begin(), edges.end(), std::make_pair(from, to)) != edges.end();
}

Matrix TrafficGraph::edge_mask() const {
    const auto n = static_cast<Eigen::Index>(size());
    Matrix mask = Matrix::Zero(n, n);
    for (const auto& [i, j] : edges) {
        mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    }
    return mask;
}

double availability_score(const StationRecord& node, std::uint64_t max_nccs_count) {
    if (node.kind == StationKind::CCS) {
        return 1.0;
    }
    if (max_nccs_count == 0) {
        throw DataError("station '" + node.station_id + "' is N-CCS but no N-CCS station reported any counts");
    }
    return std::min(1.0, static_cast<double>(node.raw_count_total) / static_cast<double>(max_nccs_count));
}

TrafficGraph build_graph(const std::vector<StationRecord>& stations, const TravelTimeMatrix& travel_times) {
    if (stations.size() < 2) {
        throw DataError("a traffic graph needs at least two stations");
    }
    if (travel_times.size() != stations.size()) {
        throw DataError("travel-time matrix size does not match the station count");
    }
    TrafficGraph g;
    g.nodes = stations;
    std::uint64_t max_count = 0;
    for (const auto& s : stations) {
        if (s.kind == StationKind::NCCS) {
            max_count = std::max(max_count, s.raw_count_total);
        }
    }
    for (std::size_t i = 0; i < stations.size(); ++i) {
        g.availability.push_back(availability_score(stations[i], max_count));
        g.source_index.push_back(i);
        for (std::size_t j = 0; j < stations.size(); ++j) {
            if (i != j && std::isfinite(travel_times.minutes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))) {
                g.edges.emplace_back(i, j);
            }
        }
    }
    return g;
}

AvailabilityMatrix availability_matrix(const TrafficGraph& graph) {
    const Eigen::Map<const Vector> a(graph.availability.data(), static_cast<Eigen::Index>(graph.availability.size()));
    return AvailabilityMatrix{a * a.transpose()};
}

TrafficGraph filter_stations(const TrafficGraph& graph, double min_availability) {
    if (min_availability < 0.0 || min_availability > 1.0) {
        throw ConfigError("min_availability must lie in [0, 1]");
    }
    TrafficGraph out;
    std::unordered_map<std::size_t, std::size_t> remap;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        if (graph.nodes[i].kind == StationKind::NCCS && graph.availability[i] < min_availability) {
            continue;
        }
        remap[i] = out.nodes.size();
        out.nodes.push_back(graph.nodes[i]);
        out.availability.push_back(graph.availability[i]);
        out.source_index.push_back(graph.source_index[i]);
    }
    if (out.nodes.size() < 2) {
        throw DataError("fewer than two stations remain after availability filtering");
    }
    for (const auto& [i, j] : graph.edges) {
        const auto fi = remap.find(i), fj = remap.find(j);
        if (fi != remap.end() && fj != remap.end()) {
            out.edges.emplace_back(fi->second, fj->second);
        }
    }
    return out;
}

} // namespace tcast
