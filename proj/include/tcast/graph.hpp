#pragma once

#include "tcast/common.hpp"
#include "tcast/ingest.hpp"

#include <utility>
#include <vector>

namespace tcast {

/// Directed station graph with per-node data-availability scores.
/// Edges exist exactly where the cleaned travel-time matrix is finite.
struct TrafficGraph {
    std::vector<StationRecord> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> availability;
    std::vector<std::size_t> source_index; // node position in the dataset it was built from

    std::size_t size() const { return nodes.size(); }
    bool has_edge(std::size_t from, std::size_t to) const;
    /// n x n matrix with 1 on edges and 0 elsewhere.
    Matrix edge_mask() const;
};

struct AvailabilityMatrix {
    Matrix values;
};

/// 1 for CCS; C_i / max_nccs_count for N-CCS.
double availability_score(const StationRecord& node, std::uint64_t max_nccs_count);

/// Builds the graph and scores every node. Requires at least two stations.
TrafficGraph build_graph(const std::vector<StationRecord>& stations, const TravelTimeMatrix& travel_times);

/// Entry (i, j) = A_i * A_j.
AvailabilityMatrix availability_matrix(const TrafficGraph& graph);

/// Drops N-CCS nodes whose score is below min_availability (inclusive threshold) together
/// with their incident edges. CCS nodes are always kept.
TrafficGraph filter_stations(const TrafficGraph& graph, double min_availability);

} // namespace tcast
