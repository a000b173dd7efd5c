#pragma once

#include "tcast/common.hpp"
#include "tcast/graph.hpp"
#include "tcast/stochastic.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tcast {

/// Edge weights in [0, 1]: kernelized travel times times joint availability.
struct AdaptiveAdjacency {
    Matrix values;
    ScenarioConfig scenario;
    std::optional<int> sample_index; // empty for an aggregate over samples
};

/// exp(-(T / T_max)^2 / (2 sigma^2)) on finite entries, 0 elsewhere; T_max is the largest finite
/// entry of the same matrix. Throws when no finite entry exists or an entry is not positive.
Matrix gaussian_kernel(const Matrix& adjusted_minutes, double sigma);

/// Element-wise product of the dynamic adjacency with the availability matrix.
AdaptiveAdjacency merge_availability(const Matrix& dynamic, const AvailabilityMatrix& availability);

enum class AggregationMode { mean, per_sample };

AggregationMode parse_aggregation(std::string_view name);
std::string_view to_string(AggregationMode mode);

/// mean: one element-wise average; per_sample: the input sequence unchanged.
std::vector<AdaptiveAdjacency> aggregate_samples(const std::vector<AdaptiveAdjacency>& adjacencies,
                                                 AggregationMode mode);

/// Copy with the diagonal set to 1 so every node attends to itself.
Matrix with_self_loops(const Matrix& adjacency);

/// Writes from_id,to_id,weight rows for every nonzero off-diagonal entry.
void write_adjacency_csv(const std::filesystem::path& path, const Matrix& adjacency,
                         const std::vector<std::string>& station_ids);

} // namespace tcast
