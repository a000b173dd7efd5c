#include "tcast/adjacency.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace tcast {

Matrix gaussian_kernel(const Matrix& adjusted_minutes, double sigma) {
    if (!(sigma > 0.0)) {
        throw ConfigError("kernel sigma must be positive");
    }
    double t_max = 0.0;
    bool any = false;
    for (Eigen::Index i = 0; i < adjusted_minutes.size(); ++i) {
        const double t = adjusted_minutes.data()[i];
        if (!std::isfinite(t)) {
            continue;
        }
        if (!(t > 0.0)) {
            throw DataError("kernel input travel times must be positive");
        }
        t_max = std::max(t_max, t);
        any = true;
    }
    if (!any) {
        throw DataError("cannot build an adjacency from an empty edge set");
    }
    const double denom = 2.0 * sigma * sigma;
    Matrix out = Matrix::Zero(adjusted_minutes.rows(), adjusted_minutes.cols());
    for (Eigen::Index i = 0; i < adjusted_minutes.size(); ++i) {
        const double t = adjusted_minutes.data()[i];
        if (std::isfinite(t)) {
            const double r = t / t_max;
            out.data()[i] = std::exp(-(r * r) / denom);
        }
    }
    return out;
}

AdaptiveAdjacency merge_availability(const Matrix& dynamic, const AvailabilityMatrix& availability) {
    if (dynamic.rows() != availability.values.rows() || dynamic.cols() != availability.values.cols()) {
        throw DataError("adjacency and availability shapes differ");
    }
    AdaptiveAdjacency out;
    out.values = dynamic.cwiseProduct(availability.values);
    return out;
}

AggregationMode parse_aggregation(std::string_view name) {
    if (name == "mean") {
        return AggregationMode::mean;
    }
    if (name == "per_sample") {
        return AggregationMode::per_sample;
    }
    throw ConfigError("unknown aggregation mode '" + std::string(name) + "'");
}

std::string_view to_string(AggregationMode mode) {
    return mode == AggregationMode::mean ? "mean" : "per_sample";
}

std::vector<AdaptiveAdjacency> aggregate_samples(const std::vector<AdaptiveAdjacency>& adjacencies,
                                                 AggregationMode mode) {
    if (adjacencies.empty()) {
        throw DataError("no adjacency samples to aggregate");
    }
    if (mode == AggregationMode::per_sample) {
        return adjacencies;
    }
    AdaptiveAdjacency mean;
    mean.scenario = adjacencies.front().scenario;
    mean.values = Matrix::Zero(adjacencies.front().values.rows(), adjacencies.front().values.cols());
    for (const auto& a : adjacencies) {
        mean.values += a.values;
    }
    mean.values /= static_cast<double>(adjacencies.size());
    return {mean};
}

Matrix with_self_loops(const Matrix& adjacency) {
    Matrix out = adjacency;
    out.diagonal().setOnes();
    return out;
}

void write_adjacency_csv(const std::filesystem::path& path, const Matrix& adjacency,
                         const std::vector<std::string>& station_ids) {
    if (static_cast<Eigen::Index>(station_ids.size()) != adjacency.rows()) {
        throw DataError("station id count does not match adjacency size");
    }
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "from_id,to_id,weight\n" << std::setprecision(12);
    for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
        for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
            if (i != j && adjacency(i, j) != 0.0) {
                out << station_ids[static_cast<std::size_t>(i)] << ',' << station_ids[static_cast<std::size_t>(j)]
                    << ',' << adjacency(i, j) << '\n';
            }
        }
    }
}

} // namespace tcast
