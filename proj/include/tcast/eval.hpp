#pragma once

#include "tcast/common.hpp"
#include "tcast/conformal.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tcast {

struct ErrorMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;
};

/// Throws DataError on a length mismatch, an empty input, or a non-finite value.
ErrorMetrics mae_rmse(std::span<const double> truth, std::span<const double> predictions);

struct IntervalMetrics {
    double picp = 0.0;
    double mpiw = 0.0;
    std::size_t n = 0;
};

/// Coverage counts a truth on either boundary as covered.
IntervalMetrics picp_mpiw(std::span<const double> truth, std::span<const IntervalForecast> intervals);

/// One method at one CV level. Interval fields are absent for point-only methods; the
/// denormalized fields are present only when requested.
struct MetricCell {
    std::string method;
    double cv = 0.0;
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> picp;
    std::optional<double> mpiw;
    std::optional<double> mae_vehicles;
    std::optional<double> rmse_vehicles;
    std::optional<double> mpiw_vehicles;

    bool operator==(const MetricCell&) const = default;
};

struct MetricReport {
    std::vector<MetricCell> cells; // sorted by (method, cv)

    std::string to_json() const;
    static MetricReport from_json(const std::string& text);

    /// Aligned table, one row per method and one column group per CV.
    std::string to_text() const;

    bool operator==(const MetricReport&) const = default;
};

/// Sorts cells and checks mae <= rmse, picp in [0, 1], mpiw >= 0 per cell (DataError otherwise).
MetricReport scenario_report(std::vector<MetricCell> cells);

} // namespace tcast
