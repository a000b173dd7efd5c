#pragma once

#include "tcast/common.hpp"

#include <span>
#include <vector>

namespace tcast {

/// Absolute validation residuals from one frozen model snapshot.
struct CalibrationSet {
    std::vector<double> residuals;
    int epoch = 0;
};

/// The ceil((1 - alpha)(n + 1))-th smallest residual. Returns +inf with a warning when that rank
/// exceeds n. Throws DataError on an empty set or a negative/non-finite residual, ConfigError
/// unless 0 < alpha < 1.
double conformal_quantile(std::span<const double> residuals, double alpha);

struct IntervalForecast {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// [prediction - q, prediction + q] for every prediction.
std::vector<IntervalForecast> build_intervals(std::span<const double> predictions, double q);

/// Same with a separate q per node; node_of[k] is the node of prediction k.
std::vector<IntervalForecast> build_intervals(std::span<const double> predictions, std::span<const double> q_per_node,
                                              std::span<const std::size_t> node_of);

/// Quantile per node; node_of[k] is the node of residual k.
std::vector<double> per_node_quantiles(std::span<const double> residuals, std::span<const std::size_t> node_of,
                                       std::size_t nodes, double alpha);

struct CalibrationRecord {
    int epoch = 0;
    std::size_t n = 0;
    double q = 0.0;
};

/// Adaptive conformal calibration: q is recomputed from every epoch-end snapshot on the same
/// validation split; the most recent calibration is the one in force.
class AdaptiveConformal {
public:
    explicit AdaptiveConformal(double alpha);

    /// Replaces the calibration set and refreshes q.
    double recalibrate(CalibrationSet calibration);

    /// Returns the record for the given epoch (must have been calibrated) and makes it current.
    double select_epoch(int epoch);

    double alpha() const { return alpha_; }
    double q() const;
    const CalibrationSet& calibration() const { return current_; }
    const std::vector<CalibrationRecord>& history() const { return history_; }

    std::vector<IntervalForecast> intervals(std::span<const double> predictions) const;

private:
    double alpha_;
    CalibrationSet current_;
    std::vector<CalibrationSet> sets_;
    std::vector<CalibrationRecord> history_;
    double q_ = 0.0;
    bool calibrated_ = false;
};

/// Split conformal: one calibration pass, no refresh.
struct SplitConformalResult {
    double q = 0.0;
    std::vector<IntervalForecast> intervals;
};

SplitConformalResult split_cp_baseline(std::span<const double> calibration_residuals,
                                       std::span<const double> test_predictions, double alpha);

} // namespace tcast
