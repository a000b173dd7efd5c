#include "tcast/conformal.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace tcast {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("miscoverage alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
}

} // namespace

double conformal_quantile(std::span<const double> residuals, double alpha) {
    check_alpha(alpha);
    if (residuals.empty()) {
        throw DataError("conformal calibration set is empty");
    }
    for (double r : residuals) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw DataError("conformal residuals must be finite and nonnegative");
        }
    }
    const auto n = residuals.size();
    // tolerate rounding in (1 - alpha)(n + 1), e.g. 0.9 * 1000
    const double exact = (1.0 - alpha) * static_cast<double>(n + 1);
    const auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    if (rank > n) {
        spdlog::warn("calibration set of {} residuals is too small for alpha {}; interval is unbounded", n, alpha);
        return std::numeric_limits<double>::infinity();
    }
    std::vector<double> sorted(residuals.begin(), residuals.end());
    const auto k = static_cast<std::ptrdiff_t>(std::max<std::size_t>(rank, 1) - 1);
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
    return sorted[static_cast<std::size_t>(k)];
}

std::vector<IntervalForecast> build_intervals(std::span<const double> predictions, double q) {
    if (!(q >= 0.0)) {
        throw DataError("interval half-width must be nonnegative");
    }
    std::vector<IntervalForecast> out;
    out.reserve(predictions.size());
    for (double p : predictions) {
        out.push_back({p, p - q, p + q});
    }
    return out;
}

std::vector<IntervalForecast> build_intervals(std::span<const double> predictions, std::span<const double> q_per_node,
                                              std::span<const std::size_t> node_of) {
    if (node_of.size() != predictions.size()) {
        throw DataError("node labels do not match the prediction count");
    }
    std::vector<IntervalForecast> out;
    out.reserve(predictions.size());
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        if (node_of[k] >= q_per_node.size()) {
            throw DataError("node label outside the per-node quantile table");
        }
        const double q = q_per_node[node_of[k]];
        out.push_back({predictions[k], predictions[k] - q, predictions[k] + q});
    }
    return out;
}

std::vector<double> per_node_quantiles(std::span<const double> residuals, std::span<const std::size_t> node_of,
                                       std::size_t nodes, double alpha) {
    if (node_of.size() != residuals.size()) {
        throw DataError("node labels do not match the residual count");
    }
    std::vector<std::vector<double>> by_node(nodes);
    for (std::size_t k = 0; k < residuals.size(); ++k) {
        if (node_of[k] >= nodes) {
            throw DataError("node label out of range");
        }
        by_node[node_of[k]].push_back(residuals[k]);
    }
    std::vector<double> q;
    q.reserve(nodes);
    for (const auto& r : by_node) {
        q.push_back(conformal_quantile(r, alpha));
    }
    return q;
}

AdaptiveConformal::AdaptiveConformal(double alpha) : alpha_(alpha) {
    check_alpha(alpha);
}

double AdaptiveConformal::recalibrate(CalibrationSet calibration) {
    q_ = conformal_quantile(calibration.residuals, alpha_);
    history_.push_back({calibration.epoch, calibration.residuals.size(), q_});
    sets_.push_back(calibration);
    current_ = std::move(calibration);
    calibrated_ = true;
    return q_;
}

double AdaptiveConformal::select_epoch(int epoch) {
    for (std::size_t k = 0; k < history_.size(); ++k) {
        if (history_[k].epoch == epoch) {
            current_ = sets_[k];
            q_ = history_[k].q;
            return q_;
        }
    }
    throw DataError("no calibration recorded for epoch " + std::to_string(epoch));
}

double AdaptiveConformal::q() const {
    if (!calibrated_) {
        throw DataError("conformal quantile requested before any calibration");
    }
    return q_;
}

std::vector<IntervalForecast> AdaptiveConformal::intervals(std::span<const double> predictions) const {
    return build_intervals(predictions, q());
}

SplitConformalResult split_cp_baseline(std::span<const double> calibration_residuals,
                                       std::span<const double> test_predictions, double alpha) {
    SplitConformalResult out;
    out.q = conformal_quantile(calibration_residuals, alpha);
    if (std::isfinite(out.q)) {
        out.intervals = build_intervals(test_predictions, out.q);
    }
    return out;
}

} // namespace tcast
