#pragma once

#include "tcast/nn/model.hpp"

#include <functional>
#include <vector>

namespace tcast::nn {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 20;
    int patience = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 2019;
    int threads = 1;

    void validate() const;
};

/// Node features and targets on a uniform step grid.
struct SequenceData {
    std::vector<Matrix> features; // per step, N x F
    Matrix targets;               // steps x N, normalized flow (NaN = unknown)

    std::size_t steps() const { return features.size(); }
};

/// Window t uses inputs [t - lookback, t) and targets [t, t + horizon).
std::vector<Matrix> window_inputs(const SequenceData& data, std::size_t t, int lookback);
Matrix window_target(const SequenceData& data, std::size_t t, int horizon);

/// Window starts t whose targets lie in [first_step, last_step) and whose inputs and
/// targets are all finite.
std::vector<std::size_t> valid_windows(const SequenceData& data, int lookback, int horizon, std::size_t first_step,
                                       std::size_t last_step);

struct EpochRecord {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double validation_loss = 0.0;
    std::vector<double> validation_residuals; // |prediction - truth|, window-major then node, horizon
};

struct TrainResult {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&, const ForecastModel&)>;

/// Mini-batch Adam on MSE. Batches are drawn in a seeded shuffled order; gradients of the
/// windows in a batch are summed in window order, so the trajectory does not depend on the
/// thread count. Stops after `patience` epochs without validation improvement and restores the
/// best weights. On divergence the best (or initial) weights are restored and TrainingError is thrown.
TrainResult train(ForecastModel& model, const SequenceData& data, const Matrix& adjacency,
                  const std::vector<std::size_t>& train_windows, const std::vector<std::size_t>& validation_windows,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// N x horizon prediction for every window.
std::vector<Matrix> predict_windows(const ForecastModel& model, const SequenceData& data, const Matrix& adjacency,
                                    const std::vector<std::size_t>& windows);

/// Absolute residuals of predictions against window targets, window-major.
std::vector<double> absolute_residuals(const std::vector<Matrix>& predictions, const SequenceData& data,
                                       const std::vector<std::size_t>& windows);

} // namespace tcast::nn
