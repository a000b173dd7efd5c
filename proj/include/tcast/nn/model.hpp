#pragma once

#include "tcast/nn/layers.hpp"

#include <vector>

namespace tcast::nn {

struct ForwardCache {
    std::vector<GatCache> gat;        // per step
    std::vector<Matrix> embeddings;   // per step, GAT outputs fed to the LSTM
    LstmCache lstm;
    std::vector<Matrix> hidden;       // per step
    TemporalAttentionCache attention;
    Matrix context;
};

/// window: lookback matrices of N x features (oldest first). adjacency must include self-loops.
/// Returns N x horizon predictions in normalized units. Throws TrainingError naming the layer
/// when a non-finite value appears.
Matrix forward(const ForecastModel& model, const std::vector<Matrix>& window, const Matrix& adjacency,
               ForwardCache* cache = nullptr);

/// Accumulates d(loss)/d(parameters) into grad given d(loss)/d(output).
void backward(const ForecastModel& model, const std::vector<Matrix>& window, const Matrix& adjacency,
              const ForwardCache& cache, const Matrix& d_output, ForecastModel& grad);

/// Mean squared error over all entries and its gradient w.r.t. prediction.
double mse_loss(const Matrix& prediction, const Matrix& target, Matrix* d_prediction = nullptr);

/// Throws TrainingError unless every entry is finite.
void check_finite(const Matrix& values, const char* layer);

} // namespace tcast::nn
