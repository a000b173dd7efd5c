#pragma once

#include "tcast/nn/params.hpp"

#include <optional>
#include <vector>

namespace tcast::nn {

// ---------------------------------------------------------------------------
// Graph attention
// ---------------------------------------------------------------------------

struct GatCache {
    std::vector<Matrix> z;     // per head, N x d_out: features @ W
    std::vector<Matrix> u;     // per head, N x N: pre-activation logits
    std::vector<Matrix> alpha; // per head, N x N: attention, zero outside the neighbor set
    std::vector<Matrix> m;     // per head, N x d_out: aggregated messages before ELU
};

/// One graph-attention layer over N nodes.
///   e_ij = LeakyReLU(a . [W F_i || W F_j]), softmax over {j : A_ij > 0} of e_ij * A_ij,
///   h_i = ELU(sum_j alpha_ij W F_j), heads concatenated.
/// `adjacency` must already contain self-loops if self-attention is wanted.
/// Throws DataError for a node without any positive adjacency entry.
Matrix gat_forward(const Matrix& features, const Matrix& adjacency, const GatLayerParams& params,
                   GatCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` and returns d(features).
Matrix gat_backward(const Matrix& features, const Matrix& adjacency, const GatLayerParams& params,
                    const GatCache& cache, const Matrix& d_output, GatLayerParams& grad);

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

struct LstmState {
    Matrix h; // N x H
    Matrix c; // N x H
};

struct LstmCache {
    std::vector<Matrix> x, f, i, o, g, c, h; // per step, N x H (x is N x input)
    Matrix c0, h0;
};

/// Runs the cell over a sequence of N x input matrices (one row per node, shared weights)
/// and returns the N x H hidden state of every step. Starts from zeros unless `initial` is given.
std::vector<Matrix> lstm_forward(const std::vector<Matrix>& inputs, const LstmParams& params,
                                 LstmCache* cache = nullptr, const std::optional<LstmState>& initial = std::nullopt);

/// `d_hidden[t]` is the loss gradient w.r.t. hidden state t. Returns gradients of the inputs.
std::vector<Matrix> lstm_backward(const LstmParams& params, const LstmCache& cache,
                                  const std::vector<Matrix>& d_hidden, LstmParams& grad);

// ---------------------------------------------------------------------------
// Temporal attention pooling
// ---------------------------------------------------------------------------

struct TemporalAttentionCache {
    Matrix score;  // N x T, tanh(h_t . W_att + b_att)
    Matrix weight; // N x T, softmax over t
};

/// Context c = sum_t alpha_t h_t per node (N x H).
Matrix temporal_attention(const std::vector<Matrix>& hidden, const TemporalAttentionParams& params,
                          TemporalAttentionCache* cache = nullptr);

std::vector<Matrix> temporal_attention_backward(const std::vector<Matrix>& hidden,
                                                const TemporalAttentionParams& params,
                                                const TemporalAttentionCache& cache, const Matrix& d_context,
                                                TemporalAttentionParams& grad);

} // namespace tcast::nn
