#include "tcast/nn/layers.hpp"

#include <cmath>

namespace tcast::nn {

Matrix temporal_attention(const std::vector<Matrix>& hidden, const TemporalAttentionParams& params,
                          TemporalAttentionCache* cache) {
    if (hidden.empty()) {
        throw DataError("temporal attention needs at least one step");
    }
    const auto n = hidden.front().rows();
    const auto steps = static_cast<Eigen::Index>(hidden.size());
    Matrix score(n, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        score.col(t) = ((hidden[static_cast<std::size_t>(t)] * params.W_att).col(0).array() + params.b_att(0)).tanh().matrix();
    }
    Matrix weight(n, steps);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mx = score.row(r).maxCoeff();
        weight.row(r) = (score.row(r).array() - mx).exp().matrix();
        weight.row(r) /= weight.row(r).sum();
    }
    Matrix context = Matrix::Zero(n, hidden.front().cols());
    for (Eigen::Index t = 0; t < steps; ++t) {
        context.noalias() += weight.col(t).asDiagonal() * hidden[static_cast<std::size_t>(t)];
    }
    if (cache) {
        cache->score = std::move(score);
        cache->weight = std::move(weight);
    }
    return context;
}

std::vector<Matrix> temporal_attention_backward(const std::vector<Matrix>& hidden,
                                                const TemporalAttentionParams& params,
                                                const TemporalAttentionCache& cache, const Matrix& d_context,
                                                TemporalAttentionParams& grad) {
    const auto steps = static_cast<Eigen::Index>(hidden.size());
    const auto n = d_context.rows();
    Matrix d_weight(n, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        d_weight.col(t) = hidden[static_cast<std::size_t>(t)].cwiseProduct(d_context).rowwise().sum();
    }
    const Vector dot = cache.weight.cwiseProduct(d_weight).rowwise().sum();
    const Matrix d_score = cache.weight.cwiseProduct(d_weight - dot.replicate(1, steps));
    const Matrix d_pre = d_score.cwiseProduct((1.0 - cache.score.array().square()).matrix());

    std::vector<Matrix> d_hidden(hidden.size());
    for (Eigen::Index t = 0; t < steps; ++t) {
        const auto& h = hidden[static_cast<std::size_t>(t)];
        grad.W_att.col(0).noalias() += h.transpose() * d_pre.col(t);
        grad.b_att(0) += d_pre.col(t).sum();
        Matrix dh = cache.weight.col(t).asDiagonal() * d_context;
        dh.noalias() += d_pre.col(t) * params.W_att.col(0).transpose();
        d_hidden[static_cast<std::size_t>(t)] = std::move(dh);
    }
    return d_hidden;
}

} // namespace tcast::nn
