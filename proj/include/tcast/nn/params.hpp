#pragma once

#include "tcast/common.hpp"

#include <string>
#include <vector>

namespace tcast::nn {

/// Multi-head graph attention weights. Head k transforms features with W[k] (d_in x d_out)
/// and scores pairs with a[k] (2 d_out): first half for the receiving node, second for the neighbor.
struct GatLayerParams {
    std::vector<Matrix> W;
    std::vector<Vector> a;
    double leaky_slope = 0.2;

    int heads() const { return static_cast<int>(W.size()); }
    Eigen::Index in_dim() const { return W.empty() ? 0 : W.front().rows(); }
    Eigen::Index head_dim() const { return W.empty() ? 0 : W.front().cols(); }
    Eigen::Index out_dim() const { return heads() * head_dim(); }
};

/// LSTM gates; W_* are H x input, U_* are H x H.
struct LstmParams {
    Matrix W_f, W_i, W_o, W_c;
    Matrix U_f, U_i, U_o, U_c;
    Vector b_f, b_i, b_o, b_c;

    Eigen::Index hidden() const { return U_f.rows(); }
    Eigen::Index input_dim() const { return W_f.cols(); }
};

/// Score per step: tanh(h_t . W_att + b_att), W_att is H x 1.
struct TemporalAttentionParams {
    Matrix W_att;
    Vector b_att;
};

/// y = W c + b, W is horizon x H.
struct DenseParams {
    Matrix W;
    Vector b;
};

struct ModelShape {
    int features = 4;
    int heads = 4;
    int head_dim = 8;
    int hidden = 64;
    int horizon = 1;
    int lookback = 96;
    double leaky_slope = 0.2;

    /// Throws ConfigError unless every size is positive and lookback >= horizon.
    void validate() const;
};

struct ForecastModel {
    ModelShape shape;
    GatLayerParams gat;
    LstmParams lstm;
    TemporalAttentionParams attention;
    DenseParams dense;

    /// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
    static ForecastModel initialize(const ModelShape& shape, std::uint64_t seed);

    /// Same shapes, all zeros. Used for gradients and optimizer moments.
    ForecastModel zeros_like() const;

    std::size_t parameter_count() const;
};

/// Visits every parameter tensor in a fixed order as fn(name, tensor). Works on const and
/// non-const models; the tensor is a Matrix or Vector reference.
template <class Model, class Fn>
void for_each_tensor(Model& model, Fn&& fn) {
    for (std::size_t k = 0; k < model.gat.W.size(); ++k) {
        fn("gat.W[" + std::to_string(k) + "]", model.gat.W[k]);
    }
    for (std::size_t k = 0; k < model.gat.a.size(); ++k) {
        fn("gat.a[" + std::to_string(k) + "]", model.gat.a[k]);
    }
    fn(std::string("lstm.W_f"), model.lstm.W_f);
    fn(std::string("lstm.W_i"), model.lstm.W_i);
    fn(std::string("lstm.W_o"), model.lstm.W_o);
    fn(std::string("lstm.W_c"), model.lstm.W_c);
    fn(std::string("lstm.U_f"), model.lstm.U_f);
    fn(std::string("lstm.U_i"), model.lstm.U_i);
    fn(std::string("lstm.U_o"), model.lstm.U_o);
    fn(std::string("lstm.U_c"), model.lstm.U_c);
    fn(std::string("lstm.b_f"), model.lstm.b_f);
    fn(std::string("lstm.b_i"), model.lstm.b_i);
    fn(std::string("lstm.b_o"), model.lstm.b_o);
    fn(std::string("lstm.b_c"), model.lstm.b_c);
    fn(std::string("attention.W_att"), model.attention.W_att);
    fn(std::string("attention.b_att"), model.attention.b_att);
    fn(std::string("dense.W"), model.dense.W);
    fn(std::string("dense.b"), model.dense.b);
}

struct TensorView {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    double* data = nullptr;

    Eigen::Index size() const { return rows * cols; }
};

/// Flat views of every tensor in for_each_tensor order.
std::vector<TensorView> tensor_views(ForecastModel& model);

} // namespace tcast::nn
