#include "tcast/nn/model.hpp"

#include "tcast/rng.hpp"

#include <cmath>
#include <string>

namespace tcast::nn {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, CounterRng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = rng.uniform(-bound, bound);
        }
    }
    return m;
}

Vector uniform_vector(Eigen::Index size, double bound, CounterRng& rng) {
    return uniform_matrix(size, 1, bound, rng).col(0);
}

} // namespace

void ModelShape::validate() const {
    if (features < 1 || heads < 1 || head_dim < 1 || hidden < 1 || horizon < 1 || lookback < 1) {
        throw ConfigError("model sizes must all be positive");
    }
    if (lookback < horizon) {
        throw ConfigError("lookback must be at least the horizon");
    }
    if (!(leaky_slope >= 0.0) || !std::isfinite(leaky_slope)) {
        throw ConfigError("leaky slope must be a finite nonnegative number");
    }
}

ForecastModel ForecastModel::initialize(const ModelShape& shape, std::uint64_t seed) {
    shape.validate();
    ForecastModel model;
    model.shape = shape;
    CounterRng rng(seed, {stream::weight_init});

    const double gat_bound = 1.0 / std::sqrt(static_cast<double>(shape.features));
    const double att_bound = 1.0 / std::sqrt(static_cast<double>(2 * shape.head_dim));
    model.gat.leaky_slope = shape.leaky_slope;
    for (int k = 0; k < shape.heads; ++k) {
        model.gat.W.push_back(uniform_matrix(shape.features, shape.head_dim, gat_bound, rng));
    }
    for (int k = 0; k < shape.heads; ++k) {
        model.gat.a.push_back(uniform_vector(2 * shape.head_dim, att_bound, rng));
    }

    const Eigen::Index in = static_cast<Eigen::Index>(shape.heads) * shape.head_dim;
    const Eigen::Index h = shape.hidden;
    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(in + h));
    auto& l = model.lstm;
    for (Matrix* w : {&l.W_f, &l.W_i, &l.W_o, &l.W_c}) {
        *w = uniform_matrix(h, in, lstm_bound, rng);
    }
    for (Matrix* u : {&l.U_f, &l.U_i, &l.U_o, &l.U_c}) {
        *u = uniform_matrix(h, h, lstm_bound, rng);
    }
    for (Vector* b : {&l.b_f, &l.b_i, &l.b_o, &l.b_c}) {
        *b = Vector::Zero(h);
    }

    const double h_bound = 1.0 / std::sqrt(static_cast<double>(h));
    model.attention.W_att = uniform_matrix(h, 1, h_bound, rng);
    model.attention.b_att = Vector::Zero(1);
    model.dense.W = uniform_matrix(shape.horizon, h, h_bound, rng);
    model.dense.b = Vector::Zero(shape.horizon);
    return model;
}

ForecastModel ForecastModel::zeros_like() const {
    ForecastModel z = *this;
    for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
    return z;
}

std::size_t ForecastModel::parameter_count() const {
    std::size_t count = 0;
    for_each_tensor(*this, [&](const std::string&, const auto& t) { count += static_cast<std::size_t>(t.size()); });
    return count;
}

std::vector<TensorView> tensor_views(ForecastModel& model) {
    std::vector<TensorView> views;
    for_each_tensor(model, [&](const std::string& name, auto& t) {
        views.push_back(TensorView{name, t.rows(), t.cols(), t.data()});
    });
    return views;
}

void check_finite(const Matrix& values, const char* layer) {
    if (!values.allFinite()) {
        throw TrainingError(std::string("non-finite values in ") + layer + " output");
    }
}

Matrix forward(const ForecastModel& model, const std::vector<Matrix>& window, const Matrix& adjacency,
               ForwardCache* cache) {
    if (window.empty()) {
        throw DataError("forward needs a nonempty window");
    }
    for (const auto& x : window) {
        check_finite(x, "input");
    }
    std::vector<Matrix> embeddings;
    embeddings.reserve(window.size());
    if (cache) {
        cache->gat.assign(window.size(), GatCache{});
    }
    for (std::size_t t = 0; t < window.size(); ++t) {
        embeddings.push_back(gat_forward(window[t], adjacency, model.gat, cache ? &cache->gat[t] : nullptr));
        check_finite(embeddings.back(), "gat");
    }
    std::vector<Matrix> hidden = lstm_forward(embeddings, model.lstm, cache ? &cache->lstm : nullptr);
    for (const auto& h : hidden) {
        check_finite(h, "lstm");
    }
    Matrix context = temporal_attention(hidden, model.attention, cache ? &cache->attention : nullptr);
    check_finite(context, "attention");
    Matrix out = context * model.dense.W.transpose();
    out.rowwise() += model.dense.b.transpose();
    check_finite(out, "dense");
    if (cache) {
        cache->embeddings = std::move(embeddings);
        cache->hidden = std::move(hidden);
        cache->context = std::move(context);
    }
    return out;
}

void backward(const ForecastModel& model, const std::vector<Matrix>& window, const Matrix& adjacency,
              const ForwardCache& cache, const Matrix& d_output, ForecastModel& grad) {
    grad.dense.W.noalias() += d_output.transpose() * cache.context;
    grad.dense.b += d_output.colwise().sum().transpose();
    const Matrix d_context = d_output * model.dense.W;

    const std::vector<Matrix> d_hidden =
        temporal_attention_backward(cache.hidden, model.attention, cache.attention, d_context, grad.attention);
    const std::vector<Matrix> d_embeddings = lstm_backward(model.lstm, cache.lstm, d_hidden, grad.lstm);
    for (std::size_t t = 0; t < window.size(); ++t) {
        gat_backward(window[t], adjacency, model.gat, cache.gat[t], d_embeddings[t], grad.gat);
    }
}

double mse_loss(const Matrix& prediction, const Matrix& target, Matrix* d_prediction) {
    const Matrix diff = prediction - target;
    const double count = static_cast<double>(diff.size());
    if (d_prediction) {
        *d_prediction = diff * (2.0 / count);
    }
    return diff.squaredNorm() / count;
}

} // namespace tcast::nn
