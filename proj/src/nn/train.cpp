#include "tcast/nn/train.hpp"

#include "tcast/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace tcast::nn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || batch_size < 1 || max_epochs < 1 || patience < 1 || threads < 1) {
        throw ConfigError("training schedule values must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
        throw ConfigError("Adam moments must be in [0, 1) and epsilon positive");
    }
}

std::vector<Matrix> window_inputs(const SequenceData& data, std::size_t t, int lookback) {
    const auto first = t - static_cast<std::size_t>(lookback);
    return {data.features.begin() + static_cast<std::ptrdiff_t>(first),
            data.features.begin() + static_cast<std::ptrdiff_t>(t)};
}

Matrix window_target(const SequenceData& data, std::size_t t, int horizon) {
    return data.targets.middleRows(static_cast<Eigen::Index>(t), horizon).transpose();
}

std::vector<std::size_t> valid_windows(const SequenceData& data, int lookback, int horizon, std::size_t first_step,
                                       std::size_t last_step) {
    const auto steps = std::min(last_step, data.steps());
    std::vector<bool> finite(data.steps());
    for (std::size_t s = 0; s < data.steps(); ++s) {
        finite[s] = data.features[s].allFinite() && data.targets.row(static_cast<Eigen::Index>(s)).allFinite();
    }
    std::vector<std::size_t> out;
    const auto lb = static_cast<std::size_t>(lookback);
    const auto hz = static_cast<std::size_t>(horizon);
    for (std::size_t t = std::max(first_step, lb); t + hz <= steps; ++t) {
        bool ok = true;
        for (std::size_t s = t - lb; s < t + hz && ok; ++s) {
            ok = finite[s];
        }
        if (ok) {
            out.push_back(t);
        }
    }
    return out;
}

namespace {

struct WindowGradient {
    ForecastModel grad;
    double loss = 0.0;
};

void window_gradient(const ForecastModel& model, const SequenceData& data, const Matrix& adjacency, std::size_t t,
                     WindowGradient& out) {
    const auto inputs = window_inputs(data, t, model.shape.lookback);
    const Matrix target = window_target(data, t, model.shape.horizon);
    ForwardCache cache;
    const Matrix pred = forward(model, inputs, adjacency, &cache);
    Matrix d_pred;
    out.loss = mse_loss(pred, target, &d_pred);
    for_each_tensor(out.grad, [](const std::string&, auto& g) { g.setZero(); });
    backward(model, inputs, adjacency, cache, d_pred, out.grad);
}

class Adam {
public:
    Adam(const ForecastModel& model, const TrainConfig& config)
        : config_(config), m_(model.zeros_like()), v_(model.zeros_like()) {}

    void step(ForecastModel& model, ForecastModel& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        auto p = tensor_views(model);
        auto g = tensor_views(grad);
        auto m = tensor_views(m_);
        auto v = tensor_views(v_);
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (Eigen::Index e = 0; e < p[k].size(); ++e) {
                const double gi = g[k].data[e];
                double& mi = m[k].data[e];
                double& vi = v[k].data[e];
                mi = config_.beta1 * mi + (1.0 - config_.beta1) * gi;
                vi = config_.beta2 * vi + (1.0 - config_.beta2) * gi * gi;
                p[k].data[e] -= config_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + config_.adam_epsilon);
            }
        }
    }

private:
    TrainConfig config_;
    ForecastModel m_;
    ForecastModel v_;
    long t_ = 0;
};

void add_into(ForecastModel& total, ForecastModel& part, double scale) {
    auto a = tensor_views(total);
    auto b = tensor_views(part);
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (Eigen::Index e = 0; e < a[k].size(); ++e) {
            a[k].data[e] += scale * b[k].data[e];
        }
    }
}

double validation_loss(const std::vector<Matrix>& predictions, const SequenceData& data,
                       const std::vector<std::size_t>& windows, int horizon) {
    double total = 0.0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        total += mse_loss(predictions[w], window_target(data, windows[w], horizon));
    }
    return total / static_cast<double>(windows.size());
}

} // namespace

std::vector<Matrix> predict_windows(const ForecastModel& model, const SequenceData& data, const Matrix& adjacency,
                                    const std::vector<std::size_t>& windows) {
    std::vector<Matrix> out;
    out.reserve(windows.size());
    for (auto t : windows) {
        out.push_back(forward(model, window_inputs(data, t, model.shape.lookback), adjacency));
    }
    return out;
}

std::vector<double> absolute_residuals(const std::vector<Matrix>& predictions, const SequenceData& data,
                                       const std::vector<std::size_t>& windows) {
    std::vector<double> out;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const Matrix target = window_target(data, windows[w], static_cast<int>(predictions[w].cols()));
        const Matrix diff = (predictions[w] - target).cwiseAbs();
        for (Eigen::Index i = 0; i < diff.rows(); ++i) {
            for (Eigen::Index h = 0; h < diff.cols(); ++h) {
                out.push_back(diff(i, h));
            }
        }
    }
    return out;
}

TrainResult train(ForecastModel& model, const SequenceData& data, const Matrix& adjacency,
                  const std::vector<std::size_t>& train_windows, const std::vector<std::size_t>& validation_windows,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_windows.empty()) {
        throw DataError("no complete training windows");
    }
    if (validation_windows.empty()) {
        throw DataError("no complete validation windows");
    }

    TrainResult result;
    Adam adam(model, config);
    ForecastModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_improvement = 0;

    const auto batch_cap = static_cast<std::size_t>(config.batch_size);
    std::vector<WindowGradient> buffers(std::min(batch_cap, train_windows.size()));
    for (auto& b : buffers) {
        b.grad = model.zeros_like();
    }
    ForecastModel total = model.zeros_like();

    auto diverged = [&](const std::string& what) {
        model = best;
        throw TrainingError("training diverged: " + what);
    };

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::vector<std::size_t> order = train_windows;
        CounterRng rng(config.seed, {stream::data_order, static_cast<std::uint64_t>(epoch)});
        for (std::size_t k = order.size(); k > 1; --k) {
            std::swap(order[k - 1], order[rng.below(k)]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_cap) {
            const auto count = std::min(batch_cap, order.size() - start);
            auto work = [&](std::size_t lo, std::size_t hi) {
                for (std::size_t b = lo; b < hi; ++b) {
                    window_gradient(model, data, adjacency, order[start + b], buffers[b]);
                }
            };
            const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config.threads), count);
            try {
                if (threads <= 1) {
                    work(0, count);
                } else {
                    std::vector<std::thread> pool;
                    std::vector<std::exception_ptr> errors(threads);
                    const auto chunk = (count + threads - 1) / threads;
                    for (std::size_t th = 0; th < threads; ++th) {
                        pool.emplace_back([&, th] {
                            try {
                                work(th * chunk, std::min(count, (th + 1) * chunk));
                            } catch (...) {
                                errors[th] = std::current_exception();
                            }
                        });
                    }
                    for (auto& th : pool) {
                        th.join();
                    }
                    for (auto& e : errors) {
                        if (e) {
                            std::rethrow_exception(e);
                        }
                    }
                }
            } catch (const TrainingError& e) {
                diverged(e.what());
            }

            for_each_tensor(total, [](const std::string&, auto& g) { g.setZero(); });
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < count; ++b) {
                add_into(total, buffers[b].grad, 1.0 / static_cast<double>(count));
                batch_loss += buffers[b].loss;
            }
            if (!std::isfinite(batch_loss)) {
                diverged("non-finite batch loss in epoch " + std::to_string(epoch));
            }
            epoch_loss += batch_loss;
            adam.step(model, total);
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = epoch_loss / static_cast<double>(order.size());
        std::vector<Matrix> predictions;
        try {
            predictions = predict_windows(model, data, adjacency, validation_windows);
        } catch (const TrainingError& e) {
            diverged(e.what());
        }
        record.validation_loss = validation_loss(predictions, data, validation_windows, model.shape.horizon);
        record.validation_residuals = absolute_residuals(predictions, data, validation_windows);
        if (!std::isfinite(record.validation_loss)) {
            diverged("non-finite validation loss in epoch " + std::to_string(epoch));
        }
        spdlog::debug("epoch {}: train {:.6f} validation {:.6f}", epoch, record.train_loss, record.validation_loss);

        if (record.validation_loss < best_loss) {
            best_loss = record.validation_loss;
            best = model;
            result.best_epoch = epoch;
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (on_epoch) {
            on_epoch(record, model);
        }
        result.epochs.push_back(std::move(record));
        if (since_improvement >= config.patience) {
            result.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    model = best;
    return result;
}

} // namespace tcast::nn
