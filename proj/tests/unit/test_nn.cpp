#include "tcast/nn/checkpoint.hpp"
#include "tcast/nn/model.hpp"
#include "tcast/nn/train.hpp"
#include "tcast/rng.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <functional>

using namespace tcast;
using namespace tcast::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, CounterRng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
        m.data()[k] = scale * rng.uniform(-1.0, 1.0);
    }
    return m;
}

/// Max relative error between analytic and central-difference gradients over every entry
/// of the given tensors. Denominator is max(|a| + |n|, 1e-6) to keep near-zero entries sane.
double fd_max_relative_error(const std::vector<double*>& params, const std::vector<Eigen::Index>& sizes,
                             const std::vector<const double*>& grads, const std::function<double()>& loss) {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index k = 0; k < sizes[t]; ++k) {
            double& p = params[t][k];
            const double saved = p;
            p = saved + h;
            const double up = loss();
            p = saved - h;
            const double down = loss();
            p = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[t][k];
            const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

GatLayerParams random_gat(int heads, Eigen::Index in, Eigen::Index out, CounterRng& rng) {
    GatLayerParams p;
    for (int k = 0; k < heads; ++k) {
        p.W.push_back(random_matrix(in, out, rng, 0.8));
        p.a.push_back(random_matrix(2 * out, 1, rng, 0.8));
    }
    return p;
}

LstmParams random_lstm(Eigen::Index in, Eigen::Index hidden, CounterRng& rng) {
    LstmParams p;
    for (auto* w : {&p.W_f, &p.W_i, &p.W_o, &p.W_c}) {
        *w = random_matrix(hidden, in, rng, 0.6);
    }
    for (auto* u : {&p.U_f, &p.U_i, &p.U_o, &p.U_c}) {
        *u = random_matrix(hidden, hidden, rng, 0.6);
    }
    for (auto* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c}) {
        *b = random_matrix(hidden, 1, rng, 0.3);
    }
    return p;
}

LstmParams zero_lstm(Eigen::Index in, Eigen::Index hidden) {
    LstmParams p;
    for (auto* w : {&p.W_f, &p.W_i, &p.W_o, &p.W_c}) {
        *w = Matrix::Zero(hidden, in);
    }
    for (auto* u : {&p.U_f, &p.U_i, &p.U_o, &p.U_c}) {
        *u = Matrix::Zero(hidden, hidden);
    }
    for (auto* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c}) {
        *b = Vector::Zero(hidden);
    }
    return p;
}

Matrix ring_adjacency(Eigen::Index n, CounterRng& rng) {
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        a(i, (i + 1) % n) = rng.uniform(0.2, 1.0);
        a((i + 1) % n, i) = rng.uniform(0.2, 1.0);
    }
    return a;
}

bool same_weights(ForecastModel a, ForecastModel b) {
    const auto va = tensor_views(a);
    const auto vb = tensor_views(b);
    if (va.size() != vb.size()) {
        return false;
    }
    for (std::size_t t = 0; t < va.size(); ++t) {
        if (va[t].name != vb[t].name || va[t].size() != vb[t].size() ||
            !std::equal(va[t].data, va[t].data + va[t].size(), vb[t].data)) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("gat with only a self-loop applies elu to the projection") {
    CounterRng rng(1, {stream::test_fixture, 10});
    auto p = random_gat(2, 3, 2, rng);
    const Matrix f = random_matrix(2, 3, rng);
    GatCache cache;
    const Matrix out = gat_forward(f, Matrix::Identity(2, 2), p, &cache);
    for (int k = 0; k < 2; ++k) {
        CHECK(cache.alpha[static_cast<std::size_t>(k)](0, 0) == 1.0);
        const Matrix z = f * p.W[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < 2; ++c) {
            const double x = z(1, c);
            const double elu = x > 0 ? x : std::expm1(x);
            CHECK(out(1, k * 2 + c) == doctest::Approx(elu).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS(gat_forward(f, Matrix::Zero(2, 2), p), DataError);
}

TEST_CASE("gat symmetric neighbors share attention and rows sum to one") {
    CounterRng rng(2, {stream::test_fixture, 11});
    auto p = random_gat(3, 2, 4, rng);
    Matrix f(3, 2);
    f << 0.3, -0.2, 0.7, 0.1, 0.7, 0.1;
    Matrix a(3, 3);
    a << 0, 0.5, 0.5, 1, 1, 0, 1, 0, 1;
    GatCache cache;
    gat_forward(f, a, p, &cache);
    for (const auto& alpha : cache.alpha) {
        CHECK(alpha(0, 1) == doctest::Approx(0.5));
        CHECK(alpha(0, 0) == 0.0);
        for (Eigen::Index i = 0; i < 3; ++i) {
            CHECK(std::abs(alpha.row(i).sum() - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("gat gradients match finite differences") {
    CounterRng rng(3, {stream::test_fixture, 12});
    auto p = random_gat(2, 3, 4, rng);
    Matrix f = random_matrix(4, 3, rng);
    const Matrix adj = ring_adjacency(4, rng);
    const Matrix weight = random_matrix(4, 8, rng);
    const auto loss = [&] { return (gat_forward(f, adj, p).array() * weight.array()).sum(); };
    GatCache cache;
    gat_forward(f, adj, p, &cache);
    GatLayerParams grad;
    for (int k = 0; k < 2; ++k) {
        grad.W.push_back(Matrix::Zero(3, 4));
        grad.a.push_back(Vector::Zero(8));
    }
    const Matrix df = gat_backward(f, adj, p, cache, weight, grad);
    std::vector<double*> ps{f.data()};
    std::vector<Eigen::Index> sizes{f.size()};
    std::vector<const double*> gs{df.data()};
    for (int k = 0; k < 2; ++k) {
        ps.push_back(p.W[static_cast<std::size_t>(k)].data());
        sizes.push_back(p.W[static_cast<std::size_t>(k)].size());
        gs.push_back(grad.W[static_cast<std::size_t>(k)].data());
        ps.push_back(p.a[static_cast<std::size_t>(k)].data());
        sizes.push_back(p.a[static_cast<std::size_t>(k)].size());
        gs.push_back(grad.a[static_cast<std::size_t>(k)].data());
    }
    CHECK(fd_max_relative_error(ps, sizes, gs, loss) < 1e-4);
}

TEST_CASE("lstm with zero parameters") {
    const auto p = zero_lstm(2, 3);
    CounterRng rng(4, {stream::test_fixture, 13});
    std::vector<Matrix> xs{random_matrix(2, 2, rng), random_matrix(2, 2, rng)};
    for (const auto& h : lstm_forward(xs, p)) {
        CHECK(testing::max_abs(h) == 0.0);
    }
    LstmCache cache;
    const LstmState init{Matrix::Zero(2, 3), Matrix::Constant(2, 3, 0.8)};
    lstm_forward({Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, p, &cache, init);
    CHECK(cache.c[0](0, 0) == doctest::Approx(0.4));
    CHECK(cache.c[1](1, 2) == doctest::Approx(0.2));
}

TEST_CASE("lstm gates stay in range and gradients match finite differences") {
    CounterRng rng(5, {stream::test_fixture, 14});
    auto p = random_lstm(3, 4, rng);
    std::vector<Matrix> xs;
    for (int t = 0; t < 3; ++t) {
        xs.push_back(random_matrix(2, 3, rng));
    }
    std::vector<Matrix> w;
    for (int t = 0; t < 3; ++t) {
        w.push_back(random_matrix(2, 4, rng));
    }
    const auto loss = [&] {
        const auto hs = lstm_forward(xs, p);
        double s = 0.0;
        for (std::size_t t = 0; t < hs.size(); ++t) {
            s += (hs[t].array() * w[t].array()).sum();
        }
        return s;
    };
    LstmCache cache;
    lstm_forward(xs, p, &cache);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(cache.f[t].minCoeff() > 0.0);
        CHECK(cache.f[t].maxCoeff() < 1.0);
        CHECK(cache.o[t].minCoeff() > 0.0);
        CHECK(cache.i[t].maxCoeff() < 1.0);
    }
    LstmParams grad = zero_lstm(3, 4);
    const auto dx = lstm_backward(p, cache, w, grad);
    std::vector<double*> ps;
    std::vector<Eigen::Index> sizes;
    std::vector<const double*> gs;
    const auto add = [&](auto& param, const auto& g) {
        ps.push_back(param.data());
        sizes.push_back(param.size());
        gs.push_back(g.data());
    };
    add(p.W_f, grad.W_f);
    add(p.W_i, grad.W_i);
    add(p.W_o, grad.W_o);
    add(p.W_c, grad.W_c);
    add(p.U_f, grad.U_f);
    add(p.U_i, grad.U_i);
    add(p.U_o, grad.U_o);
    add(p.U_c, grad.U_c);
    add(p.b_f, grad.b_f);
    add(p.b_i, grad.b_i);
    add(p.b_o, grad.b_o);
    add(p.b_c, grad.b_c);
    for (std::size_t t = 0; t < 3; ++t) {
        add(xs[t], dx[t]);
    }
    CHECK(fd_max_relative_error(ps, sizes, gs, loss) < 1e-4);
}

TEST_CASE("temporal attention pooling") {
    CounterRng rng(6, {stream::test_fixture, 15});
    TemporalAttentionParams p{random_matrix(3, 1, rng), Vector::Constant(1, 0.1)};
    const Matrix h = random_matrix(2, 3, rng);
    CHECK(testing::max_abs(temporal_attention({h}, p) - h) < 1e-15);
    CHECK(testing::max_abs(temporal_attention({h, h, h}, p) - h) < 1e-14);
    std::vector<Matrix> hs{random_matrix(2, 3, rng), random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
    TemporalAttentionCache cache;
    temporal_attention(hs, p, &cache);
    for (Eigen::Index i = 0; i < 2; ++i) {
        CHECK(std::abs(cache.weight.row(i).sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("model forward shape, determinism and finite guard") {
    ModelShape shape{4, 2, 3, 5, 2, 4, 0.2};
    auto model = ForecastModel::initialize(shape, 9);
    CounterRng rng(7, {stream::test_fixture, 16});
    std::vector<Matrix> window;
    for (int t = 0; t < 4; ++t) {
        window.push_back(random_matrix(3, 4, rng));
    }
    const Matrix adj = ring_adjacency(3, rng);
    const Matrix y = forward(model, window, adj);
    CHECK(y.rows() == 3);
    CHECK(y.cols() == 2);
    CHECK(y == forward(model, window, adj));
    window[1](0, 0) = std::nan("");
    try {
        forward(model, window, adj);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("input") != std::string::npos);
    }
    CHECK_THROWS_AS((ModelShape{4, 2, 3, 5, 5, 4, 0.2}.validate()), ConfigError);
}

TEST_CASE("mse loss and gradient") {
    Matrix p(1, 2), t(1, 2), d;
    p << 1, 3;
    t << 0, 0;
    CHECK(mse_loss(p, t, &d) == doctest::Approx(5.0));
    CHECK(d(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("windows and training") {
    SequenceData data;
    const int steps = 120;
    data.targets.resize(steps, 2);
    for (int s = 0; s < steps; ++s) {
        Matrix f(2, 4);
        const double v0 = 0.5 + 0.4 * std::sin(0.3 * s), v1 = 0.5 + 0.4 * std::cos(0.3 * s);
        f << v0, 0.1, 0.2, 0.0, v1, 0.1, 0.2, 0.0;
        data.features.push_back(f);
        data.targets(s, 0) = v0;
        data.targets(s, 1) = v1;
    }
    data.targets(50, 1) = std::nan("");
    const auto w = valid_windows(data, 6, 1, 0, 80);
    CHECK(w.front() == 6);
    CHECK(std::find(w.begin(), w.end(), 50) == w.end());
    CHECK(std::find(w.begin(), w.end(), 53) == w.end());
    CHECK(window_inputs(data, 10, 6).size() == 6);
    CHECK(window_target(data, 10, 1)(1, 0) == data.targets(10, 1));

    ModelShape shape{4, 2, 4, 8, 1, 6, 0.2};
    const Matrix adj = Matrix::Ones(2, 2);
    TrainConfig cfg;
    cfg.max_epochs = 6;
    cfg.batch_size = 8;
    cfg.learning_rate = 5e-3;
    const auto val = valid_windows(data, 6, 1, 80, 100);
    auto m1 = ForecastModel::initialize(shape, 3);
    std::vector<int> seen;
    const auto r1 = train(m1, data, adj, w, val, cfg, [&](const EpochRecord& e, const ForecastModel&) {
        seen.push_back(e.epoch);
        CHECK(e.validation_residuals.size() == val.size() * 2);
    });
    CHECK(seen.size() == r1.epochs.size());
    CHECK(r1.epochs.back().train_loss < r1.epochs.front().train_loss);

    cfg.threads = 3;
    auto m2 = ForecastModel::initialize(shape, 3);
    const auto r2 = train(m2, data, adj, w, val, cfg);
    CHECK(same_weights(m1, m2));
    CHECK(r2.best_epoch == r1.best_epoch);

    const auto preds = predict_windows(m1, data, adj, val);
    const auto res = absolute_residuals(preds, data, val);
    CHECK(res.size() == val.size() * 2);
    CHECK(std::abs(res[0] - r1.epochs[static_cast<std::size_t>(r1.best_epoch - 1)].validation_residuals[0]) < 1e-12);
}

TEST_CASE("patience stops training") {
    SequenceData data;
    data.targets.resize(60, 1);
    for (int s = 0; s < 60; ++s) {
        Matrix f = Matrix::Zero(1, 4);
        f(0, 0) = (s % 2 == 0) ? 0.0 : 1.0;
        data.features.push_back(f);
        data.targets(s, 0) = f(0, 0);
    }
    ModelShape shape{4, 1, 2, 3, 1, 2, 0.2};
    auto model = ForecastModel::initialize(shape, 1);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.patience = 2;
    cfg.learning_rate = 0.5;
    const auto train_w = valid_windows(data, 2, 1, 0, 40);
    const auto val_w = valid_windows(data, 2, 1, 40, 60);
    try {
        const auto r = train(model, data, Matrix::Ones(1, 1), train_w, val_w, cfg);
        CHECK(static_cast<int>(r.epochs.size()) <= r.best_epoch + cfg.patience);
    } catch (const TrainingError&) {
        // divergence at this learning rate is also acceptable; weights were restored
    }
}

TEST_CASE("checkpoint round trip and corruption") {
    ModelShape shape{4, 2, 3, 5, 1, 4, 0.2};
    Checkpoint ck{ForecastModel::initialize(shape, 11), {}};
    ck.meta.station_ids = {"A", "B"};
    ck.meta.flow_norm.lo = Vector::Constant(2, 1.0);
    ck.meta.flow_norm.hi = Vector::Constant(2, 9.0);
    ck.meta.weather_norm.lo = Vector::Zero(3);
    ck.meta.weather_norm.hi = Vector::Ones(3);
    ck.meta.adjacency = Matrix::Identity(2, 2);
    ck.meta.cv = 0.3;
    const auto dir = testing::scratch_dir("ckpt");
    save_checkpoint(dir / "m.ckpt", ck);
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(same_weights(back.model, ck.model));
    CHECK(back.meta.station_ids == ck.meta.station_ids);
    CHECK(back.meta.cv == 0.3);
    CHECK(back.meta.adjacency == ck.meta.adjacency);

    auto bytes = testing::read_text(dir / "m.ckpt");
    testing::write_text(dir / "trunc.ckpt", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), DataError);
    bytes[0] = 'X';
    testing::write_text(dir / "magic.ckpt", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), DataError);
}
