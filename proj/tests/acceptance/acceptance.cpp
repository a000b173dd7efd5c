// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any criterion fails.

#include "tcast/adjacency.hpp"
#include "tcast/baselines.hpp"
#include "tcast/config.hpp"
#include "tcast/conformal.hpp"
#include "tcast/eval.hpp"
#include "tcast/nn/model.hpp"
#include "tcast/pipeline.hpp"
#include "tcast/rng.hpp"
#include "tcast/stochastic.hpp"
#include "tcast/weather.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

using namespace tcast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

constexpr double inf_v = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------

Outcome lognormal_construction() {
    bool ok = true;
    std::string detail;
    for (double cv : {0.1, 0.3, 0.5, 0.7, 1.0}) {
        const auto p = lognormal_params(10.0, cv);
        CounterRng rng(2019, {stream::test_fixture, 100, static_cast<std::uint64_t>(cv * 1000)});
        const auto x = sample_lognormal(p, 10000, rng);
        const double m = mean_of(x);
        const double emp_cv = sample_sd(x) / m;
        const double mean_err = std::abs(m - 10.0) / 10.0;
        const double cv_err = std::abs(emp_cv - cv) / cv;

        int ks_pass = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            CounterRng r(seed, {stream::test_fixture, 101, static_cast<std::uint64_t>(cv * 1000)});
            const auto y = sample_lognormal(p, 10000, r);
            if (ks_test(y, DistributionFamily::lognormal).p_value > 0.05) {
                ++ks_pass;
            }
        }
        const bool cell = mean_err < 0.02 && cv_err < 0.05 && ks_pass >= 95;
        ok = ok && cell;
        detail += fmt::format("cv={} mean_err={:.4f} cv_err={:.4f} ks={}/100; ", cv, mean_err, cv_err, ks_pass);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------

// Exchangeable data y = 1 + 2x + e, e ~ N(0, 0.5^2). A linear model is fitted by gradient
// descent on a training split; ACP recalibrates on a fixed calibration split after every epoch
// and keeps the calibration of the best epoch, split CP calibrates once on the final model.
Outcome conformal_validity() {
    const int n_train = 500, n_cal = 1000, n_test = 1000, epochs = 8, trials = 100;
    double acp_cov = 0.0, split_cov = 0.0;
    bool monotone = true;
    for (int trial = 0; trial < trials; ++trial) {
        CounterRng rng(static_cast<std::uint64_t>(trial), {stream::test_fixture, 200});
        const auto draw = [&](int n, std::vector<double>& x, std::vector<double>& y) {
            x.resize(static_cast<std::size_t>(n));
            y.resize(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) {
                x[static_cast<std::size_t>(k)] = rng.uniform(-1.0, 1.0);
                y[static_cast<std::size_t>(k)] = 1.0 + 2.0 * x[static_cast<std::size_t>(k)] + 0.5 * rng.normal();
            }
        };
        std::vector<double> xtr, ytr, xc, yc, xt, yt;
        draw(n_train, xtr, ytr);
        draw(n_cal, xc, yc);
        draw(n_test, xt, yt);

        double a = 0.0, b = 0.0;
        const auto residuals = [&](const std::vector<double>& x, const std::vector<double>& y) {
            std::vector<double> r(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) {
                r[k] = std::abs(y[k] - (a + b * x[k]));
            }
            return r;
        };
        AdaptiveConformal acp(0.1);
        std::vector<std::pair<double, double>> snapshots;
        int best_epoch = 1;
        double best_loss = inf_v;
        for (int e = 1; e <= epochs; ++e) {
            double ga = 0.0, gb = 0.0;
            for (int k = 0; k < n_train; ++k) {
                const double err = a + b * xtr[static_cast<std::size_t>(k)] - ytr[static_cast<std::size_t>(k)];
                ga += err;
                gb += err * xtr[static_cast<std::size_t>(k)];
            }
            a -= 0.5 * ga / n_train;
            b -= 0.5 * gb / n_train;
            snapshots.emplace_back(a, b);
            const auto r = residuals(xc, yc);
            double loss = 0.0;
            for (double v : r) {
                loss += v * v;
            }
            if (loss < best_loss) {
                best_loss = loss;
                best_epoch = e;
            }
            acp.recalibrate({r, e});
        }
        acp.select_epoch(best_epoch);
        std::tie(a, b) = snapshots[static_cast<std::size_t>(best_epoch - 1)];

        std::vector<double> preds(xt.size());
        for (std::size_t k = 0; k < xt.size(); ++k) {
            preds[k] = a + b * xt[k];
        }
        acp_cov += picp_mpiw(yt, acp.intervals(preds)).picp;

        const auto cal = residuals(xc, yc);
        const auto split = split_cp_baseline(cal, preds, 0.1);
        split_cov += picp_mpiw(yt, split.intervals).picp;

        monotone = monotone && conformal_quantile(cal, 0.05) >= conformal_quantile(cal, 0.10);
    }
    acp_cov /= trials;
    split_cov /= trials;
    const bool ok = acp_cov >= 0.88 && acp_cov <= 0.93 && split_cov >= 0.88 && split_cov <= 0.93 && monotone;
    return {ok, fmt::format("ACP PICP={:.4f} split PICP={:.4f} monotone={}", acp_cov, split_cov, monotone)};
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
    nn::ModelShape shape;
    shape.features = 4;
    shape.heads = 2;
    shape.head_dim = 4;
    shape.hidden = 8;
    shape.horizon = 2;
    shape.lookback = 6;
    auto model = nn::ForecastModel::initialize(shape, 31);
    // weights from U(-0.8, 0.8) in place of the fan-in default
    const auto views = nn::tensor_views(model);
    for (std::size_t t = 0; t < views.size(); ++t) {
        const auto& v = views[t];
        CounterRng r(5, {stream::test_fixture, 300, t});
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            v.data[k] = r.uniform(-0.8, 0.8);
        }
    }
    CounterRng rng(6, {stream::test_fixture, 301});
    std::vector<Matrix> window;
    for (int t = 0; t < shape.lookback; ++t) {
        Matrix f(4, shape.features);
        for (Eigen::Index k = 0; k < f.size(); ++k) {
            f.data()[k] = rng.uniform(0.0, 1.0);
        }
        window.push_back(f);
    }
    Matrix adj = Matrix::Zero(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i) {
        adj(i, (i + 1) % 4) = rng.uniform(0.2, 1.0);
        adj(i, (i + 3) % 4) = rng.uniform(0.2, 1.0);
    }
    adj = with_self_loops(adj);
    Matrix target(4, shape.horizon);
    for (Eigen::Index k = 0; k < target.size(); ++k) {
        target.data()[k] = rng.uniform(0.0, 1.0);
    }

    nn::ForwardCache cache;
    Matrix d_out;
    nn::mse_loss(nn::forward(model, window, adj, &cache), target, &d_out);
    auto grad = model.zeros_like();
    nn::backward(model, window, adj, cache, d_out, grad);

    const double h = 1e-5;
    auto params = nn::tensor_views(model);
    const auto grads = nn::tensor_views(grad);
    double worst = 0.0;
    std::string worst_name;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index k = 0; k < params[t].size(); ++k) {
            double& p = params[t].data[k];
            const double saved = p;
            p = saved + h;
            const double up = nn::mse_loss(nn::forward(model, window, adj), target);
            p = saved - h;
            const double down = nn::mse_loss(nn::forward(model, window, adj), target);
            p = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[t].data[k];
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic - numeric) / scale;
            if (rel > worst) {
                worst = rel;
                worst_name = params[t].name;
            }
        }
    }
    return {worst < 1e-4, fmt::format("max relative error {:.3e} ({}) over {} parameters", worst, worst_name,
                                      model.parameter_count())};
}

// ---------------------------------------------------------------------------

struct FixtureRun {
    MetricReport report;
    std::string metrics_bytes;
    double seconds = 0.0;
};

FixtureRun run_fixture(const fs::path& source_dir, const fs::path& out_dir) {
    auto cfg = load_run_config(source_dir / "data/fixture/run.toml");
    cfg.data_dir = source_dir / "data/fixture";
    cfg.output_dir = out_dir;
    fs::remove_all(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    FixtureRun run;
    run.report = run_scenarios(cfg);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ifstream in(out_dir / "metrics.json", std::ios::binary);
    run.metrics_bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return run;
}

Outcome learning_signal(const FixtureRun& run) {
    std::map<double, std::map<std::string, double>> by_cv;
    for (const auto& c : run.report.cells) {
        by_cv[c.cv][c.method] = c.mae;
    }
    bool ok = !by_cv.empty();
    std::string detail;
    for (const auto& [cv, m] : by_cv) {
        const auto model = m.find(kModelMethod);
        if (model == m.end() || !m.count("HA") || !m.count("SAF") || !m.count("LTM")) {
            return {false, "missing method cells at cv " + format_number(cv)};
        }
        const bool cell = model->second < m.at("HA") && model->second < m.at("SAF") && model->second < m.at("LTM");
        ok = ok && cell;
        detail += fmt::format("cv={} model={:.4f} HA={:.4f} SAF={:.4f} LTM={:.4f}; ", cv, model->second, m.at("HA"),
                              m.at("SAF"), m.at("LTM"));
    }
    detail += fmt::format("{:.0f} s", run.seconds);
    return {ok && run.seconds < 600.0, detail};
}

// ---------------------------------------------------------------------------

Outcome physics_conservation() {
    CounterRng rng(2019, {stream::test_fixture, 500});
    Matrix t = Matrix::Constant(5, 5, inf_v);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            if (i != j && rng.uniform() < 0.5) {
                t(i, j) = rng.uniform(3.0, 40.0);
            }
        }
    }
    const auto ratios = turning_ratios(t, median_edge_travel_time(t), 3);
    std::vector<std::int64_t> caps(5);
    for (auto& c : caps) {
        c = static_cast<std::int64_t>(3 + rng.below(10));
    }
    auto state = LinkQueueState::empty(caps);
    int ledger_failures = 0;
    for (int step = 0; step < 500; ++step) {
        std::vector<std::int64_t> demand(5);
        for (auto& d : demand) {
            d = static_cast<std::int64_t>(rng.below(12));
        }
        saf_step(state, ratios, demand, 0.25);
        if (state.accounted() != state.injected) {
            ++ledger_failures;
        }
    }

    int causality_failures = 0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            if (!std::isfinite(t(i, j))) {
                continue;
            }
            const int delay = delay_steps(t(i, j), 15);
            std::vector<double> in(500);
            for (auto& v : in) {
                v = rng.uniform() < 0.1 ? rng.uniform(0.0, 60.0) : rng.uniform(0.0, 8.0);
            }
            const auto out = ltm_link(in, delay, static_cast<double>(caps[static_cast<std::size_t>(j)]));
            double cum_out = 0.0;
            std::vector<double> cum_in(in.size() + 1, 0.0);
            for (std::size_t s = 0; s < in.size(); ++s) {
                cum_in[s + 1] = cum_in[s] + in[s];
            }
            for (std::size_t s = 0; s < in.size(); ++s) {
                cum_out += out[s];
                const double shifted = s + 1 >= static_cast<std::size_t>(delay) ? cum_in[s + 1 - delay] : 0.0;
                if (cum_out > shifted + 1e-9 || out[s] < -1e-12) {
                    ++causality_failures;
                }
            }
        }
    }
    return {ledger_failures == 0 && causality_failures == 0,
            fmt::format("injected={} accounted={} ledger_failures={} ltm_causality_failures={}", state.injected,
                        state.accounted(), ledger_failures, causality_failures)};
}

// ---------------------------------------------------------------------------

Outcome adjacency_properties() {
    CounterRng rng(2019, {stream::test_fixture, 600});
    int scale_fail = 0, mono_fail = 0, bound_fail = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(9));
        Matrix t = Matrix::Constant(n, n, inf_v);
        Matrix av(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                av(i, j) = rng.uniform();
                if (i != j && rng.uniform() < 0.6) {
                    t(i, j) = rng.uniform(1.65, 90.0);
                }
            }
        }
        t(0, 1) = rng.uniform(1.65, 90.0);
        const double sigma = rng.uniform(0.2, 2.0);
        const Matrix a = gaussian_kernel(t, sigma);
        const double c = std::exp(rng.uniform(-3.0, 3.0));
        if ((gaussian_kernel(c * t, sigma) - a).cwiseAbs().maxCoeff() > 1e-12) {
            ++scale_fail;
        }
        for (Eigen::Index i = 0; i < n * n; ++i) {
            for (Eigen::Index j = 0; j < n * n; ++j) {
                const double ti = t.data()[i], tj = t.data()[j];
                if (std::isfinite(ti) && std::isfinite(tj) && ti < tj && !(a.data()[i] > a.data()[j])) {
                    ++mono_fail;
                }
            }
        }
        const auto merged = merge_availability(a, AvailabilityMatrix{av});
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            const double ad = a.data()[k], aa = merged.values.data()[k];
            if (!(aa >= 0.0 && aa <= ad && ad <= 1.0)) {
                ++bound_fail;
            }
        }
    }
    return {scale_fail == 0 && mono_fail == 0 && bound_fail == 0,
            fmt::format("1000 matrices: scale_failures={} monotonicity_failures={} bound_failures={}", scale_fail,
                        mono_fail, bound_fail)};
}

// ---------------------------------------------------------------------------

Outcome weather_weight_recovery() {
    const std::array<double, 3> beta{1.5, -0.8, 0.6};
    const double intercept = 11.0;
    CounterRng rng(2019, {stream::test_fixture, 700});
    std::vector<EdgeFeatureRow> clean, noisy;
    for (int e = 0; e < 200; ++e) {
        EdgeFeatureRow r;
        r.correlations.defined = {true, true, true};
        for (std::size_t k = 0; k < 3; ++k) {
            r.correlations.rho[k] = rng.uniform(-1.0, 1.0);
        }
        r.mean_travel_time = intercept;
        for (std::size_t k = 0; k < 3; ++k) {
            r.mean_travel_time += beta[k] * r.correlations.rho[k];
        }
        clean.push_back(r);
        r.mean_travel_time += 0.01 * rng.normal();
        noisy.push_back(r);
    }
    const auto wc = fit_weather_weights(clean);
    const auto wn = fit_weather_weights(noisy);
    double clean_err = 0.0, noisy_rel = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        clean_err = std::max(clean_err, std::abs(wc.beta[k] - beta[k]));
        noisy_rel = std::max(noisy_rel, std::abs(wn.beta[k] - beta[k]) / std::abs(beta[k]));
    }
    double invariance = 0.0;
    const auto base = normalize_weights(beta);
    for (double c : {1e-3, 0.5, 2.0, 7.0, 1e4}) {
        const auto scaled = normalize_weights({c * beta[0], c * beta[1], c * beta[2]});
        for (std::size_t k = 0; k < 3; ++k) {
            invariance = std::max(invariance, std::abs(scaled[k] - base[k]));
        }
    }
    return {clean_err < 1e-6 && noisy_rel < 0.05 && invariance < 1e-12 && !wc.fallback,
            fmt::format("noiseless max |err|={:.2e} noisy max rel err={:.4f} alpha invariance={:.1e}", clean_err,
                        noisy_rel, invariance)};
}

// ---------------------------------------------------------------------------

Outcome metric_fixtures() {
    bool ok = true;
    const std::vector<double> t3{1, 2, 3};
    const auto e0 = mae_rmse(t3, t3);
    ok = ok && e0.mae == 0.0 && e0.rmse == 0.0;
    const std::vector<double> z{0, 0}, u{1, -1}, p{3, -1};
    const auto e1 = mae_rmse(z, u);
    ok = ok && e1.mae == 1.0 && e1.rmse == 1.0;
    const auto e2 = mae_rmse(z, p);
    ok = ok && e2.mae == 2.0 && e2.rmse == std::sqrt(5.0);

    const std::vector<double> truth{2, 5, 0.5};
    const std::vector<IntervalForecast> iv{{2, 1, 3}, {3, 2, 4}, {0.5, 0, 1}};
    const auto i1 = picp_mpiw(truth, iv);
    ok = ok && i1.picp == 2.0 / 3.0 && i1.mpiw == 5.0 / 3.0;
    const std::vector<double> b{4.0};
    const std::vector<IntervalForecast> on{{3, 2, 4}};
    ok = ok && picp_mpiw(b, on).picp == 1.0;
    const std::vector<IntervalForecast> zero{{2, 2, 2}, {5, 5, 5}, {0.5, 0.5, 0.5}};
    const auto i2 = picp_mpiw(truth, zero);
    ok = ok && i2.picp == 1.0 && i2.mpiw == 0.0;
    return {ok, fmt::format("rmse={:.17g} picp={:.17g} mpiw={:.17g}", e2.rmse, i1.picp, i1.mpiw)};
}

Outcome determinism(const FixtureRun& first, const FixtureRun& second) {
    const bool same = !first.metrics_bytes.empty() && first.metrics_bytes == second.metrics_bytes;
    return {same, fmt::format("metrics.json {} bytes vs {} bytes, identical={}", first.metrics_bytes.size(),
                              second.metrics_bytes.size(), same)};
}

template <class Fn>
bool report(int number, const char* name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << fmt::format("criterion {}: {} {} ({:.1f} s) {}", number, o.pass ? "PASS" : "FAIL", name, s,
                             o.detail)
              << std::endl;
    return o.pass;
}

} // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::err);
    const fs::path source_dir = argc > 1 ? fs::path(argv[1]) : fs::path(TCAST_SOURCE_DIR);
    const fs::path work = fs::temp_directory_path() / "tcast_acceptance";

    bool all = true;
    all &= report(1, "lognormal construction", lognormal_construction);
    all &= report(2, "conformal validity", conformal_validity);
    all &= report(3, "end-to-end gradients", gradient_check);

    FixtureRun first, second;
    std::string fixture_error;
    try {
        first = run_fixture(source_dir, work / "run1");
        second = run_fixture(source_dir, work / "run2");
    } catch (const std::exception& e) {
        fixture_error = e.what();
    }
    const auto fixture_guard = [&](auto&& fn) {
        return [&, fn]() -> Outcome {
            if (!fixture_error.empty()) {
                return {false, "fixture run failed: " + fixture_error};
            }
            return fn();
        };
    };
    all &= report(4, "learning signal", fixture_guard([&] { return learning_signal(first); }));
    all &= report(5, "physics conservation", physics_conservation);
    all &= report(6, "adjacency properties", adjacency_properties);
    all &= report(7, "weather-weight recovery", weather_weight_recovery);
    all &= report(8, "metric fixtures", metric_fixtures);
    all &= report(9, "determinism", fixture_guard([&] { return determinism(first, second); }));
    return all ? 0 : 1;
}
