#include "tcast/pipeline.hpp"

#include "tcast/baselines.hpp"
#include "tcast/nn/checkpoint.hpp"
#include "tcast/stochastic.hpp"
#include "tcast/timeutil.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace tcast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageTimer {
public:
    explicit StageTimer(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        const auto secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        spdlog::info("{} finished in {:.2f} s", name_, secs);
    }

private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

void write_failed_marker(const fs::path& dir, const std::string& message) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir / ".failed", std::ios::trunc);
    out << message << "\n";
}

std::vector<double> flatten(const std::vector<Matrix>& predictions) {
    std::vector<double> out;
    for (const auto& p : predictions) {
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            for (Eigen::Index h = 0; h < p.cols(); ++h) {
                out.push_back(p(i, h));
            }
        }
    }
    return out;
}

/// Node of each flattened target (window-major, node, horizon).
std::vector<std::size_t> node_labels(std::size_t windows, std::size_t nodes, int horizon) {
    std::vector<std::size_t> out;
    out.reserve(windows * nodes * static_cast<std::size_t>(horizon));
    for (std::size_t w = 0; w < windows; ++w) {
        for (std::size_t i = 0; i < nodes; ++i) {
            for (int h = 0; h < horizon; ++h) {
                out.push_back(i);
            }
        }
    }
    return out;
}

MetricCell score(const std::string& method, double cv, const std::vector<double>& truth,
                 const std::vector<double>& predictions, const std::vector<IntervalForecast>* intervals,
                 const PreparedData& data, const RunConfig& config) {
    MetricCell cell;
    cell.method = method;
    cell.cv = cv;
    const auto err = mae_rmse(truth, predictions);
    cell.n = err.n;
    cell.mae = err.mae;
    cell.rmse = err.rmse;
    if (intervals) {
        const auto im = picp_mpiw(truth, *intervals);
        cell.picp = im.picp;
        cell.mpiw = im.mpiw;
    }
    if (config.denormalized) {
        const auto nodes = data.graph.size();
        const auto labels = node_labels(truth.size() / (nodes * static_cast<std::size_t>(config.model.horizon)), nodes,
                                        config.model.horizon);
        std::vector<double> t(truth.size()), p(truth.size());
        double width = 0.0;
        for (std::size_t k = 0; k < truth.size(); ++k) {
            t[k] = data.flow_norm.denormalize(labels[k], truth[k]);
            p[k] = data.flow_norm.denormalize(labels[k], predictions[k]);
            if (intervals) {
                width += data.flow_norm.denormalize(labels[k], (*intervals)[k].upper) -
                         data.flow_norm.denormalize(labels[k], (*intervals)[k].lower);
            }
        }
        const auto ev = mae_rmse(t, p);
        cell.mae_vehicles = ev.mae;
        cell.rmse_vehicles = ev.rmse;
        if (intervals) {
            cell.mpiw_vehicles = width / static_cast<double>(truth.size());
        }
    }
    return cell;
}

std::string number(double v) {
    return format_number(v);
}

} // namespace

std::vector<std::string> PreparedData::station_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : graph.nodes) {
        ids.push_back(s.station_id);
    }
    return ids;
}

NormalizationParams fit_weather_normalization(const std::vector<Matrix>& weather_steps, std::size_t train_steps) {
    if (weather_steps.empty()) {
        throw DataError("no weather series to normalize");
    }
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(train_steps), weather_steps.front().rows());
    Matrix stacked(rows * static_cast<Eigen::Index>(weather_steps.size()), static_cast<Eigen::Index>(kWeatherVariables));
    for (std::size_t i = 0; i < weather_steps.size(); ++i) {
        stacked.middleRows(static_cast<Eigen::Index>(i) * rows, rows) = weather_steps[i].topRows(rows);
    }
    return NormalizationParams::fit(stacked, static_cast<std::size_t>(stacked.rows()));
}

nn::SequenceData build_sequence(const Matrix& flows, const std::vector<Matrix>& weather_steps,
                                const NormalizationParams& flow_norm, const NormalizationParams& weather_norm) {
    const auto steps = flows.rows();
    const auto nodes = flows.cols();
    if (static_cast<Eigen::Index>(weather_steps.size()) != nodes ||
        static_cast<Eigen::Index>(flow_norm.size()) != nodes) {
        throw DataError("flow, weather and normalization station counts differ");
    }
    nn::SequenceData seq;
    seq.targets = flow_norm.apply(flows);
    std::vector<Matrix> weather_norm_steps;
    for (const auto& w : weather_steps) {
        if (w.rows() != steps) {
            throw DataError("weather series is not aligned with the flow steps");
        }
        weather_norm_steps.push_back(weather_norm.apply(w));
    }
    seq.features.reserve(static_cast<std::size_t>(steps));
    for (Eigen::Index s = 0; s < steps; ++s) {
        Matrix x(nodes, 1 + static_cast<Eigen::Index>(kWeatherVariables));
        for (Eigen::Index i = 0; i < nodes; ++i) {
            x(i, 0) = seq.targets(s, i);
            x.block(i, 1, 1, static_cast<Eigen::Index>(kWeatherVariables)) =
                weather_norm_steps[static_cast<std::size_t>(i)].row(s);
        }
        seq.features.push_back(std::move(x));
    }
    return seq;
}

PreparedData prepare_data(const RunConfig& config) {
    config.validate();
    if (config.model.features != 1 + static_cast<int>(kWeatherVariables)) {
        throw ConfigError("the model takes exactly 4 node features (flow, temperature, wind, precipitation)");
    }
    StageTimer timer("data preparation");
    PreparedData data;
    const Dataset full = load_dataset(DataPaths::from_directory(config.data_dir), config.ingest);
    spdlog::info("{}", full.report.summary());
    const auto graph = build_graph(full.stations, full.travel_times);
    data.graph = filter_stations(graph, config.min_availability);
    if (data.graph.size() < graph.size()) {
        spdlog::info("availability filter kept {} of {} stations", data.graph.size(), graph.size());
    }
    data.dataset = full.subset(data.graph.source_index);
    data.availability = availability_matrix(data.graph);

    const auto steps = data.dataset.flows.steps();
    data.train_end = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(steps)));
    data.validation_end = static_cast<std::size_t>(
        std::floor((config.train_fraction + config.validation_fraction) * static_cast<double>(steps)));
    data.flow_norm = normalize_flows(data.dataset.flows, data.train_end).params;

    std::vector<Matrix> weather_steps;
    for (const auto& node : data.graph.nodes) {
        data.station_weather.push_back(idw_interpolate(node, data.dataset.sensors, data.dataset.weather, config.idw));
        weather_steps.push_back(align_weather(data.station_weather.back(), data.dataset.flows.timestamps));
    }
    data.weather_norm = fit_weather_normalization(weather_steps, data.train_end);
    data.sequence = build_sequence(data.dataset.flows.values, weather_steps, data.flow_norm, data.weather_norm);

    const int lb = config.model.lookback;
    const int hz = config.model.horizon;
    data.train_windows = nn::valid_windows(data.sequence, lb, hz, 0, data.train_end);
    data.validation_windows = nn::valid_windows(data.sequence, lb, hz, data.train_end, data.validation_end);
    data.test_windows = nn::valid_windows(data.sequence, lb, hz, data.validation_end, steps);
    spdlog::info("windows: {} train, {} validation, {} test", data.train_windows.size(),
                 data.validation_windows.size(), data.test_windows.size());
    if (data.train_windows.empty() || data.validation_windows.empty() || data.test_windows.empty()) {
        throw DataError("not enough complete windows for a train/validation/test split (" +
                        std::to_string(steps) + " steps, lookback " + std::to_string(lb) + ")");
    }
    return data;
}

AdjacencyBuild build_adjacency(const PreparedData& data, const ScenarioConfig& scenario, AggregationMode mode,
                               double floor_minutes) {
    scenario.validate();
    StageTimer timer("adjacency for CV " + number(scenario.cv));
    AdjacencyBuild out;
    out.edges = data.graph.edges.size();
    const auto samples = sample_travel_times(data.dataset.travel_times, scenario);

    const Timestamp train_cutoff = data.dataset.flows.timestamps.at(data.train_end);
    std::vector<StationWeatherSeries> train_weather;
    for (const auto& series : data.station_weather) {
        const auto last = static_cast<std::size_t>(
            std::lower_bound(series.timestamps.begin(), series.timestamps.end(), train_cutoff) -
            series.timestamps.begin());
        train_weather.push_back(series.slice(0, std::max<std::size_t>(last, std::min<std::size_t>(2, series.size()))));
    }
    const auto rows = compute_edge_features(data.graph, data.dataset.travel_times, train_weather, scenario);
    out.weights = fit_weather_weights(rows);
    spdlog::info("weather weights alpha = ({:.4f}, {:.4f}, {:.4f}){}", out.weights.alpha[0], out.weights.alpha[1],
                 out.weights.alpha[2], out.weights.fallback ? " (equal-weight fallback)" : "");
    const auto correlations = correlation_matrices(rows, data.graph.size());
    const auto adjusted = adjust_travel_times(samples, correlations, out.weights, floor_minutes);

    std::vector<AdaptiveAdjacency> per_sample;
    for (std::size_t m = 0; m < adjusted.size(); ++m) {
        auto a = merge_availability(gaussian_kernel(adjusted[m], scenario.kernel_sigma), data.availability);
        a.scenario = scenario;
        a.sample_index = static_cast<int>(m);
        per_sample.push_back(std::move(a));
    }
    out.adjacencies = aggregate_samples(per_sample, mode);
    return out;
}

std::vector<double> gather_targets(const Matrix& step_values, const std::vector<std::size_t>& windows, int horizon) {
    std::vector<double> out;
    out.reserve(windows.size() * static_cast<std::size_t>(step_values.cols()) * static_cast<std::size_t>(horizon));
    for (auto t : windows) {
        for (Eigen::Index i = 0; i < step_values.cols(); ++i) {
            for (int h = 0; h < horizon; ++h) {
                out.push_back(step_values(static_cast<Eigen::Index>(t) + h, i));
            }
        }
    }
    return out;
}

std::vector<MetricCell> baseline_cells(const PreparedData& data, const RunConfig& config, double cv) {
    StageTimer timer("baselines");
    const auto& flows = data.dataset.flows;
    const auto steps = flows.steps();
    const auto first = data.validation_end;
    const int hz = config.model.horizon;
    const auto truth = gather_targets(data.sequence.targets, data.test_windows, hz);

    // Step-indexed predictions over [0, steps); only test rows are filled and read.
    auto normalized_gather = [&](const Matrix& raw_rows) {
        Matrix full = Matrix::Constant(static_cast<Eigen::Index>(steps), raw_rows.cols(),
                                       std::numeric_limits<double>::quiet_NaN());
        full.bottomRows(raw_rows.rows()) = raw_rows;
        return gather_targets(data.flow_norm.apply(full), data.test_windows, hz);
    };

    std::vector<MetricCell> cells;
    const auto ha = HistoricalAverage::fit(flows.values, flows.timestamps, data.train_end, flows.cadence_minutes);
    Matrix ha_rows(static_cast<Eigen::Index>(steps - first), flows.values.cols());
    for (std::size_t t = first; t < steps; ++t) {
        ha_rows.row(static_cast<Eigen::Index>(t - first)) = ha.predict(flows.timestamps[t]).transpose();
    }
    cells.push_back(score("HA", cv, truth, normalized_gather(ha_rows), nullptr, data, config));

    const Matrix& minutes = data.dataset.travel_times.minutes;
    const double tau = config.turning_tau > 0.0 ? config.turning_tau : median_edge_travel_time(minutes);
    const auto ratios = turning_ratios(minutes, tau, config.turning_k);
    const auto caps = capacities_from_training(flows.values, data.train_end);
    NetworkBaselineConfig net;
    net.cadence_minutes = flows.cadence_minutes;
    cells.push_back(score("SAF", cv, truth, normalized_gather(saf_predict(flows.values, ratios, caps, first, steps, net)),
                          nullptr, data, config));
    cells.push_back(score("LTM", cv, truth,
                          normalized_gather(ltm_predict(flows.values, minutes, ratios, caps, first, steps, net)), nullptr,
                          data, config));
    return cells;
}

std::string scenario_directory_name(double cv) {
    return "cv_" + format_number(cv);
}

namespace {

struct TrainedRun {
    std::vector<MetricCell> cells;
    int best_epoch = 0;
    int epochs_run = 0;
    double q = 0.0;
    std::vector<fs::path> files;
};

std::string calibration_json(const AdaptiveConformal& acp, const std::vector<double>& per_node_q, double split_q) {
    json j;
    j["alpha"] = acp.alpha();
    j["q"] = acp.q();
    j["epoch"] = acp.calibration().epoch;
    j["n"] = acp.calibration().residuals.size();
    j["split_q"] = split_q;
    if (!per_node_q.empty()) {
        j["per_node_q"] = per_node_q;
    }
    json history = json::array();
    for (const auto& h : acp.history()) {
        history.push_back({{"epoch", h.epoch}, {"n", h.n}, {"q", h.q}});
    }
    j["history"] = std::move(history);
    j["residuals"] = acp.calibration().residuals;
    return j.dump(2) + "\n";
}

void write_predictions(const fs::path& path, const PreparedData& data, const std::vector<std::size_t>& windows,
                       int horizon, const std::vector<IntervalForecast>& intervals) {
    std::ostringstream out;
    out << "station_id,timestamp,point,lower,upper\n";
    const auto nodes = data.graph.size();
    std::size_t k = 0;
    for (auto t : windows) {
        for (std::size_t i = 0; i < nodes; ++i) {
            for (int h = 0; h < horizon; ++h, ++k) {
                const auto& iv = intervals[k];
                out << data.graph.nodes[i].station_id << ','
                    << format_iso8601(data.dataset.flows.timestamps[t + static_cast<std::size_t>(h)]) << ','
                    << number(data.flow_norm.denormalize(i, iv.point)) << ','
                    << number(data.flow_norm.denormalize(i, iv.lower)) << ','
                    << number(data.flow_norm.denormalize(i, iv.upper)) << '\n';
            }
        }
    }
    write_text(path, out.str());
}

TrainedRun train_and_score(const PreparedData& data, const RunConfig& config, double cv, const Matrix& adjacency,
                           const fs::path& dir) {
    TrainedRun run;
    fs::create_directories(dir);
    const Matrix adj = with_self_loops(adjacency);
    auto model = nn::ForecastModel::initialize(config.model, config.seed);
    AdaptiveConformal acp(config.alpha);

    nn::Checkpoint ckpt;
    ckpt.meta.station_ids = data.station_ids();
    ckpt.meta.flow_norm = data.flow_norm;
    ckpt.meta.weather_norm = data.weather_norm;
    ckpt.meta.adjacency = adj;
    ckpt.meta.cadence_minutes = data.dataset.flows.cadence_minutes;
    ckpt.meta.cv = cv;

    nn::TrainResult result;
    {
        StageTimer timer("training for CV " + number(cv));
        try {
            result = nn::train(model, data.sequence, adj, data.train_windows, data.validation_windows, config.training,
                               [&](const nn::EpochRecord& rec, const nn::ForecastModel&) {
                                   const double q = acp.recalibrate({rec.validation_residuals, rec.epoch});
                                   spdlog::info("CV {} epoch {}: train {:.5f} validation {:.5f} q {:.5f}", number(cv),
                                                rec.epoch, rec.train_loss, rec.validation_loss, q);
                               });
        } catch (const TrainingError&) {
            ckpt.model = model;
            nn::save_checkpoint(dir / "model.ckpt", ckpt);
            throw;
        }
    }
    run.best_epoch = result.best_epoch;
    run.epochs_run = static_cast<int>(result.epochs.size());
    acp.select_epoch(result.best_epoch);
    run.q = acp.q();

    ckpt.model = model;
    nn::save_checkpoint(dir / "model.ckpt", ckpt);
    run.files.push_back(dir / "model.ckpt");

    const int hz = config.model.horizon;
    const auto nodes = data.graph.size();
    const auto truth = gather_targets(data.sequence.targets, data.test_windows, hz);
    const auto predictions = flatten(nn::predict_windows(model, data.sequence, adj, data.test_windows));
    const auto test_nodes = node_labels(data.test_windows.size(), nodes, hz);

    // split CP: one post-hoc calibration pass of the final model
    const auto val_pred = nn::predict_windows(model, data.sequence, adj, data.validation_windows);
    const auto val_residuals = nn::absolute_residuals(val_pred, data.sequence, data.validation_windows);
    const auto split = split_cp_baseline(val_residuals, predictions, config.alpha);

    std::vector<double> per_node_q;
    std::vector<IntervalForecast> intervals;
    if (config.per_node_intervals) {
        const auto val_nodes = node_labels(data.validation_windows.size(), nodes, hz);
        per_node_q = per_node_quantiles(acp.calibration().residuals, val_nodes, nodes, config.alpha);
        intervals = build_intervals(predictions, per_node_q, test_nodes);
    } else {
        intervals = acp.intervals(predictions);
    }
    run.cells.push_back(score(kModelMethod, cv, truth, predictions, &intervals, data, config));
    if (!split.intervals.empty()) {
        run.cells.push_back(score(kSplitMethod, cv, truth, predictions, &split.intervals, data, config));
    }

    write_text(dir / "calibration.json", calibration_json(acp, per_node_q, split.q));
    run.files.push_back(dir / "calibration.json");
    write_predictions(dir / "predictions.csv", data, data.test_windows, hz, intervals);
    run.files.push_back(dir / "predictions.csv");
    return run;
}

MetricCell average_cells(const std::vector<MetricCell>& cells) {
    MetricCell out = cells.front();
    const double n = static_cast<double>(cells.size());
    auto avg = [&](auto field) {
        double s = 0.0;
        for (const auto& c : cells) {
            s += field(c);
        }
        return s / n;
    };
    out.mae = avg([](const MetricCell& c) { return c.mae; });
    out.rmse = avg([](const MetricCell& c) { return c.rmse; });
    auto avg_opt = [&](auto field) -> std::optional<double> {
        if (!field(cells.front())) {
            return std::nullopt;
        }
        return avg([&](const MetricCell& c) { return field(c).value_or(0.0); });
    };
    out.picp = avg_opt([](const MetricCell& c) { return c.picp; });
    out.mpiw = avg_opt([](const MetricCell& c) { return c.mpiw; });
    out.mae_vehicles = avg_opt([](const MetricCell& c) { return c.mae_vehicles; });
    out.rmse_vehicles = avg_opt([](const MetricCell& c) { return c.rmse_vehicles; });
    out.mpiw_vehicles = avg_opt([](const MetricCell& c) { return c.mpiw_vehicles; });
    return out;
}

struct ScenarioArtifacts {
    ScenarioOutcome outcome;
    std::vector<fs::path> files;
};

ScenarioArtifacts run_scenario_tracked(const PreparedData& data, const RunConfig& config, double cv,
                                       const fs::path& dir, const std::vector<MetricCell>& baselines) {
    ScenarioArtifacts art;
    auto& outcome = art.outcome;
    outcome.cv = cv;
    outcome.directory = dir;
    try {
        fs::create_directories(dir);
        fs::remove(dir / ".failed");
        ScenarioConfig scenario;
        scenario.cv = cv;
        scenario.samples = config.samples;
        scenario.seed = config.seed;
        scenario.kernel_sigma = config.kernel_sigma;
        const auto build = build_adjacency(data, scenario, config.aggregation, config.ingest.floor_minutes);

        if (config.aggregation == AggregationMode::mean) {
            write_adjacency_csv(dir / "adjacency.csv", build.adjacencies.front().values, data.station_ids());
            art.files.push_back(dir / "adjacency.csv");
            auto run = train_and_score(data, config, cv, build.adjacencies.front().values, dir);
            outcome.cells = run.cells;
            outcome.best_epoch = run.best_epoch;
            outcome.epochs_run = run.epochs_run;
            outcome.q = run.q;
            art.files.insert(art.files.end(), run.files.begin(), run.files.end());
        } else {
            std::vector<std::vector<MetricCell>> by_method;
            double q_sum = 0.0;
            for (const auto& a : build.adjacencies) {
                const auto sub = dir / ("sample_" + std::to_string(*a.sample_index));
                fs::create_directories(sub);
                write_adjacency_csv(sub / "adjacency.csv", a.values, data.station_ids());
                art.files.push_back(sub / "adjacency.csv");
                auto run = train_and_score(data, config, cv, a.values, sub);
                art.files.insert(art.files.end(), run.files.begin(), run.files.end());
                by_method.resize(run.cells.size());
                for (std::size_t k = 0; k < run.cells.size(); ++k) {
                    by_method[k].push_back(run.cells[k]);
                }
                q_sum += run.q;
                outcome.epochs_run += run.epochs_run;
            }
            for (const auto& cells : by_method) {
                outcome.cells.push_back(average_cells(cells));
            }
            outcome.q = q_sum / static_cast<double>(build.adjacencies.size());
        }

        std::vector<MetricCell> cells = outcome.cells;
        for (auto b : baselines) {
            b.cv = cv;
            cells.push_back(b);
        }
        write_text(dir / "metrics.json", scenario_report(cells).to_json());
        art.files.push_back(dir / "metrics.json");
    } catch (const std::exception& e) {
        write_failed_marker(dir, e.what());
        throw;
    }
    return art;
}

} // namespace

ScenarioOutcome run_scenario(const PreparedData& data, const RunConfig& config, double cv,
                             const fs::path& directory) {
    return run_scenario_tracked(data, config, cv, directory, baseline_cells(data, config, cv)).outcome;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

MetricReport run_scenarios(const RunConfig& config) {
    config.validate();
    const auto& out_dir = config.output_dir;
    fs::create_directories(out_dir);
    fs::remove(out_dir / ".failed");
    try {
        const PreparedData data = prepare_data(config);
        const auto baselines = baseline_cells(data, config, 0.0);

        std::vector<std::optional<ScenarioArtifacts>> results(config.cvs.size());
        std::vector<std::exception_ptr> errors(config.cvs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t k = next++; k < config.cvs.size(); k = next++) {
                const double cv = config.cvs[k];
                try {
                    results[k] = run_scenario_tracked(data, config, cv, out_dir / scenario_directory_name(cv), baselines);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        };
        const auto workers =
            std::min<std::size_t>(static_cast<std::size_t>(config.parallel_scenarios), config.cvs.size());
        if (workers <= 1) {
            for (std::size_t k = 0; k < config.cvs.size(); ++k) {
                const double cv = config.cvs[k];
                results[k] = run_scenario_tracked(data, config, cv, out_dir / scenario_directory_name(cv), baselines);
            }
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back(worker);
            }
            for (auto& t : pool) {
                t.join();
            }
            for (auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }

        std::vector<MetricCell> cells;
        std::vector<fs::path> files;
        json scenarios = json::array();
        for (const auto& r : results) {
            const auto& o = r->outcome;
            cells.insert(cells.end(), o.cells.begin(), o.cells.end());
            for (auto b : baselines) {
                b.cv = o.cv;
                cells.push_back(b);
            }
            files.insert(files.end(), r->files.begin(), r->files.end());
            scenarios.push_back({{"cv", o.cv},
                                 {"directory", fs::relative(o.directory, out_dir).generic_string()},
                                 {"best_epoch", o.best_epoch},
                                 {"epochs", o.epochs_run},
                                 {"q", o.q}});
        }
        const auto report = scenario_report(cells);
        write_text(out_dir / "metrics.json", report.to_json());
        write_text(out_dir / "report.txt", report.to_text());
        files.push_back(out_dir / "metrics.json");
        files.push_back(out_dir / "report.txt");

        json manifest;
        manifest["tool"] = "tcast";
        manifest["version"] = kToolVersion;
        manifest["seed"] = config.seed;
        json cfg;
        for (const auto& [k, v] : config.describe()) {
            cfg[k] = v;
        }
        manifest["config"] = std::move(cfg);
        manifest["stations"] = data.station_ids();
        manifest["scenarios"] = std::move(scenarios);
        json file_list = json::array();
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            file_list.push_back({{"path", fs::relative(f, out_dir).generic_string()},
                                 {"bytes", fs::file_size(f)},
                                 {"fnv1a64", file_digest(f)}});
        }
        manifest["files"] = std::move(file_list);
        write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
        return report;
    } catch (const std::exception& e) {
        write_failed_marker(out_dir, e.what());
        throw;
    }
}

std::size_t predict_to_csv(const PredictOptions& options) {
    const auto ckpt = nn::load_checkpoint(options.checkpoint);
    const auto& meta = ckpt.meta;
    const auto& shape = ckpt.model.shape;
    const Dataset full = load_dataset(DataPaths::from_directory(options.data_dir));
    std::vector<std::size_t> keep;
    for (const auto& id : meta.station_ids) {
        keep.push_back(full.station_index(id));
    }
    const Dataset ds = full.subset(keep);
    if (ds.flows.cadence_minutes != meta.cadence_minutes) {
        throw DataError("data cadence differs from the checkpoint's");
    }

    std::vector<Matrix> weather_steps;
    for (const auto& s : ds.stations) {
        weather_steps.push_back(align_weather(idw_interpolate(s, ds.sensors, ds.weather), ds.flows.timestamps));
    }
    const auto seq = build_sequence(ds.flows.values, weather_steps, meta.flow_norm, meta.weather_norm);
    const auto steps = seq.steps();
    const Timestamp cadence = static_cast<Timestamp>(meta.cadence_minutes) * kSecondsPerMinute;

    std::size_t t = steps;
    if (options.at) {
        const auto first = ds.flows.timestamps.front();
        if (*options.at < first || (*options.at - first) % cadence != 0) {
            throw DataError("--at must be a step timestamp of the data");
        }
        t = static_cast<std::size_t>((*options.at - first) / cadence);
    }
    if (t < static_cast<std::size_t>(shape.lookback) || t > steps) {
        throw DataError("not enough history before the forecast step for a lookback of " +
                        std::to_string(shape.lookback));
    }
    const auto window = nn::window_inputs(seq, t, shape.lookback);
    for (const auto& x : window) {
        if (!x.allFinite()) {
            throw DataError("the input window contains unrecoverable missing flows");
        }
    }
    const Matrix pred = nn::forward(ckpt.model, window, meta.adjacency);

    std::optional<double> q;
    std::vector<double> per_node_q;
    if (options.calibration && fs::exists(*options.calibration)) {
        std::ifstream in(*options.calibration);
        json cal;
        try {
            cal = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError("malformed calibration file: " + std::string(e.what()));
        }
        const double stored_alpha = cal.at("alpha").get<double>();
        if (options.alpha && std::abs(*options.alpha - stored_alpha) > 1e-15) {
            const auto residuals = cal.at("residuals").get<std::vector<double>>();
            q = conformal_quantile(residuals, *options.alpha);
        } else {
            q = cal.at("q").get<double>();
            if (cal.contains("per_node_q")) {
                per_node_q = cal.at("per_node_q").get<std::vector<double>>();
            }
        }
        if (!std::isfinite(*q)) {
            spdlog::warn("calibration gives an unbounded interval; writing points only");
            q.reset();
        }
    } else {
        spdlog::warn("no calibration file; writing point forecasts without intervals");
    }

    std::ostringstream out;
    out << "station_id,timestamp,point,lower,upper\n";
    const Timestamp base = ds.flows.timestamps.front() + static_cast<Timestamp>(t) * cadence;
    std::size_t rows = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        const auto node = static_cast<std::size_t>(i);
        for (Eigen::Index h = 0; h < pred.cols(); ++h) {
            const double p = pred(i, h);
            out << meta.station_ids[node] << ',' << format_iso8601(base + h * cadence) << ','
                << number(meta.flow_norm.denormalize(node, p)) << ',';
            if (q) {
                const double qi = per_node_q.empty() ? *q : per_node_q.at(node);
                out << number(meta.flow_norm.denormalize(node, p - qi)) << ','
                    << number(meta.flow_norm.denormalize(node, p + qi));
            } else {
                out << ',';
            }
            out << '\n';
            ++rows;
        }
    }
    write_text(options.output, out.str());
    return rows;
}

} // namespace tcast
