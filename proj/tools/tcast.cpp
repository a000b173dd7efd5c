#include "tcast/baselines.hpp"
#include "tcast/config.hpp"
#include "tcast/pipeline.hpp"
#include "tcast/timeutil.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace tcast;
namespace fs = std::filesystem;

struct Overrides {
    std::string config_file;
    std::string data_dir;
    std::string output_dir;
    std::vector<double> cvs;
    std::optional<int> samples;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> kernel_sigma;
    std::optional<double> min_availability;
    std::string aggregation;
    std::optional<int> lookback;
    std::optional<int> horizon;
    std::optional<int> hidden;
    std::optional<int> heads;
    std::optional<int> head_dim;
    std::optional<int> epochs;
    std::optional<int> patience;
    std::optional<int> batch_size;
    std::optional<double> learning_rate;
    std::optional<int> threads;
    std::optional<int> parallel;
    bool denormalized = false;
    bool per_node = false;
};

void add_run_options(CLI::App* cmd, Overrides& o, bool with_output) {
    cmd->add_option("--config", o.config_file, "key = value run configuration file");
    cmd->add_option("--data-dir", o.data_dir, "directory holding the five input CSV files");
    if (with_output) {
        cmd->add_option("--out", o.output_dir, "output directory");
    }
    cmd->add_option("--cv", o.cvs, "coefficient-of-variation levels")->delimiter(',');
    cmd->add_option("--samples", o.samples, "Monte-Carlo travel-time samples per CV");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--alpha", o.alpha, "conformal miscoverage level");
    cmd->add_option("--kernel-sigma", o.kernel_sigma, "Gaussian kernel spread");
    cmd->add_option("--min-availability", o.min_availability, "N-CCS availability threshold");
    cmd->add_option("--aggregation", o.aggregation, "mean or per_sample");
    cmd->add_option("--lookback", o.lookback, "input window length in steps");
    cmd->add_option("--horizon", o.horizon, "forecast steps");
    cmd->add_option("--hidden", o.hidden, "LSTM width");
    cmd->add_option("--heads", o.heads, "attention heads");
    cmd->add_option("--head-dim", o.head_dim, "width of each attention head");
    cmd->add_option("--epochs", o.epochs, "maximum training epochs");
    cmd->add_option("--patience", o.patience, "early-stopping patience");
    cmd->add_option("--batch-size", o.batch_size, "windows per mini-batch");
    cmd->add_option("--learning-rate", o.learning_rate, "Adam step size");
    cmd->add_option("--threads", o.threads, "worker threads per training batch");
    cmd->add_flag("--denormalized", o.denormalized, "also report metrics in vehicle units");
    cmd->add_flag("--per-node-intervals", o.per_node, "calibrate one quantile per station");
}

RunConfig resolve(const Overrides& o) {
    RunConfig c;
    if (!o.config_file.empty()) {
        c = load_run_config(o.config_file, c);
    }
    if (!o.data_dir.empty()) c.data_dir = o.data_dir;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    if (!o.cvs.empty()) c.cvs = o.cvs;
    if (o.samples) c.samples = *o.samples;
    if (o.seed) c.seed = *o.seed;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.kernel_sigma) c.kernel_sigma = *o.kernel_sigma;
    if (o.min_availability) c.min_availability = *o.min_availability;
    if (!o.aggregation.empty()) apply_config_value(c, "aggregation", o.aggregation);
    if (o.lookback) c.model.lookback = *o.lookback;
    if (o.horizon) c.model.horizon = *o.horizon;
    if (o.hidden) c.model.hidden = *o.hidden;
    if (o.heads) c.model.heads = *o.heads;
    if (o.head_dim) c.model.head_dim = *o.head_dim;
    if (o.epochs) c.training.max_epochs = *o.epochs;
    if (o.patience) c.training.patience = *o.patience;
    if (o.batch_size) c.training.batch_size = *o.batch_size;
    if (o.learning_rate) c.training.learning_rate = *o.learning_rate;
    if (o.threads) c.training.threads = *o.threads;
    if (o.parallel) c.parallel_scenarios = *o.parallel;
    if (o.denormalized) c.denormalized = true;
    if (o.per_node) c.per_node_intervals = true;
    c.training.seed = c.seed;
    if (c.data_dir.empty()) {
        throw ConfigError("--data-dir (or data_dir in the config file) is required");
    }
    c.validate();
    return c;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("tcast");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("TCAST_LOG_LEVEL")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("ignoring unknown TCAST_LOG_LEVEL '{}'", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

int cmd_validate(const RunConfig& c) {
    const auto data = prepare_data(c);
    std::cout << data.dataset.report.summary() << "\n";
    std::cout << "graph: " << data.graph.size() << " stations, " << data.graph.edges.size() << " edges\n";
    for (std::size_t i = 0; i < data.graph.size(); ++i) {
        std::cout << "  " << data.graph.nodes[i].station_id << " availability "
                  << format_number(data.graph.availability[i]) << "\n";
    }
    std::cout << "steps: " << data.sequence.steps() << " (train " << data.train_end << ", validation "
              << data.validation_end - data.train_end << ", test " << data.sequence.steps() - data.validation_end
              << ")\n";
    return 0;
}

int cmd_adjacency(const RunConfig& c, const std::string& dump) {
    const auto data = prepare_data(c);
    ScenarioConfig s;
    s.cv = c.cvs.front();
    s.samples = c.samples;
    s.seed = c.seed;
    s.kernel_sigma = c.kernel_sigma;
    const auto build = build_adjacency(data, s, AggregationMode::mean, c.ingest.floor_minutes);
    const auto& a = build.adjacencies.front().values;
    std::cout << "CV " << format_number(s.cv) << ", " << s.samples << " samples, " << build.edges << " edges\n";
    std::cout << "weather weights: temperature " << format_number(build.weights.alpha[0]) << ", wind "
              << format_number(build.weights.alpha[1]) << ", precipitation " << format_number(build.weights.alpha[2])
              << (build.weights.fallback ? " (equal-weight fallback)" : "") << "\n";
    std::cout << "adjacency range: [" << format_number(a.minCoeff()) << ", " << format_number(a.maxCoeff()) << "]\n";
    if (!dump.empty()) {
        write_adjacency_csv(dump, a, data.station_ids());
        std::cout << "wrote " << dump << "\n";
    }
    return 0;
}

int cmd_train(RunConfig c) {
    const auto data = prepare_data(c);
    const double cv = c.cvs.front();
    const auto outcome = run_scenario(data, c, cv, c.output_dir);
    std::cout << scenario_report(outcome.cells).to_text();
    std::cout << "best epoch " << outcome.best_epoch << " of " << outcome.epochs_run << ", q = "
              << format_number(outcome.q) << "\n";
    return 0;
}

int cmd_baselines(const RunConfig& c, const std::string& out) {
    const auto data = prepare_data(c);
    std::vector<MetricCell> cells;
    const auto base = baseline_cells(data, c, 0.0);
    for (double cv : c.cvs) {
        for (auto b : base) {
            b.cv = cv;
            cells.push_back(b);
        }
    }
    const auto report = scenario_report(cells);
    std::cout << report.to_text();
    if (!out.empty()) {
        std::ofstream f(out);
        f << report.to_json();
        if (!f) {
            throw DataError("cannot write " + out);
        }
    }
    return 0;
}

int cmd_run(const RunConfig& c) {
    const auto report = run_scenarios(c);
    std::cout << report.to_text();
    std::cout << "artifacts in " << c.output_dir.string() << "\n";
    return 0;
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::cout << MetricReport::from_json(ss.str()).to_text();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Graph-attention traffic flow forecasting with stochastic adaptive adjacency"};
    app.require_subcommand(1);

    Overrides o;
    auto* validate = app.add_subcommand("validate", "load and check the input tables");
    add_run_options(validate, o, false);

    std::string dump;
    auto* adjacency = app.add_subcommand("adjacency", "build the averaged adaptive adjacency for the first CV");
    add_run_options(adjacency, o, false);
    adjacency->add_option("--dump-adjacency", dump, "write from_id,to_id,weight triples");

    auto* train = app.add_subcommand("train", "train and calibrate one model for the first CV");
    add_run_options(train, o, true);

    PredictOptions predict_opts;
    std::string calibration, at;
    std::optional<double> predict_alpha;
    std::string checkpoint, predict_data, predict_out = "predictions.csv";
    auto* predict = app.add_subcommand("predict", "forecast from a checkpoint");
    predict->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    predict->add_option("--data-dir", predict_data, "directory holding the five input CSV files")->required();
    predict->add_option("--calibration", calibration, "calibration.json (defaults to the checkpoint's directory)");
    predict->add_option("--alpha", predict_alpha, "recalibrate for a different miscoverage");
    predict->add_option("--at", at, "first forecast timestamp (default: right after the data)");
    predict->add_option("--out", predict_out, "output CSV");

    std::string baseline_out;
    auto* baselines = app.add_subcommand("baselines", "score HA, SAF and LTM");
    add_run_options(baselines, o, false);
    baselines->add_option("--json", baseline_out, "write the metric table as JSON");

    auto* run = app.add_subcommand("run-scenarios", "full CV sweep");
    add_run_options(run, o, true);
    run->add_option("--parallel-scenarios", o.parallel, "scenarios run concurrently");

    std::string metrics_path;
    auto* report = app.add_subcommand("report", "print a metric JSON file as a table");
    report->add_option("metrics", metrics_path, "metrics.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*validate) return cmd_validate(resolve(o));
        if (*adjacency) return cmd_adjacency(resolve(o), dump);
        if (*train) return cmd_train(resolve(o));
        if (*baselines) return cmd_baselines(resolve(o), baseline_out);
        if (*run) return cmd_run(resolve(o));
        if (*report) return cmd_report(metrics_path);
        if (*predict) {
            predict_opts.checkpoint = checkpoint;
            predict_opts.data_dir = predict_data;
            predict_opts.output = predict_out;
            predict_opts.alpha = predict_alpha;
            predict_opts.calibration =
                calibration.empty() ? fs::path(checkpoint).parent_path() / "calibration.json" : fs::path(calibration);
            if (!at.empty()) {
                predict_opts.at = parse_iso8601(at);
                if (!predict_opts.at) {
                    throw ConfigError("--at is not an ISO-8601 timestamp: " + at);
                }
            }
            const auto rows = predict_to_csv(predict_opts);
            std::cout << "wrote " << rows << " rows to " << predict_out << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return 2;
    } catch (const DataError& e) {
        spdlog::error("data error: {}", e.what());
        return 3;
    } catch (const TrainingError& e) {
        spdlog::error("training failed: {}", e.what());
        return 4;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("file error: {}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
