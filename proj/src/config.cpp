#include "tcast/config.hpp"

#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace tcast {

namespace {

std::string unquote(const std::string& text) {
    auto v = csv::trim(text);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

double to_double(const std::string& key, const std::string& text) {
    double out = 0.0;
    if (csv::parse_double(unquote(text), out) != csv::Parsed::ok || !std::isfinite(out)) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
    }
    return out;
}

long long to_int(const std::string& key, const std::string& text) {
    const auto v = unquote(text);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
    }
    return out;
}

int to_int32(const std::string& key, const std::string& text) {
    const auto v = to_int(key, text);
    if (v < -2147483647LL || v > 2147483647LL) {
        throw ConfigError("config key '" + key + "' is out of range");
    }
    return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
    const auto v = unquote(text);
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("config key '" + key + "' expects true or false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
    auto v = csv::trim(text);
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
        v = v.substr(1, v.size() - 2);
    }
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!csv::trim(item).empty()) {
            out.push_back(to_double(key, item));
        }
    }
    if (out.empty()) {
        throw ConfigError("config key '" + key + "' expects a nonempty list");
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"data_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = unquote(v); }},
        {"output_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = unquote(v); }},
        {"cvs", [](RunConfig& c, const std::string& k, const std::string& v) { c.cvs = to_list(k, v); }},
        {"samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.samples = to_int32(k, v); }},
        {"aggregation",
         [](RunConfig& c, const std::string&, const std::string& v) {
             try {
                 c.aggregation = parse_aggregation(unquote(v));
             } catch (const Error& e) {
                 throw ConfigError(e.what());
             }
         }},
        {"alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha = to_double(k, v); }},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const auto s = to_int(k, v);
             if (s < 0) {
                 throw ConfigError("seed must be nonnegative");
             }
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"kernel_sigma",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.kernel_sigma = to_double(k, v); }},
        {"min_availability",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.min_availability = to_double(k, v); }},
        {"per_node_intervals",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.per_node_intervals = to_bool(k, v); }},
        {"train_fraction",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train_fraction = to_double(k, v); }},
        {"validation_fraction",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.validation_fraction = to_double(k, v); }},
        {"floor_minutes",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.ingest.floor_minutes = to_double(k, v); }},
        {"max_interpolation_gap",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ingest.max_interpolation_gap = to_int32(k, v);
         }},
        {"idw_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.idw.k_nearest = to_int32(k, v); }},
        {"idw_power", [](RunConfig& c, const std::string& k, const std::string& v) { c.idw.power = to_double(k, v); }},
        {"idw_epsilon_km",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.idw.epsilon_km = to_double(k, v); }},
        {"lookback", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.lookback = to_int32(k, v); }},
        {"horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.horizon = to_int32(k, v); }},
        {"heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.heads = to_int32(k, v); }},
        {"head_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.head_dim = to_int32(k, v); }},
        {"hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.hidden = to_int32(k, v); }},
        {"leaky_slope",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.leaky_slope = to_double(k, v); }},
        {"learning_rate",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.training.learning_rate = to_double(k, v); }},
        {"batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.training.batch_size = to_int32(k, v); }},
        {"max_epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.training.max_epochs = to_int32(k, v); }},
        {"patience",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.training.patience = to_int32(k, v); }},
        {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.training.threads = to_int32(k, v); }},
        {"turning_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.turning_k = to_int32(k, v); }},
        {"turning_tau",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.turning_tau = to_double(k, v); }},
        {"parallel_scenarios",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.parallel_scenarios = to_int32(k, v); }},
        {"denormalized",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.denormalized = to_bool(k, v); }},
    };
    return table;
}

} // namespace

std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
}

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    const auto& table = setters();
    auto name = key;
    if (auto dot = name.rfind('.'); dot != std::string::npos) {
        name = name.substr(dot + 1);
    }
    const auto it = table.find(name);
    if (it == table.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(config, name, value);
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::string line;
    std::string section;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        bool quoted = false;
        for (std::size_t k = 0; k < line.size(); ++k) {
            if (line[k] == '"') {
                quoted = !quoted;
            } else if (line[k] == '#' && !quoted) {
                line.erase(k);
                break;
            }
        }
        const auto text = csv::trim(line);
        if (text.empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(number);
        if (text.front() == '[' && text.back() == ']' && text.find('=') == std::string::npos) {
            section = csv::trim(text.substr(1, text.size() - 2));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        const auto key = csv::trim(text.substr(0, eq));
        const auto value = csv::trim(text.substr(eq + 1));
        try {
            apply_config_value(base, section.empty() ? key : section + "." + key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return base;
}

void RunConfig::validate() const {
    if (cvs.empty()) {
        throw ConfigError("cvs: at least one CV level is required");
    }
    for (double cv : cvs) {
        if (!(cv > 0.0)) {
            throw ConfigError("cvs: every CV must be positive, got " + format_number(cv));
        }
    }
    if (samples < 1) {
        throw ConfigError("samples: must be at least 1");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("alpha: must lie in (0, 1)");
    }
    if (!(kernel_sigma > 0.0)) {
        throw ConfigError("kernel_sigma: must be positive");
    }
    if (!(min_availability >= 0.0 && min_availability <= 1.0)) {
        throw ConfigError("min_availability: must lie in [0, 1]");
    }
    if (!(train_fraction > 0.0) || !(validation_fraction > 0.0) || train_fraction + validation_fraction >= 1.0) {
        throw ConfigError("train_fraction and validation_fraction must be positive and leave a test split");
    }
    if (!(ingest.floor_minutes > 0.0)) {
        throw ConfigError("floor_minutes: must be positive");
    }
    if (ingest.max_interpolation_gap < 0) {
        throw ConfigError("max_interpolation_gap: must be nonnegative");
    }
    if (idw.k_nearest < 1 || !(idw.power > 0.0) || !(idw.epsilon_km > 0.0)) {
        throw ConfigError("idw settings must be positive");
    }
    if (turning_k < 1 || turning_tau < 0.0) {
        throw ConfigError("turning_k must be >= 1 and turning_tau >= 0");
    }
    if (parallel_scenarios < 1) {
        throw ConfigError("parallel_scenarios: must be at least 1");
    }
    model.validate();
    training.validate();
}

std::map<std::string, std::string> RunConfig::describe() const {
    std::string cv_list = "[";
    for (std::size_t k = 0; k < cvs.size(); ++k) {
        cv_list += (k ? ", " : "") + format_number(cvs[k]);
    }
    cv_list += "]";
    return {
        {"cvs", cv_list},
        {"samples", std::to_string(samples)},
        {"aggregation", std::string(to_string(aggregation))},
        {"alpha", format_number(alpha)},
        {"seed", std::to_string(seed)},
        {"kernel_sigma", format_number(kernel_sigma)},
        {"min_availability", format_number(min_availability)},
        {"per_node_intervals", per_node_intervals ? "true" : "false"},
        {"train_fraction", format_number(train_fraction)},
        {"validation_fraction", format_number(validation_fraction)},
        {"floor_minutes", format_number(ingest.floor_minutes)},
        {"max_interpolation_gap", std::to_string(ingest.max_interpolation_gap)},
        {"idw_k", std::to_string(idw.k_nearest)},
        {"idw_power", format_number(idw.power)},
        {"idw_epsilon_km", format_number(idw.epsilon_km)},
        {"lookback", std::to_string(model.lookback)},
        {"horizon", std::to_string(model.horizon)},
        {"heads", std::to_string(model.heads)},
        {"head_dim", std::to_string(model.head_dim)},
        {"hidden", std::to_string(model.hidden)},
        {"leaky_slope", format_number(model.leaky_slope)},
        {"learning_rate", format_number(training.learning_rate)},
        {"batch_size", std::to_string(training.batch_size)},
        {"max_epochs", std::to_string(training.max_epochs)},
        {"patience", std::to_string(training.patience)},
        {"turning_k", std::to_string(turning_k)},
        {"turning_tau", format_number(turning_tau)},
        {"denormalized", denormalized ? "true" : "false"},
    };
}

} // namespace tcast
