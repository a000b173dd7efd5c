#include "tcast/stochastic.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace tcast {

void ScenarioConfig::validate() const {
    if (!(cv > 0.0) || !std::isfinite(cv)) {
        throw ConfigError("coefficient of variation must be positive");
    }
    if (samples < 1) {
        throw ConfigError("sample count must be at least 1");
    }
    if (!(kernel_sigma > 0.0) || !std::isfinite(kernel_sigma)) {
        throw ConfigError("kernel sigma must be positive");
    }
}

double LogNormalParams::mean() const {
    return std::exp(mu_ln + 0.5 * sigma_ln * sigma_ln);
}

double LogNormalParams::cv() const {
    return std::sqrt(std::expm1(sigma_ln * sigma_ln));
}

LogNormalParams lognormal_params(double mean_minutes, double cv) {
    if (!(mean_minutes > 0.0) || !std::isfinite(mean_minutes)) {
        throw ConfigError("log-normal mean must be positive");
    }
    if (!(cv > 0.0) || !std::isfinite(cv)) {
        throw ConfigError("coefficient of variation must be positive");
    }
    const double var_ln = std::log1p(cv * cv);
    return LogNormalParams{std::log(mean_minutes) - 0.5 * var_ln, std::sqrt(var_ln)};
}

std::vector<double> sample_lognormal(const LogNormalParams& params, std::size_t count, CounterRng& rng) {
    std::vector<double> out(count);
    for (auto& v : out) {
        v = std::exp(params.mu_ln + params.sigma_ln * rng.normal());
    }
    return out;
}

std::vector<Matrix> sample_travel_times(const TravelTimeMatrix& mean_matrix, const ScenarioConfig& config) {
    config.validate();
    const auto n = mean_matrix.minutes.rows();
    const double sigma_ln = std::sqrt(std::log1p(config.cv * config.cv));
    std::vector<Matrix> out(static_cast<std::size_t>(config.samples), mean_matrix.minutes);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double mean = mean_matrix.minutes(i, j);
            if (!std::isfinite(mean)) {
                continue;
            }
            const double mu_ln = std::log(mean) - 0.5 * sigma_ln * sigma_ln;
            for (int m = 0; m < config.samples; ++m) {
                CounterRng rng(config.seed, {stream::travel_time_sample, static_cast<std::uint64_t>(i),
                                             static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(m)});
                out[static_cast<std::size_t>(m)](i, j) = std::exp(mu_ln + sigma_ln * rng.normal());
            }
        }
    }
    return out;
}

DistributionFamily parse_family(std::string_view name) {
    if (name == "lognormal") {
        return DistributionFamily::lognormal;
    }
    if (name == "normal") {
        return DistributionFamily::normal;
    }
    if (name == "gamma") {
        return DistributionFamily::gamma;
    }
    throw ConfigError("unknown distribution family '" + std::string(name) + "'");
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) {
        return 1.0;
    }
    if (lambda < 1.18) {
        // Small-lambda form: 1 - sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2)).
        const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
        const double y8 = std::pow(y, 8);
        const double sum = y * (1.0 + y8 * (1.0 + y8 * y8 * (1.0 + y8 * y8 * y8)));
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-17) {
            break;
        }
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, DistributionFamily family) {
    const auto n = samples.size();
    if (n < 20) {
        throw DataError("KS test needs at least 20 samples");
    }
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    if (family != DistributionFamily::normal && x.front() <= 0.0) {
        throw DataError("KS test against a positive family requires positive samples");
    }

    const auto moments = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (const double e : v) {
            mean += e;
        }
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (const double e : v) {
            var += (e - mean) * (e - mean);
        }
        var /= static_cast<double>(v.size() - 1);
        return std::pair{mean, var};
    };

    const double sqrt_n = std::sqrt(static_cast<double>(n));
    if (x.front() == x.back()) {
        // Point mass: no continuous CDF gets closer than 1/2 in sup norm.
        return KsResult{0.5, kolmogorov_survival(0.5 * sqrt_n)};
    }

    std::function<double(double)> cdf;
    switch (family) {
    case DistributionFamily::normal: {
        const auto [mean, var] = moments(x);
        const double sd = std::sqrt(var);
        cdf = [mean, sd](double v) { return 0.5 * std::erfc(-(v - mean) / (sd * std::numbers::sqrt2)); };
        break;
    }
    case DistributionFamily::lognormal: {
        std::vector<double> logs(x.size());
        std::transform(x.begin(), x.end(), logs.begin(), [](double v) { return std::log(v); });
        const auto [mu, var] = moments(logs);
        const double sd = std::sqrt(var);
        cdf = [mu, sd](double v) { return 0.5 * std::erfc(-(std::log(v) - mu) / (sd * std::numbers::sqrt2)); };
        break;
    }
    case DistributionFamily::gamma: {
        const auto [mean, var] = moments(x);
        const double shape = mean * mean / var;
        const double scale = var / mean;
        cdf = [shape, scale](double v) { return boost::math::gamma_p(shape, v / scale); };
        break;
    }
    }

    double d = 0.0;
    const double nd = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - static_cast<double>(i) / nd, static_cast<double>(i + 1) / nd - f});
    }
    return KsResult{d, kolmogorov_survival(sqrt_n * d)};
}

} // namespace tcast
