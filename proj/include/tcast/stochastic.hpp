#pragma once

#include "tcast/common.hpp"
#include "tcast/ingest.hpp"
#include "tcast/rng.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace tcast {

/// One Monte-Carlo travel-time scenario.
struct ScenarioConfig {
    double cv = 0.5;
    int samples = 50;
    std::uint64_t seed = 2019;
    double kernel_sigma = 0.5;

    /// Throws ConfigError unless cv > 0, samples >= 1, kernel_sigma > 0.
    void validate() const;
};

struct LogNormalParams {
    double mu_ln = 0.0;
    double sigma_ln = 0.0;

    double mean() const;
    double cv() const;
};

/// Log-normal parameters whose distribution has exactly the given mean and coefficient of variation.
LogNormalParams lognormal_params(double mean_minutes, double cv);

/// Draws `count` values from stream (seed, path).
std::vector<double> sample_lognormal(const LogNormalParams& params, std::size_t count, CounterRng& rng);

/// M independent travel-time matrices. Entry (i, j) of sample m comes from the stream
/// (seed, travel_time_sample, i, j, m), so results do not depend on evaluation order.
/// Missing and absent entries are carried through unchanged.
std::vector<Matrix> sample_travel_times(const TravelTimeMatrix& mean_matrix, const ScenarioConfig& config);

enum class DistributionFamily { lognormal, normal, gamma };

DistributionFamily parse_family(std::string_view name);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample two-sided Kolmogorov-Smirnov test against a distribution of the given family
/// fitted to the samples: normal and gamma by matching mean and variance, log-normal by
/// matching mean and variance of the log samples. Requires at least 20 samples.
KsResult ks_test(std::span<const double> samples, DistributionFamily family);

} // namespace tcast
