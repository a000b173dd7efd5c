#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcast {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values or unreadable config files (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, inconsistent, or insufficient input data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Divergence or non-finite values during training or inference (exit code 4).
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Median using the lower middle element for even counts. Throws on empty input.
double lower_median(std::vector<double> values);

/// Linear-interpolated percentile, p in [0, 100]. Throws on empty input.
double percentile(std::vector<double> values, double p);

} // namespace tcast
