#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace tcast {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Derives a stream key from a seed and a path of integers (e.g. {tag, i, j, m}).
/// Different paths give statistically independent streams, so draws do not depend
/// on evaluation order.
std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Counter-based generator: output n of stream k is mix64(k + (n + 1) * golden_gamma).
/// Portable and reproducible; satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
        : key_(derive_stream(seed, path)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the paired deviate is cached.
    double normal();

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream tags, one per consumer, so that no two subsystems share draws.
namespace stream {
inline constexpr std::uint64_t travel_time_sample = 1;
inline constexpr std::uint64_t weather_correlation = 2;
inline constexpr std::uint64_t weight_init = 3;
inline constexpr std::uint64_t data_order = 4;
inline constexpr std::uint64_t synthetic = 5;
inline constexpr std::uint64_t test_fixture = 99;
} // namespace stream

} // namespace tcast
