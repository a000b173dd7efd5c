#include "tcast/stochastic.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

using namespace tcast;

// Reference values from tests/oracle/compute_oracles.py (mpmath, scipy.special.kolmogorov).

TEST_CASE("lognormal parameters from mean and cv") {
    const auto p = lognormal_params(10.0, 0.5);
    CHECK(p.sigma_ln == doctest::Approx(0.47238072707743884).epsilon(1e-12));
    CHECK(p.mu_ln == doctest::Approx(2.1910133173369408).epsilon(1e-12));
    const auto q = lognormal_params(10.0, 1.0);
    CHECK(q.sigma_ln == doctest::Approx(std::sqrt(std::log(2.0))).epsilon(1e-12));
    CHECK(q.mu_ln == doctest::Approx(1.956011502714073).epsilon(1e-12));
    CHECK(p.mean() == doctest::Approx(10.0));
    CHECK(p.cv() == doctest::Approx(0.5));
    CHECK_THROWS(lognormal_params(10.0, 0.0));
    CHECK_THROWS(lognormal_params(-1.0, 0.5));
}

TEST_CASE("seeded lognormal draws are reproducible and hit the moments") {
    const auto p = lognormal_params(10.0, 0.5);
    CounterRng a(2019, {stream::test_fixture, 1});
    CounterRng b(2019, {stream::test_fixture, 1});
    const auto x = sample_lognormal(p, 10000, a);
    CHECK(x == sample_lognormal(p, 10000, b));
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) {
        ss += (v - mean) * (v - mean);
    }
    const double cv = std::sqrt(ss / static_cast<double>(x.size() - 1)) / mean;
    CHECK(std::abs(mean - 10.0) / 10.0 < 0.02);
    CHECK(std::abs(cv - 0.5) / 0.5 < 0.05);
}

TEST_CASE("sample_travel_times keeps missing and absent entries") {
    const double inf = std::numeric_limits<double>::infinity();
    Matrix m(3, 3);
    m << 0, 10, inf, 12, 0, 8, inf, 9, 0;
    const auto tt = TravelTimeMatrix::from_dense(m);
    ScenarioConfig cfg;
    cfg.cv = 0.3;
    cfg.samples = 4;
    const auto s = sample_travel_times(tt, cfg);
    REQUIRE(s.size() == 4);
    CHECK(std::isinf(s[2](0, 2)));
    CHECK(std::isnan(s[1](1, 1)));
    CHECK(s[0](0, 1) > 0.0);
    CHECK(s[0](0, 1) != s[1](0, 1));
    const auto again = sample_travel_times(tt, cfg);
    for (std::size_t m = 0; m < s.size(); ++m) {
        // NaN diagonals compare unequal, so compare bit patterns
        CHECK(std::memcmp(s[m].data(), again[m].data(), sizeof(double) * static_cast<std::size_t>(s[m].size())) == 0);
    }
}

TEST_CASE("kolmogorov survival matches scipy") {
    CHECK(kolmogorov_survival(0.3) == doctest::Approx(0.9999906941986655).epsilon(1e-10));
    CHECK(kolmogorov_survival(0.8) == doctest::Approx(0.5441424115741981).epsilon(1e-10));
    CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
    CHECK(kolmogorov_survival(1.5) == doctest::Approx(0.022217962616525127).epsilon(1e-10));
    CHECK(kolmogorov_survival(2.5) == doctest::Approx(7.453306344157342e-06).epsilon(1e-8));
}

TEST_CASE("ks test on a fixed sample matches scipy") {
    const std::vector<double> x{7.1,  9.4, 10.2, 8.8,  12.5, 11.1, 9.9, 6.4,  13.7, 10.8, 9.0,  8.1, 15.2,
                                10.0, 9.6, 11.9, 7.8,  10.4, 12.1, 8.5, 9.2,  14.0, 10.6, 9.8, 11.4};
    const auto ln = ks_test(x, DistributionFamily::lognormal);
    CHECK(ln.statistic == doctest::Approx(0.05438873820060908).epsilon(1e-9));
    CHECK(ln.p_value == doctest::Approx(0.9999994756162276).epsilon(1e-9));
    const auto no = ks_test(x, DistributionFamily::normal);
    CHECK(no.statistic == doctest::Approx(0.08718549496511696).epsilon(1e-9));
    CHECK(no.p_value == doctest::Approx(0.9912859916037601).epsilon(1e-9));
    const auto ga = ks_test(x, DistributionFamily::gamma);
    CHECK(ga.statistic == doctest::Approx(0.06216122508164268).epsilon(1e-9));
    CHECK(ga.p_value == doctest::Approx(0.9999770832750576).epsilon(1e-9));
}

TEST_CASE("ks test degenerate and invalid samples") {
    const std::vector<double> constant(30, 4.0);
    CHECK(ks_test(constant, DistributionFamily::normal).statistic >= 0.5);
    std::vector<double> negative(30, 1.0);
    for (std::size_t k = 0; k < negative.size(); ++k) {
        negative[k] = static_cast<double>(k) - 3.0;
    }
    CHECK_THROWS(ks_test(negative, DistributionFamily::lognormal));
    CHECK_THROWS(ks_test(std::vector<double>(5, 1.0), DistributionFamily::normal));
    CHECK(parse_family("gamma") == DistributionFamily::gamma);
    CHECK_THROWS_AS(parse_family("weibull"), ConfigError);
}
