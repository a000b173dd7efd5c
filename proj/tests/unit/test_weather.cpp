#include "tcast/rng.hpp"
#include "tcast/weather.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace tcast;

namespace {

StationWeatherSeries series(const std::string& id, std::vector<double> temp, std::vector<double> wind,
                            std::vector<double> precip) {
    StationWeatherSeries s;
    s.station_id = id;
    for (std::size_t t = 0; t < temp.size(); ++t) {
        s.timestamps.push_back(static_cast<Timestamp>(t) * 3600);
    }
    s.values = {std::move(temp), std::move(wind), std::move(precip)};
    return s;
}

EdgeFeatureRow edge_row(double rt, double rw, double rp, double mean) {
    EdgeFeatureRow r;
    r.correlations.rho = {rt, rw, rp};
    r.correlations.defined = {true, true, true};
    r.mean_travel_time = mean;
    return r;
}

} // namespace

TEST_CASE("haversine distance matches the high-precision reference") {
    CHECK(haversine_km(39.9612, -82.9988, 41.4993, -81.6944) == doctest::Approx(203.29550553872052).epsilon(1e-12));
    CHECK(haversine_km(40, -83, 40, -83) == 0.0);
}

TEST_CASE("idw weighted average") {
    const std::vector<double> equal_d{2.0, 2.0, 2.0};
    const std::vector<double> temps{30, 40, 50};
    CHECK(idw_value(temps, equal_d, 2.0, 1e-6) == doctest::Approx(40.0));

    const std::vector<double> d{1.0, 3.0};
    const std::vector<double> v{30, 60};
    CHECK(idw_value(v, d, 1.0, 1e-12) == doctest::Approx(37.5).epsilon(1e-12));

    const std::vector<double> d0{0.0, 5.0};
    CHECK(std::abs(idw_value(v, d0, 2.0, 1e-6) - 30.0) < 1e-3);
}

TEST_CASE("idw_interpolate uses reporting sensors and stays within their range") {
    StationRecord st{"S", 40.0, -83.0, StationKind::CCS, 1};
    std::vector<SensorRecord> sensors{{"W1", 40.01, -83.0}, {"W2", 40.0, -83.05}, {"W3", 40.2, -83.2}};
    std::vector<WeatherRecord> recs{
        {"W1", 0, 30.0, 5.0, "No Precip", 0.0},  {"W2", 0, 40.0, 10.0, "Light", 1.0},
        {"W3", 0, 50.0, 15.0, "Heavy Rain", 3.0}, {"W1", 3600, 20.0, 2.0, "No Precip", 0.0},
    };
    const auto out = idw_interpolate(st, sensors, recs);
    REQUIRE(out.size() == 2);
    CHECK(out[WeatherVariable::temperature][0] > 30.0);
    CHECK(out[WeatherVariable::temperature][0] < 50.0);
    CHECK(out[WeatherVariable::precipitation][0] >= 0.0);
    CHECK(out[WeatherVariable::precipitation][0] <= 3.0);
    // one sensor reporting at the second hour: its value
    CHECK(out[WeatherVariable::temperature][1] == doctest::Approx(20.0));
    CHECK_THROWS_AS(idw_interpolate(st, {}, recs), DataError);
}

TEST_CASE("align_weather forward-fills hourly values") {
    const auto s = series("S", {1, 2}, {3, 4}, {0, 1});
    const auto m = align_weather(s, {-900, 0, 900, 3600, 4500});
    CHECK(m(0, 0) == 1.0);
    CHECK(m(2, 0) == 1.0);
    CHECK(m(3, 0) == 2.0);
    CHECK(m(4, 2) == 1.0);
}

TEST_CASE("pearson correlation") {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> y{2, 4, 6, 8};
    const std::vector<double> z{-1, -2, -3, -4};
    const std::vector<double> c{5, 5, 5, 5};
    CHECK(*pearson(x, y) == doctest::Approx(1.0));
    CHECK(*pearson(x, z) == doctest::Approx(-1.0));
    CHECK_FALSE(pearson(x, c).has_value());

    CounterRng rng(11, {stream::test_fixture, 7});
    std::vector<double> a(10000), b(10000);
    for (std::size_t k = 0; k < a.size(); ++k) {
        a[k] = rng.normal();
        b[k] = rng.normal();
    }
    CHECK(std::abs(*pearson(a, b)) < 0.05);
}

TEST_CASE("edge correlations against the midpoint series") {
    const auto wi = series("i", {10, 20, 30, 40}, {1, 3, 2, 5}, {0, 0, 0, 0});
    const auto wj = series("j", {12, 22, 32, 42}, {3, 1, 4, 3}, {0, 0, 0, 0});
    // midpoint temp {11, 21, 31, 41}; midpoint wind {2, 2, 3, 4}
    const std::vector<double> tt_temp{3.0 + 11, 3.0 + 21, 3.0 + 31, 3.0 + 41};
    const auto c1 = edge_correlations(tt_temp, wi, wj);
    CHECK(c1.rho[0] == doctest::Approx(1.0));
    CHECK_FALSE(c1.defined[2]);
    CHECK(c1.effective(2) == 0.0);
    const std::vector<double> tt_wind{-2, -2, -3, -4};
    CHECK(edge_correlations(tt_wind, wi, wj).rho[1] == doctest::Approx(-1.0));
}

TEST_CASE("weight normalization") {
    const auto a = normalize_weights({2.0, -1.0, 1.0});
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.25));
    CHECK(a[2] == doctest::Approx(0.25));
    const auto b = normalize_weights({0.0, 0.0, 5.0});
    CHECK(b[2] == 1.0);
    CHECK(b[0] == 0.0);
    const auto c = normalize_weights({0.0, 0.0, 0.0});
    CHECK(c[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("weather regression recovers a planted beta and falls back when degenerate") {
    CounterRng rng(5, {stream::test_fixture, 3});
    std::vector<EdgeFeatureRow> rows;
    for (int e = 0; e < 40; ++e) {
        const double rt = rng.uniform(-1, 1), rw = rng.uniform(-1, 1), rp = rng.uniform(-1, 1);
        rows.push_back(edge_row(rt, rw, rp, 12.0 + 2.0 * rt - 1.0 * rw + 0.5 * rp));
    }
    const auto w = fit_weather_weights(rows);
    CHECK_FALSE(w.fallback);
    CHECK(std::abs(w.beta[0] - 2.0) < 1e-9);
    CHECK(std::abs(w.beta[1] + 1.0) < 1e-9);
    CHECK(std::abs(w.beta[2] - 0.5) < 1e-9);
    CHECK(w.intercept == doctest::Approx(12.0));

    std::vector<EdgeFeatureRow> flat;
    for (int e = 0; e < 6; ++e) {
        flat.push_back(edge_row(0.3, 0.3, 0.0, 10.0 + e));
    }
    const auto f = fit_weather_weights(flat);
    CHECK(f.fallback);
    CHECK(f.alpha[0] == doctest::Approx(1.0 / 3));
    CHECK_THROWS_AS(fit_weather_weights(std::span<const EdgeFeatureRow>(rows.data(), 3)), DataError);
}

TEST_CASE("adjust_travel_times factors and floor") {
    const double inf = std::numeric_limits<double>::infinity();
    Matrix t(2, 2);
    t << std::nan(""), 10.0, inf, std::nan("");
    WeatherWeights w;
    w.alpha = {0.5, 0.25, 0.25};
    std::array<Matrix, kWeatherVariables> rho;
    for (auto& m : rho) {
        m = Matrix::Zero(2, 2);
    }
    CHECK(adjust_travel_times({t}, rho, w, 1.65)[0](0, 1) == 10.0);
    for (auto& m : rho) {
        m(0, 1) = 1.0;
    }
    const auto doubled = adjust_travel_times({t}, rho, w, 1.65)[0];
    CHECK(doubled(0, 1) == doctest::Approx(20.0));
    CHECK(std::isinf(doubled(1, 0)));
    for (auto& m : rho) {
        m(0, 1) = -1.0;
    }
    CHECK(adjust_travel_times({t}, rho, w, 1.65)[0](0, 1) == 1.65);
}
