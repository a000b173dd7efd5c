#include "tcast/ingest.hpp"
#include "tcast/timeutil.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace tcast;

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();
constexpr double inf_v = std::numeric_limits<double>::infinity();

std::filesystem::path three_station_dir(const std::string& name, const std::string& extra_flows = "",
                                        const std::string& precip = "No Precip") {
    auto dir = testing::scratch_dir(name);
    testing::write_text(dir / "stations.csv", "id,lat,lon,kind,count_total\n"
                                              "A,40.00,-83.00,CCS,8\n"
                                              "B,40.05,-83.00,CCS,8\n"
                                              "C,40.10,-83.00,NCCS,4\n");
    std::string flows = "station_id,timestamp,flow\n";
    for (int s = 0; s < 8; ++s) {
        const auto ts = format_iso8601(1546819200 + s * 900);
        flows += "A," + ts + "," + std::to_string(10 + s) + "\n";
        flows += "B," + ts + "," + std::to_string(20 + s) + "\n";
        flows += "C," + ts + "," + std::to_string(30 + s) + "\n";
    }
    testing::write_text(dir / "flows.csv", flows + extra_flows);
    testing::write_text(dir / "sensors.csv", "sensor_id,lat,lon\nW1,40.02,-83.01\n");
    testing::write_text(dir / "weather.csv", "sensor_id,timestamp,temp_f,wind_mph,precip_type\n"
                                             "W1,2019-01-07T00:00:00,30,5," + precip + "\n"
                                             "W1,2019-01-07T01:00:00,31,6,No Precip\n");
    testing::write_text(dir / "travel_time.csv", "from_id,to_id,hour,minutes\n"
                                                 "A,B,0,10\n"
                                                 "A,B,0,12\n"
                                                 "A,B,0,0.0\n"
                                                 "B,C,0,8\n"
                                                 "C,A,0,9\n");
    return dir;
}

} // namespace

TEST_CASE("load_dataset reads three stations with flows for all three") {
    const auto ds = load_dataset(DataPaths::from_directory(three_station_dir("load3")));
    REQUIRE(ds.stations.size() == 3);
    CHECK(ds.flows.stations() == 3);
    CHECK(ds.flows.steps() == 8);
    CHECK(ds.stations[2].kind == StationKind::NCCS);
    CHECK(ds.flows.values(0, 0) == doctest::Approx(10));
    CHECK(ds.flows.values(7, 2) == doctest::Approx(37));
}

TEST_CASE("negative flow rows are dropped and counted") {
    const auto ds = load_dataset(DataPaths::from_directory(three_station_dir("negflow", "A,2019-01-07T02:00:00,-5\n")));
    CHECK(ds.report.flows_negative_dropped == 1);
    CHECK(ds.flows.steps() == 8);
}

TEST_CASE("zero travel time is treated as missing and repaired") {
    const auto ds = load_dataset(DataPaths::from_directory(three_station_dir("ttzero")));
    REQUIRE(ds.report.travel_time_repairs.size() == 1);
    const auto& rep = ds.report.travel_time_repairs.front();
    CHECK(rep.original == 0.0);
    CHECK(rep.replacement == doctest::Approx(10.0));
    CHECK(ds.travel_times.minutes(0, 1) == doctest::Approx((10.0 + 12.0 + 10.0) / 3.0));
    CHECK(std::isinf(ds.travel_times.minutes(1, 0)));
}

TEST_CASE("unknown station and unknown precipitation are fatal") {
    CHECK_THROWS_AS(load_dataset(DataPaths::from_directory(three_station_dir("unkstation", "Z,2019-01-07T00:00:00,4\n"))),
                    DataError);
    CHECK_THROWS_AS(load_dataset(DataPaths::from_directory(three_station_dir("unkprecip", "", "Hail Storm"))), DataError);
}

TEST_CASE("schema mismatch is fatal") {
    auto dir = three_station_dir("schema");
    testing::write_text(dir / "sensors.csv", "sensor,latitude\nW1,40\n");
    CHECK_THROWS_AS(load_dataset(DataPaths::from_directory(dir)), DataError);
}

TEST_CASE("clean_travel_times uses the same-hour link median") {
    Matrix m = Matrix::Constant(2, 2, inf_v);
    m(0, 0) = m(1, 1) = nan_v;
    TravelTimeMatrix tt;
    tt.minutes = m;
    tt.history[{0, 1}] = {{8, 0.2}, {8, 10.0}, {8, 12.0}, {9, 5.0}};
    tt.history[{1, 0}] = {{8, 7.0}};
    std::vector<TravelTimeRepair> repairs;
    const auto out = clean_travel_times(tt, 1.65, &repairs);
    REQUIRE(repairs.size() == 1);
    CHECK(repairs[0].replacement == 10.0);
    CHECK_FALSE(repairs[0].used_row_median);
    // entry 5.0 above the floor is unchanged
    CHECK(out.history.at({0, 1})[3].minutes == 5.0);
    CHECK(out.minutes(0, 1) == doctest::Approx((10.0 + 10.0 + 12.0 + 5.0) / 4.0));
}

TEST_CASE("clean_travel_times falls back to the row median and rejects an empty row") {
    Matrix m = Matrix::Constant(3, 3, inf_v);
    TravelTimeMatrix tt;
    tt.minutes = m;
    tt.history[{0, 1}] = {{3, 0.5}};
    tt.history[{0, 2}] = {{4, 6.0}};
    tt.history[{1, 2}] = {{4, 9.0}};
    tt.history[{2, 0}] = {{4, 3.0}};
    std::vector<TravelTimeRepair> repairs;
    const auto out = clean_travel_times(tt, 1.65, &repairs);
    REQUIRE(repairs.size() == 1);
    CHECK(repairs[0].used_row_median);
    CHECK(out.minutes(0, 1) == 6.0);

    tt.history[{1, 2}] = {{4, 0.1}};
    tt.station_ids = {"A", "B", "C"};
    try {
        clean_travel_times(tt, 1.65);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("B") != std::string::npos);
    }
}

TEST_CASE("precipitation encoding") {
    CHECK(encode_precipitation("No Precip") == 0);
    CHECK(encode_precipitation("Heavy Rain") == 3);
    CHECK(encode_precipitation("Heavy Snow") == 4);
    for (int k = 0; k <= 5; ++k) {
        CHECK(encode_precipitation(decode_precipitation(k)) == k);
    }
    CHECK_THROWS_AS(encode_precipitation("Sleet?"), DataError);
}

TEST_CASE("min-max normalization") {
    Matrix v(3, 2);
    v << 0, 7, 50, 7, 100, 7;
    const auto p = NormalizationParams::fit(v, 3);
    const auto y = p.apply(v);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(1, 0) == 0.5);
    CHECK(y(2, 0) == 1.0);
    CHECK(p.constant(1));
    CHECK(testing::max_abs(y.col(1)) == 0.0);
    CHECK(testing::max_abs(p.invert(y).col(0) - v.col(0)) < 1e-12);
}

TEST_CASE("normalization statistics come from the training rows only") {
    FlowPanel panel;
    panel.timestamps = {0, 900, 1800, 2700};
    panel.values.resize(4, 1);
    panel.values << 0, 10, 5, 1000;
    const auto n = normalize_flows(panel, 2);
    CHECK(n.params.hi(0) == 10.0);
    CHECK(n.panel.values(3, 0) == doctest::Approx(100.0));
}

TEST_CASE("interpolate_gaps fills short interior gaps only") {
    Vector s(10);
    s << 1, nan_v, nan_v, 4, nan_v, nan_v, nan_v, nan_v, nan_v, 10;
    const auto filled = interpolate_gaps(s, 4);
    CHECK(filled == 2);
    CHECK(s(1) == doctest::Approx(2.0));
    CHECK(s(2) == doctest::Approx(3.0));
    CHECK(std::isnan(s(5)));

    Vector edge(3);
    edge << nan_v, 1, nan_v;
    CHECK(interpolate_gaps(edge, 4) == 0);
}
