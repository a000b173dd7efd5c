#pragma once

#include "tcast/common.hpp"

#include <filesystem>

namespace tcast {

/// Seeded ring network of stations with daily flow profiles, persistent per-station
/// disturbances that propagate downstream, precipitation events that depress flow, and hourly
/// travel-time history. A few defects (missing and negative flows, zero travel times) are
/// planted so the cleaning path is exercised.
struct SyntheticConfig {
    int stations = 6;
    int nccs = 2; // the last `nccs` stations are N-CCS
    int days = 21;
    int sensors = 4;
    int cadence_minutes = 15;
    std::uint64_t seed = 7;
    Timestamp start = 1546819200; // 2019-01-07T00:00:00, a Monday
    bool constant_flows = false;  // every station reports the same constant count
    bool plant_defects = true;
};

/// Writes stations.csv, flows.csv, weather.csv, sensors.csv and travel_time.csv into dir.
void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticConfig& config = {});

} // namespace tcast
