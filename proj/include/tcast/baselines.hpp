#pragma once

#include "tcast/common.hpp"

#include <cstdint>
#include <vector>

namespace tcast {

/// Mean flow per (day of week, time-of-day slot) bucket, falling back to the time-of-day slot
/// and then to the station's global mean when a bucket is empty.
class HistoricalAverage {
public:
    /// values: steps x stations (NaN ignored); rows [0, train_steps) are used.
    static HistoricalAverage fit(const Matrix& values, const std::vector<Timestamp>& timestamps,
                                 std::size_t train_steps, int cadence_minutes);

    /// One prediction per station.
    Vector predict(Timestamp ts) const;

private:
    int cadence_minutes_ = 15;
    int slots_ = 96;
    Matrix week_sum_, week_count_; // (7 * slots) x stations
    Matrix slot_sum_, slot_count_; // slots x stations
    Vector global_mean_;
};

/// Row i is the routing distribution of node i's outflow over its k fastest successors.
struct TurningRatioTable {
    Matrix ratios;               // n x n, rows sum to 1 or are all zero for absorbing nodes
    std::vector<bool> absorbing; // no outgoing edge: all outflow leaves the network
    double tau = 0.0;
    int k = 0;
};

/// r_ij = exp(-T_ij / tau) normalized over the k smallest finite T_ij of row i (ties by index).
/// Non-finite and diagonal entries are not edges.
TurningRatioTable turning_ratios(const Matrix& travel_minutes, double tau, int k);

/// Median of the finite off-diagonal entries.
double median_edge_travel_time(const Matrix& travel_minutes);

/// Store-and-forward state in whole vehicles.
struct LinkQueueState {
    std::vector<std::int64_t> queue;
    std::vector<std::int64_t> capacity;     // vehicles served per step
    std::vector<std::int64_t> inflow;       // routed arrivals due next step
    std::vector<std::int64_t> last_outflow;
    std::int64_t injected = 0;
    std::int64_t exited = 0;

    static LinkQueueState empty(const std::vector<std::int64_t>& capacity);
    std::size_t size() const { return queue.size(); }

    /// queues + pending inflow + exited; equals `injected` when the ledger balances.
    std::int64_t accounted() const;
};

/// One step: arrivals = pending inflow + demand; outflow = min(queue + arrivals, capacity);
/// the rest stays queued. A share exit_share of each outflow (all of it at absorbing nodes)
/// leaves the network; the remainder is split over successors by largest-remainder
/// apportionment of the turning ratios, so no vehicle is created or lost.
void saf_step(LinkQueueState& state, const TurningRatioTable& ratios, const std::vector<std::int64_t>& demand,
              double exit_share = 0.0);

/// Single link with cumulative curves: D(t) = min(U(t - delay), D(t - 1) + capacity).
/// Returns per-step outflow (differences of D).
std::vector<double> ltm_link(const std::vector<double>& inflow, int delay_steps, double capacity);

/// Free-flow delay in steps: nearest whole step, minimum 1.
int delay_steps(double minutes, int cadence_minutes);

struct NetworkBaselineConfig {
    int cadence_minutes = 15;
    std::size_t warmup_steps = 96;
};

/// Per-step station throughflow predicted from observed upstream flows for steps [first, last).
/// SAF: demand_i(t) = sum_j r_ji F_j(t - 1) served through capacity-limited queues.
/// values are raw vehicle counts (steps x stations); NaN flows count as zero demand.
Matrix saf_predict(const Matrix& values, const TurningRatioTable& ratios, const std::vector<double>& capacities,
                   std::size_t first, std::size_t last, const NetworkBaselineConfig& config = {});

/// LTM: arrival curve of node i is the cumulative sum of r_ji F_j shifted by the free-flow
/// delay of link (j, i); departures are capped by capacity.
Matrix ltm_predict(const Matrix& values, const Matrix& travel_minutes, const TurningRatioTable& ratios,
                   const std::vector<double>& capacities, std::size_t first, std::size_t last,
                   const NetworkBaselineConfig& config = {});

/// 99th percentile of each station's finite training counts.
std::vector<double> capacities_from_training(const Matrix& values, std::size_t train_steps, double pct = 99.0);

} // namespace tcast
