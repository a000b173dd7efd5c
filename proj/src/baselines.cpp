#include "tcast/baselines.hpp"

#include "tcast/timeutil.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tcast {

HistoricalAverage HistoricalAverage::fit(const Matrix& values, const std::vector<Timestamp>& timestamps,
                                         std::size_t train_steps, int cadence_minutes) {
    if (cadence_minutes <= 0 || 1440 % cadence_minutes != 0) {
        throw ConfigError("cadence must divide a day evenly");
    }
    HistoricalAverage ha;
    ha.cadence_minutes_ = cadence_minutes;
    ha.slots_ = 1440 / cadence_minutes;
    const auto n = values.cols();
    ha.week_sum_ = Matrix::Zero(7 * ha.slots_, n);
    ha.week_count_ = Matrix::Zero(7 * ha.slots_, n);
    ha.slot_sum_ = Matrix::Zero(ha.slots_, n);
    ha.slot_count_ = Matrix::Zero(ha.slots_, n);
    Vector total = Vector::Zero(n);
    Vector count = Vector::Zero(n);
    const auto rows = std::min<std::size_t>(train_steps, static_cast<std::size_t>(values.rows()));
    for (std::size_t t = 0; t < rows; ++t) {
        const int slot = slot_of_day(timestamps[t], cadence_minutes);
        const int week = day_of_week(timestamps[t]) * ha.slots_ + slot;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = values(static_cast<Eigen::Index>(t), i);
            if (!std::isfinite(v)) {
                continue;
            }
            ha.week_sum_(week, i) += v;
            ha.week_count_(week, i) += 1;
            ha.slot_sum_(slot, i) += v;
            ha.slot_count_(slot, i) += 1;
            total(i) += v;
            count(i) += 1;
        }
    }
    if ((count.array() == 0).any()) {
        throw DataError("historical average: a station has no training observations");
    }
    ha.global_mean_ = total.cwiseQuotient(count);
    return ha;
}

Vector HistoricalAverage::predict(Timestamp ts) const {
    const int slot = slot_of_day(ts, cadence_minutes_);
    const int week = day_of_week(ts) * slots_ + slot;
    Vector out(global_mean_.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (week_count_(week, i) > 0) {
            out(i) = week_sum_(week, i) / week_count_(week, i);
        } else if (slot_count_(slot, i) > 0) {
            out(i) = slot_sum_(slot, i) / slot_count_(slot, i);
        } else {
            out(i) = global_mean_(i);
        }
    }
    return out;
}

TurningRatioTable turning_ratios(const Matrix& travel_minutes, double tau, int k) {
    if (!(tau > 0.0) || k < 1) {
        throw ConfigError("turning ratios need tau > 0 and k >= 1");
    }
    const auto n = travel_minutes.rows();
    TurningRatioTable table;
    table.tau = tau;
    table.k = k;
    table.ratios = Matrix::Zero(n, n);
    table.absorbing.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> succ;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && std::isfinite(travel_minutes(i, j))) {
                succ.push_back(j);
            }
        }
        if (succ.empty()) {
            spdlog::warn("node {} has no outgoing edges; treating it as absorbing", i);
            table.absorbing[static_cast<std::size_t>(i)] = true;
            continue;
        }
        std::stable_sort(succ.begin(), succ.end(),
                         [&](auto a, auto b) { return travel_minutes(i, a) < travel_minutes(i, b); });
        succ.resize(std::min<std::size_t>(succ.size(), static_cast<std::size_t>(k)));
        const double t0 = travel_minutes(i, succ.front());
        double total = 0.0;
        for (auto j : succ) {
            table.ratios(i, j) = std::exp(-(travel_minutes(i, j) - t0) / tau);
            total += table.ratios(i, j);
        }
        table.ratios.row(i) /= total;
    }
    return table;
}

double median_edge_travel_time(const Matrix& travel_minutes) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < travel_minutes.rows(); ++i) {
        for (Eigen::Index j = 0; j < travel_minutes.cols(); ++j) {
            if (i != j && std::isfinite(travel_minutes(i, j))) {
                v.push_back(travel_minutes(i, j));
            }
        }
    }
    if (v.empty()) {
        throw DataError("travel-time matrix has no edges");
    }
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

LinkQueueState LinkQueueState::empty(const std::vector<std::int64_t>& capacity) {
    LinkQueueState s;
    s.capacity = capacity;
    s.queue.assign(capacity.size(), 0);
    s.inflow.assign(capacity.size(), 0);
    s.last_outflow.assign(capacity.size(), 0);
    return s;
}

std::int64_t LinkQueueState::accounted() const {
    return std::accumulate(queue.begin(), queue.end(), std::int64_t{0}) +
           std::accumulate(inflow.begin(), inflow.end(), std::int64_t{0}) + exited;
}

namespace {

/// Splits `total` vehicles by weights with largest-remainder rounding (ties by index).
std::vector<std::int64_t> apportion(std::int64_t total, const std::vector<double>& weights) {
    std::vector<std::int64_t> out(weights.size(), 0);
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total == 0 || weights.empty() || !(sum > 0.0)) {
        return out;
    }
    std::vector<std::pair<double, std::size_t>> remainder;
    std::int64_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double exact = static_cast<double>(total) * weights[k] / sum;
        out[k] = static_cast<std::int64_t>(std::floor(exact));
        assigned += out[k];
        remainder.emplace_back(exact - static_cast<double>(out[k]), k);
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total; r = (r + 1) % remainder.size()) {
        ++out[remainder[r].second];
        ++assigned;
    }
    return out;
}

} // namespace

void saf_step(LinkQueueState& state, const TurningRatioTable& ratios, const std::vector<std::int64_t>& demand,
              double exit_share) {
    const auto n = state.size();
    if (demand.size() != n || static_cast<std::size_t>(ratios.ratios.rows()) != n) {
        throw DataError("SAF state, ratios and demand sizes differ");
    }
    if (!(exit_share >= 0.0 && exit_share <= 1.0)) {
        throw ConfigError("SAF exit share must be in [0, 1]");
    }
    std::vector<std::int64_t> next_inflow(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (demand[i] < 0) {
            throw DataError("SAF demand must be nonnegative");
        }
        const std::int64_t arrivals = state.inflow[i] + demand[i];
        state.injected += demand[i];
        const std::int64_t available = state.queue[i] + arrivals;
        const std::int64_t out = std::min(available, std::max<std::int64_t>(state.capacity[i], 0));
        state.queue[i] = available - out;
        state.last_outflow[i] = out;

        std::int64_t leaving = out;
        if (!ratios.absorbing[i]) {
            leaving = static_cast<std::int64_t>(std::llround(exit_share * static_cast<double>(out)));
            std::vector<double> w(n);
            for (std::size_t j = 0; j < n; ++j) {
                w[j] = ratios.ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            const auto split = apportion(out - leaving, w);
            for (std::size_t j = 0; j < n; ++j) {
                next_inflow[j] += split[j];
            }
        }
        state.exited += leaving;
    }
    state.inflow = std::move(next_inflow);
}

std::vector<double> ltm_link(const std::vector<double>& inflow, int delay, double capacity) {
    if (delay < 0 || !(capacity >= 0.0)) {
        throw ConfigError("LTM needs a nonnegative delay and capacity");
    }
    std::vector<double> upstream(inflow.size() + 1, 0.0);
    for (std::size_t t = 0; t < inflow.size(); ++t) {
        upstream[t + 1] = upstream[t] + inflow[t];
    }
    std::vector<double> out(inflow.size(), 0.0);
    double departed = 0.0;
    for (std::size_t t = 0; t < inflow.size(); ++t) {
        const double reachable =
            t + 1 >= static_cast<std::size_t>(delay) ? upstream[t + 1 - static_cast<std::size_t>(delay)] : 0.0;
        const double next = std::min(reachable, departed + capacity);
        out[t] = next - departed;
        departed = next;
    }
    return out;
}

int delay_steps(double minutes, int cadence_minutes) {
    return std::max(1, static_cast<int>(std::lround(minutes / static_cast<double>(cadence_minutes))));
}

std::vector<double> capacities_from_training(const Matrix& values, std::size_t train_steps, double pct) {
    std::vector<double> caps;
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(train_steps), values.rows());
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
        std::vector<double> v;
        for (Eigen::Index t = 0; t < rows; ++t) {
            if (std::isfinite(values(t, i))) {
                v.push_back(values(t, i));
            }
        }
        if (v.empty()) {
            throw DataError("station has no finite training counts for a capacity estimate");
        }
        caps.push_back(percentile(std::move(v), pct));
    }
    return caps;
}

namespace {

double observed(const Matrix& values, std::size_t t, Eigen::Index j) {
    const double v = values(static_cast<Eigen::Index>(t), j);
    return std::isfinite(v) ? v : 0.0;
}

void check_range(const Matrix& values, std::size_t first, std::size_t last, std::size_t stations) {
    if (first >= last || last > static_cast<std::size_t>(values.rows()) ||
        static_cast<std::size_t>(values.cols()) != stations) {
        throw DataError("baseline prediction range or station count is invalid");
    }
}

} // namespace

Matrix saf_predict(const Matrix& values, const TurningRatioTable& ratios, const std::vector<double>& capacities,
                   std::size_t first, std::size_t last, const NetworkBaselineConfig& config) {
    const auto n = capacities.size();
    check_range(values, first, last, n);
    std::vector<std::int64_t> cap;
    for (double c : capacities) {
        cap.push_back(std::max<std::int64_t>(1, std::llround(c)));
    }
    auto state = LinkQueueState::empty(cap);
    const auto start = std::max<std::size_t>(1, first > config.warmup_steps ? first - config.warmup_steps : 1);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(last - first), static_cast<Eigen::Index>(n));
    std::vector<std::int64_t> demand(n);
    for (std::size_t t = start; t < last; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                d += ratios.ratios(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
                     observed(values, t - 1, static_cast<Eigen::Index>(j));
            }
            demand[i] = std::llround(d);
        }
        saf_step(state, ratios, demand, 1.0);
        if (t >= first) {
            for (std::size_t i = 0; i < n; ++i) {
                out(static_cast<Eigen::Index>(t - first), static_cast<Eigen::Index>(i)) =
                    static_cast<double>(state.last_outflow[i]);
            }
        }
    }
    return out;
}

Matrix ltm_predict(const Matrix& values, const Matrix& travel_minutes, const TurningRatioTable& ratios,
                   const std::vector<double>& capacities, std::size_t first, std::size_t last,
                   const NetworkBaselineConfig& config) {
    const auto n = capacities.size();
    check_range(values, first, last, n);
    const auto start = first > config.warmup_steps ? first - config.warmup_steps : 0;
    const auto span = last - start;
    Matrix out(static_cast<Eigen::Index>(last - first), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> arrivals(span, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double r = ratios.ratios(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (r <= 0.0) {
                continue;
            }
            const int d = delay_steps(travel_minutes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)),
                                      config.cadence_minutes);
            if (static_cast<std::size_t>(d) >= span) {
                spdlog::warn("LTM delay of {} steps on link {}->{} exceeds the window; it contributes nothing", d, j,
                             i);
                continue;
            }
            // arrivals at step t come from upstream departures at t - d
            for (std::size_t t = 0; t < span; ++t) {
                if (start + t >= static_cast<std::size_t>(d)) {
                    const auto src = start + t - static_cast<std::size_t>(d);
                    arrivals[t] += r * observed(values, src, static_cast<Eigen::Index>(j));
                }
            }
        }
        const auto through = ltm_link(arrivals, 0, capacities[i]);
        for (std::size_t t = first; t < last; ++t) {
            out(static_cast<Eigen::Index>(t - first), static_cast<Eigen::Index>(i)) = through[t - start];
        }
    }
    return out;
}

} // namespace tcast
