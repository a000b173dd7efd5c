#include "tcast/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tcast {

double lower_median(std::vector<double> values) {
    if (values.empty()) {
        throw Error("median of empty set");
    }
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw Error("percentile of empty set");
    }
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

} // namespace tcast
