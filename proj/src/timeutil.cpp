#include "tcast/timeutil.hpp"

#include <chrono>
#include <cstdio>

namespace tcast {

namespace {

Timestamp floor_div(Timestamp a, Timestamp b) {
    Timestamp q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

} // namespace

std::optional<Timestamp> parse_iso8601(std::string_view text) {
    while (!text.empty() && (text.back() == 'Z' || text.back() == ' ' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (text.size() < 16) {
        return std::nullopt;
    }
    const std::string buf(text);
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    int consumed = 0;
    const int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
    if (n < 6 || (sep != 'T' && sep != ' ')) {
        return std::nullopt;
    }
    std::string_view rest = std::string_view(buf).substr(static_cast<std::size_t>(consumed));
    if (!rest.empty()) {
        if (std::sscanf(std::string(rest).c_str(), ":%2d", &s) != 1 || rest.size() != 3) {
            return std::nullopt;
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) {
        return std::nullopt;
    }
    const Timestamp days = sys_days{ymd}.time_since_epoch().count();
    return days * kSecondsPerDay + h * kSecondsPerHour + mi * kSecondsPerMinute + s;
}

std::string format_iso8601(Timestamp ts) {
    using namespace std::chrono;
    const Timestamp days = floor_div(ts, kSecondsPerDay);
    const Timestamp secs = ts - days * kSecondsPerDay;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char out[32];
    std::snprintf(out, sizeof(out), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / kSecondsPerHour), static_cast<int>((secs % kSecondsPerHour) / 60),
                  static_cast<int>(secs % 60));
    return out;
}

int hour_of_day(Timestamp ts) {
    const Timestamp secs = ts - floor_div(ts, kSecondsPerDay) * kSecondsPerDay;
    return static_cast<int>(secs / kSecondsPerHour);
}

int day_of_week(Timestamp ts) {
    // 1970-01-01 was a Thursday.
    const Timestamp days = floor_div(ts, kSecondsPerDay);
    return static_cast<int>(((days % 7) + 7 + 4) % 7);
}

int slot_of_day(Timestamp ts, int cadence_minutes) {
    const Timestamp secs = ts - floor_div(ts, kSecondsPerDay) * kSecondsPerDay;
    return static_cast<int>(secs / (static_cast<Timestamp>(cadence_minutes) * kSecondsPerMinute));
}

} // namespace tcast
