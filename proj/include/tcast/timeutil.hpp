#pragma once

#include "tcast/common.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace tcast {

constexpr Timestamp kSecondsPerMinute = 60;
constexpr Timestamp kSecondsPerHour = 3600;
constexpr Timestamp kSecondsPerDay = 86400;

/// Parses "YYYY-MM-DDTHH:MM[:SS][Z]" (a space may replace the T). Returns nullopt on malformed input.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SS".
std::string format_iso8601(Timestamp ts);

/// Hour of day in [0, 24).
int hour_of_day(Timestamp ts);

/// Day of week in [0, 7), Sunday = 0.
int day_of_week(Timestamp ts);

/// Slot index within the day for the given cadence, e.g. [0, 96) for 15-minute steps.
int slot_of_day(Timestamp ts, int cadence_minutes);

} // namespace tcast
