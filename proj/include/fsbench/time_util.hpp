#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace fsbench {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

// RFC 3339 date-time, e.g. 2023-02-01T09:30:00Z or 2023-02-01T09:30:00.250-05:00.
// Fractional seconds are truncated. Throws Error(parse) on malformed input.
Timestamp parse_timestamp(std::string_view text);

// ISO calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);

// Canonical UTC form: YYYY-MM-DDTHH:MM:SSZ.
std::string format_timestamp(Timestamp ts);
std::string format_date(Date d);

inline Date calendar_date(Timestamp ts) { return std::chrono::floor<std::chrono::days>(ts); }

Timestamp utc_now();

}  // namespace fsbench
