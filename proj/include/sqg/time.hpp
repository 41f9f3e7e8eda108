#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace sqg {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

// "2024-01-31T12:00:05Z"
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

// "2024-01-31"
std::string format_date(Date d);
Date parse_date(std::string_view text);

inline Date date_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

// 0 = Monday ... 6 = Sunday.
int iso_weekday(Date d);

// Monday of the ISO week containing d, formatted "YYYY-MM-DD".
std::string week_key(Date d);

Timestamp now_utc();

}  // namespace sqg
