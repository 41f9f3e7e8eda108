#include "sqg/time.hpp"

#include <charconv>
#include <cstdio>

#include "sqg/error.hpp"

namespace sqg {

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc() || ptr != first + len) {
    throw Error(ErrorCode::kInvalidArgument, "bad date/time '" + std::string(text) + "'");
  }
  return value;
}

Date checked_date(int y, int m, int d, std::string_view text) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorCode::kInvalidArgument, "bad date '" + std::string(text) + "'");
  return sys_days{ymd};
}

}  // namespace

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const Date d = date_of(t);
  const year_month_day ymd{d};
  const hh_mm_ss hms{t - d};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text[19] != 'Z') {
    throw Error(ErrorCode::kInvalidArgument, "bad timestamp '" + std::string(text) + "'");
  }
  const Date d = checked_date(parse_fixed(text, 0, 4), parse_fixed(text, 5, 2),
                              parse_fixed(text, 8, 2), text);
  const int hh = parse_fixed(text, 11, 2);
  const int mm = parse_fixed(text, 14, 2);
  const int ss = parse_fixed(text, 17, 2);
  if (hh > 23 || mm > 59 || ss > 59) {
    throw Error(ErrorCode::kInvalidArgument, "bad timestamp '" + std::string(text) + "'");
  }
  return Timestamp{d} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss};
}

std::string format_date(Date d) { return format_timestamp(Timestamp{d}).substr(0, 10); }

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::kInvalidArgument, "bad date '" + std::string(text) + "'");
  }
  return checked_date(parse_fixed(text, 0, 4), parse_fixed(text, 5, 2), parse_fixed(text, 8, 2),
                      text);
}

int iso_weekday(Date d) {
  return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

std::string week_key(Date d) { return format_date(d - std::chrono::days{iso_weekday(d)}); }

Timestamp now_utc() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

}  // namespace sqg
