#include "fsbench/time_util.hpp"

#include <cstdio>

#include "fsbench/error.hpp"

namespace fsbench {
namespace {

using namespace std::chrono;

[[noreturn]] void bad(std::string_view what, std::string_view text) {
  throw Error(Errc::parse, std::string(what) + ": '" + std::string(text) + "'");
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

int digits(std::string_view s, std::size_t pos, std::size_t n, std::string_view whole) {
  if (pos + n > s.size()) bad("truncated date-time", whole);
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!is_digit(s[i])) bad("expected digit", whole);
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect(std::string_view s, std::size_t pos, char c, std::string_view whole) {
  if (pos >= s.size() || s[pos] != c) bad("malformed date-time", whole);
}

Date parse_ymd(std::string_view s, std::string_view whole) {
  const int y = digits(s, 0, 4, whole);
  expect(s, 4, '-', whole);
  const int m = digits(s, 5, 2, whole);
  expect(s, 7, '-', whole);
  const int d = digits(s, 8, 2, whole);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) bad("invalid calendar date", whole);
  return sys_days{ymd};
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10) bad("expected YYYY-MM-DD", text);
  return parse_ymd(text, text);
}

Timestamp parse_timestamp(std::string_view text) {
  if (text.size() < 20) bad("expected RFC 3339 date-time", text);
  const Date date = parse_ymd(text.substr(0, 10), text);
  const char sep = text[10];
  if (sep != 'T' && sep != 't' && sep != ' ') bad("malformed date-time", text);
  const int hh = digits(text, 11, 2, text);
  expect(text, 13, ':', text);
  const int mm = digits(text, 14, 2, text);
  expect(text, 16, ':', text);
  const int ss = digits(text, 17, 2, text);
  if (hh > 23 || mm > 59 || ss > 60) bad("time of day out of range", text);

  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && is_digit(text[pos])) ++pos;
    if (pos == start) bad("empty fractional seconds", text);
  }
  if (pos >= text.size()) bad("missing UTC offset", text);

  seconds offset{0};
  const char z = text[pos];
  if (z == 'Z' || z == 'z') {
    ++pos;
  } else if (z == '+' || z == '-') {
    const int oh = digits(text, pos + 1, 2, text);
    expect(text, pos + 3, ':', text);
    const int om = digits(text, pos + 4, 2, text);
    if (oh > 23 || om > 59) bad("offset out of range", text);
    offset = hours{oh} + minutes{om};
    if (z == '-') offset = -offset;
    pos += 6;
  } else {
    bad("missing UTC offset", text);
  }
  if (pos != text.size()) bad("trailing characters in date-time", text);

  // Leap seconds collapse onto the following second.
  return Timestamp{date} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

std::string format_timestamp(Timestamp ts) {
  const Date d = calendar_date(ts);
  const year_month_day ymd{d};
  const hh_mm_ss tod{ts - Timestamp{d}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

std::string format_date(Date d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Timestamp utc_now() { return floor<seconds>(system_clock::now()); }

}  // namespace fsbench
