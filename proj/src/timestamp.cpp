#include "curator/timestamp.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "curator/error.hpp"

namespace curator {

namespace {

using namespace std::chrono;

[[noreturn]] void bad(std::string_view text) {
  throw Error(Errc::InvalidArgument, "invalid RFC 3339 timestamp '" + std::string(text) + "'");
}

int readInt(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  if (pos + len > text.size()) bad(whole);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
  if (ec != std::errc{} || ptr != text.data() + pos + len) bad(whole);
  return value;
}

}  // namespace

Timestamp Timestamp::now() {
  auto ms = duration_cast<milliseconds>(system_clock::now().time_since_epoch());
  return Timestamp(ms.count());
}

Timestamp Timestamp::parse(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS[.fff...](Z|+HH:MM|-HH:MM)
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != 't') || text[13] != ':' || text[16] != ':') {
    bad(text);
  }
  const int y = readInt(text, 0, 4, text);
  const int mo = readInt(text, 5, 2, text);
  const int d = readInt(text, 8, 2, text);
  const int h = readInt(text, 11, 2, text);
  const int mi = readInt(text, 14, 2, text);
  const int s = readInt(text, 17, 2, text);

  std::size_t pos = 19;
  std::int64_t frac = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) frac = frac * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) bad(text);
    for (int k = digits; k < 3; ++k) frac *= 10;
  }

  std::int64_t offsetMinutes = 0;
  if (pos >= text.size()) bad(text);
  if (text[pos] == 'Z' || text[pos] == 'z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '+' ? 1 : -1;
    if (pos + 6 != text.size() || text[pos + 3] != ':') bad(text);
    offsetMinutes = sign * (readInt(text, pos + 1, 2, text) * 60 + readInt(text, pos + 4, 2, text));
    pos += 6;
  } else {
    bad(text);
  }
  if (pos != text.size()) bad(text);

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) bad(text);
  const auto days = sys_days{ymd}.time_since_epoch();
  const std::int64_t ms = duration_cast<milliseconds>(days).count() +
                          ((h * 60LL + mi - offsetMinutes) * 60 + s) * 1000 + frac;
  return Timestamp(ms);
}

std::string Timestamp::str() const {
  const milliseconds ms{millis_};
  const auto dayPoint = floor<days>(sys_time<milliseconds>{ms});
  const year_month_day ymd{dayPoint};
  std::int64_t rem = (sys_time<milliseconds>{ms} - dayPoint).count();
  const int milli = static_cast<int>(rem % 1000);
  rem /= 1000;
  const int sec = static_cast<int>(rem % 60);
  rem /= 60;
  const int min = static_cast<int>(rem % 60);
  const int hour = static_cast<int>(rem / 60);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour, min, sec,
                milli);
  return buf;
}

}  // namespace curator
