#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace curator {

/// UTC instant with millisecond precision, rendered as RFC 3339
/// (`2021-03-01T09:00:00.000Z`).
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t millisSinceEpoch) : millis_(millisSinceEpoch) {}

  static Timestamp now();
  /// Accepts `Z`, `+00:00` or any numeric offset; fractional seconds are
  /// truncated to milliseconds. Throws Error(InvalidArgument).
  static Timestamp parse(std::string_view text);

  std::string str() const;
  constexpr std::int64_t millis() const { return millis_; }
  constexpr Timestamp plusMillis(std::int64_t delta) const { return Timestamp(millis_ + delta); }

  constexpr auto operator<=>(const Timestamp&) const = default;

 private:
  std::int64_t millis_ = 0;
};

}  // namespace curator
