#include "pilot/time.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pilot {

Duration from_seconds(double seconds) {
  if (!std::isfinite(seconds)) {
    throw std::invalid_argument("non-finite duration");
  }
  return Duration{std::llround(seconds * 1e6)};
}

std::string format_seconds(Duration d) {
  std::int64_t us = d.count();
  const bool negative = us < 0;
  // Avoid overflow on INT64_MIN by working on the unsigned magnitude.
  std::uint64_t mag = negative ? 0 - static_cast<std::uint64_t>(us)
                               : static_cast<std::uint64_t>(us);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%llu.%06llu", negative ? "-" : "",
                static_cast<unsigned long long>(mag / 1000000),
                static_cast<unsigned long long>(mag % 1000000));
  return buf;
}

Duration parse_seconds(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty time value");
  std::size_t pos = 0;
  bool negative = false;
  if (text[0] == '-') {
    negative = true;
    pos = 1;
  }
  std::int64_t whole = 0;
  std::size_t digits = 0;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
    if (whole > (INT64_MAX / 10) / 1000000) {
      throw std::invalid_argument("time value out of range: " + std::string(text));
    }
    whole = whole * 10 + (text[pos] - '0');
    ++pos;
    ++digits;
  }
  std::int64_t frac = 0;
  int frac_digits = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (frac_digits == 6) {
        throw std::invalid_argument("more than microsecond precision: " +
                                    std::string(text));
      }
      frac = frac * 10 + (text[pos] - '0');
      ++frac_digits;
      ++pos;
    }
  }
  if (pos != text.size() || (digits == 0 && frac_digits == 0)) {
    throw std::invalid_argument("malformed time value: " + std::string(text));
  }
  for (int i = frac_digits; i < 6; ++i) frac *= 10;
  std::int64_t us = whole * 1000000 + frac;
  return Duration{negative ? -us : us};
}

}  // namespace pilot
