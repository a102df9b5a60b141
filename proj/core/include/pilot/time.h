#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace pilot {

// All timestamps are offsets from pilot start, in whole microseconds.
using Duration = std::chrono::microseconds;

Duration from_seconds(double seconds);

inline double to_seconds(Duration d) {
  return static_cast<double>(d.count()) / 1e6;
}

// Fixed-point "S.UUUUUU" rendering, exact for any Duration.
std::string format_seconds(Duration d);

// Parses the fixed-point form written by format_seconds (and plain decimals
// with up to six fractional digits). Throws std::invalid_argument.
Duration parse_seconds(std::string_view text);

}  // namespace pilot
