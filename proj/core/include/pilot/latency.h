#pragma once

#include <random>
#include <string>
#include <string_view>

#include "pilot/time.h"

namespace pilot {

using Rng = std::mt19937_64;

enum class LatencyKind {
  kFixed,        // always `mean`
  kTruncNormal,  // normal truncated at 0, location solved so the mean is `mean`
  kLogNormal,    // lognormal with exactly `mean` and `stddev`
};

std::string_view to_string(LatencyKind k);
LatencyKind parse_latency_kind(std::string_view s);

struct LatencySpec {
  LatencyKind kind = LatencyKind::kFixed;
  double mean_s = 0;
  double stddev_s = 0;

  void validate() const;
  static LatencySpec fixed(double s) { return {LatencyKind::kFixed, s, 0}; }
  static LatencySpec trunc_normal(double mean, double sd) {
    return {LatencyKind::kTruncNormal, mean, sd};
  }
};

// Draws non-negative latencies (rounded to microseconds) from a LatencySpec.
class LatencySampler {
 public:
  LatencySampler() = default;
  explicit LatencySampler(const LatencySpec& spec);

  Duration sample(Rng& rng) const;

  const LatencySpec& spec() const { return spec_; }
  // Location of the underlying normal for kTruncNormal.
  double location() const { return location_; }

 private:
  LatencySpec spec_;
  double location_ = 0;
  double log_mu_ = 0;
  double log_sigma_ = 0;
};

// Mean of N(location, scale) conditioned on X > 0.
double truncated_normal_mean(double location, double scale);

}  // namespace pilot
