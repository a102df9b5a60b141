#include "pilot/latency.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pilot {

std::string_view to_string(LatencyKind k) {
  switch (k) {
    case LatencyKind::kFixed: return "fixed";
    case LatencyKind::kTruncNormal: return "truncnormal";
    case LatencyKind::kLogNormal: return "lognormal";
  }
  return "?";
}

LatencyKind parse_latency_kind(std::string_view s) {
  if (s == "fixed") return LatencyKind::kFixed;
  if (s == "truncnormal") return LatencyKind::kTruncNormal;
  if (s == "lognormal") return LatencyKind::kLogNormal;
  throw std::invalid_argument("unknown latency distribution '" + std::string(s) + "'");
}

void LatencySpec::validate() const {
  if (!(mean_s >= 0) || !std::isfinite(mean_s)) {
    throw std::invalid_argument("latency mean must be >= 0");
  }
  if (!(stddev_s >= 0) || !std::isfinite(stddev_s)) {
    throw std::invalid_argument("latency stddev must be >= 0");
  }
  if (kind == LatencyKind::kLogNormal && mean_s == 0 && stddev_s > 0) {
    throw std::invalid_argument("lognormal latency needs a positive mean");
  }
}

double truncated_normal_mean(double location, double scale) {
  // E[X | X > 0] = mu + sigma * phi(a) / (1 - Phi(a)), a = -mu / sigma.
  const double a = -location / scale;
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2 * std::numbers::pi);
  const double tail = 0.5 * std::erfc(a / std::numbers::sqrt2);
  if (tail <= 0) return 0;
  return location + scale * pdf / tail;
}

LatencySampler::LatencySampler(const LatencySpec& spec) : spec_(spec) {
  spec_.validate();
  if (spec_.stddev_s == 0) return;
  if (spec_.kind == LatencyKind::kTruncNormal) {
    if (spec_.mean_s == 0) {
      throw std::invalid_argument("truncnormal latency with stddev > 0 needs mean > 0");
    }
    // The truncated mean is increasing in the location; bisect for the target.
    double lo = -40 * spec_.stddev_s - spec_.mean_s;
    double hi = spec_.mean_s;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      if (truncated_normal_mean(mid, spec_.stddev_s) < spec_.mean_s) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    location_ = 0.5 * (lo + hi);
    const double acceptance =
        0.5 * std::erfc(-location_ / spec_.stddev_s / std::numbers::sqrt2);
    if (acceptance < 0.01) {
      throw std::invalid_argument(
          "truncnormal latency: stddev too large relative to mean for "
          "rejection sampling; use lognormal");
    }
  } else if (spec_.kind == LatencyKind::kLogNormal) {
    const double cv2 = (spec_.stddev_s / spec_.mean_s) * (spec_.stddev_s / spec_.mean_s);
    log_sigma_ = std::sqrt(std::log1p(cv2));
    log_mu_ = std::log(spec_.mean_s) - 0.5 * log_sigma_ * log_sigma_;
  }
}

Duration LatencySampler::sample(Rng& rng) const {
  if (spec_.kind == LatencyKind::kFixed || spec_.stddev_s == 0) {
    return from_seconds(spec_.mean_s);
  }
  if (spec_.kind == LatencyKind::kLogNormal) {
    std::lognormal_distribution<double> dist(log_mu_, log_sigma_);
    return from_seconds(dist(rng));
  }
  std::normal_distribution<double> dist(location_, spec_.stddev_s);
  for (;;) {
    double x = dist(rng);
    if (x > 0) return from_seconds(x);
  }
}

}  // namespace pilot
