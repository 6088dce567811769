#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "whatif/error.hpp"

namespace whatif {

inline constexpr double kBprAlpha = 0.15;
inline constexpr double kBprPower = 4.0;

/// BPR volume-delay: fftt * (1 + 0.15 * (volume / capacity)^4).
inline double bpr_time(double fftt, double capacity, double volume) {
  if (!(fftt > 0.0)) throw ValidationError("free-flow time must be positive");
  if (!(capacity > 0.0)) throw ValidationError("capacity must be positive");
  if (!(volume >= 0.0)) throw ValidationError("volume must be nonnegative");
  const double ratio = volume / capacity;
  const double r2 = ratio * ratio;
  return fftt * (1.0 + kBprAlpha * r2 * r2);
}

/// Logit split of one OD pair's demand over its paths:
///   p_i = exp(-theta * t_i) / sum_j exp(-theta * t_j)
/// Times are shifted by their minimum before exponentiating; the formula is
/// invariant under that shift and the largest exponent becomes exactly 0.
inline void logit_split(std::span<const double> path_times, double theta, std::span<double> out) {
  if (path_times.empty()) throw ValidationError("logit split needs at least one path");
  if (!(theta > 0.0)) throw ValidationError("logit dispersion must be positive");
  if (out.size() != path_times.size()) throw ValidationError("output size mismatch");
  const double t_min = *std::min_element(path_times.begin(), path_times.end());
  double denom = 0.0;
  for (std::size_t i = 0; i < path_times.size(); ++i) {
    out[i] = std::exp(-theta * (path_times[i] - t_min));
    denom += out[i];
  }
  for (double& p : out) p /= denom;
}

inline std::vector<double> logit_split(std::span<const double> path_times, double theta) {
  std::vector<double> out(path_times.size());
  logit_split(path_times, theta, out);
  return out;
}

}  // namespace whatif
