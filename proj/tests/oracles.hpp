#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

/// Nucleus filter from per-token ranks: token i survives when fewer than k
/// tokens outrank it and the tokens that outrank it hold less than p mass.
inline std::vector<double> filter_by_rank(const std::vector<double>& dist, int k, double p) {
  const std::size_t n = dist.size();
  std::vector<bool> keep(n, false);
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rank = 0;
    double above = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[j] > dist[i] || (dist[j] == dist[i] && j < i)) {
        ++rank;
        above += dist[j];
      }
    }
    if (rank < static_cast<std::size_t>(k) && (rank == 0 || above < p)) {
      keep[i] = true;
      kept_mass += dist[i];
    }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out[i] = dist[i] / kept_mass;
  }
  return out;
}

}  // namespace oracle
