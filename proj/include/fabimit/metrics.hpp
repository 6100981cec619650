#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fabimit/state_space.hpp"

namespace fabimit {

// Sum of the two directed mean squared nearest-neighbour distances (m^2).
inline double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.points.empty() || b.points.empty()) throw std::invalid_argument("chamfer: empty point cloud");
  auto directed = [](const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (const auto& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to.points) best = std::min(best, (p - q).squaredNorm());
      sum += best;
    }
    return sum / static_cast<double>(from.points.size());
  };
  return directed(a, b) + directed(b, a);
}

}  // namespace fabimit
