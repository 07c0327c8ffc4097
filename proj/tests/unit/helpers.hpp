#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "cfcl/common.hpp"

namespace testing {

inline std::vector<cfcl::Vector> gaussian_points(std::size_t n, std::size_t dim, cfcl::Rng& rng,
                                                 double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<cfcl::Vector> out(n, cfcl::Vector(dim));
  for (auto& v : out)
    for (double& x : v) x = normal(rng);
  return out;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Half-width of a 3-sigma binomial band for `trials` draws at probability p.
inline double three_sigma(double p, double trials) { return 3.0 * std::sqrt(p * (1.0 - p) / trials); }

}  // namespace testing
