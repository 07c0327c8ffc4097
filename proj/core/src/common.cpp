#include "cfcl/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfcl {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("distance between vectors of length " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t draw_weighted(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw EmptyCandidatesError("weighted draw over zero total weight");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last_positive = k;
    if (u < acc) return k;
  }
  return last_positive;
}

std::vector<std::size_t> draw_without_replacement(std::span<const double> weights,
                                                  std::size_t count, Rng& rng) {
  count = std::min(count, weights.size());
  std::vector<double> w(weights.begin(), weights.end());
  std::vector<bool> taken(w.size(), false);
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::size_t pick;
    if (total > 0.0) {
      pick = draw_weighted(w, rng);
    } else {
      std::vector<std::size_t> rest;
      for (std::size_t k = 0; k < w.size(); ++k)
        if (!taken[k]) rest.push_back(k);
      pick = rest[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(rest.size()))];
    }
    taken[pick] = true;
    w[pick] = 0.0;
    out.push_back(pick);
  }
  return out;
}

std::vector<std::size_t> uniform_subset(std::size_t n, std::size_t count, Rng& rng) {
  if (count > n) {
    throw InfeasibleError("cannot sample " + std::to_string(count) + " of " + std::to_string(n) +
                          " items without replacement");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

}  // namespace cfcl
