#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfcl {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

// Error hierarchy. Every failure raised by the library derives from Error so
// callers can catch once and report what() as the diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};
class InfeasibleError : public Error {
 public:
  using Error::Error;
};
class DataError : public Error {
 public:
  using Error::Error;
};
class EmptyCandidatesError : public Error {
 public:
  using Error::Error;
};
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class TopologyError : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);

// Independent stream for a (seed, tag...) tuple. Streams derived from
// different tags do not share state, so the result of a computation does not
// depend on the order in which unrelated computations consume randomness.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

// Uniform double in [0, 1).
double uniform01(Rng& rng);

// Index drawn from unnormalized non-negative weights (sum must be > 0).
std::size_t draw_weighted(std::span<const double> weights, Rng& rng);

// Draws `count` distinct indices by sequential weighted draws, renormalizing
// over the remaining entries after each draw. Zero-weight entries are only
// taken once every positive-weight entry is exhausted, and then uniformly.
std::vector<std::size_t> draw_without_replacement(std::span<const double> weights,
                                                  std::size_t count, Rng& rng);

// Uniform sample of `count` distinct indices from [0, n), in ascending order.
std::vector<std::size_t> uniform_subset(std::size_t n, std::size_t count, Rng& rng);

}  // namespace cfcl
