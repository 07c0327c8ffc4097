#include "cfcl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cfcl {

std::vector<std::vector<std::size_t>> ClusterModel::members() const {
  std::vector<std::vector<std::size_t>> out(centroids.size());
  for (std::size_t q = 0; q < assignments.size(); ++q) out[assignments[q]].push_back(q);
  return out;
}

std::vector<std::size_t> assign(const std::vector<Vector>& points,
                                const std::vector<Vector>& centroids) {
  std::vector<std::size_t> out(points.size(), 0);
  for (std::size_t q = 0; q < points.size(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(points[q], centroids[c]);
      if (d < best) {
        best = d;
        out[q] = c;
      }
    }
  }
  return out;
}

std::vector<double> cluster_radii(const ClusterModel& model, const std::vector<Vector>& points) {
  std::vector<double> radii(model.centroids.size(), 0.0);
  for (std::size_t q = 0; q < points.size(); ++q) {
    const std::size_t c = model.assignments[q];
    radii[c] = std::max(radii[c], distance(points[q], model.centroids[c]));
  }
  return radii;
}

double kmeans_objective(const std::vector<Vector>& points, const std::vector<Vector>& centroids,
                        const std::vector<std::size_t>& assignments) {
  double s = 0.0;
  for (std::size_t q = 0; q < points.size(); ++q) s += squared_distance(points[q], centroids[assignments[q]]);
  return s;
}

std::vector<std::size_t> centroid_representatives(const ClusterModel& model,
                                                  const std::vector<Vector>& points,
                                                  std::size_t count) {
  auto groups = model.members();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(groups[c].size());
    for (std::size_t q : groups[c]) keyed.emplace_back(squared_distance(points[q], model.centroids[c]), q);
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t r = 0; r < keyed.size(); ++r) groups[c][r] = keyed[r].second;
  }
  count = std::min(count, points.size());
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t round = 0; out.size() < count; ++round) {
    for (std::size_t c = 0; c < groups.size() && out.size() < count; ++c) {
      if (round < groups[c].size()) out.push_back(groups[c][round]);
    }
  }
  return out;
}

namespace {

std::vector<Vector> seed_plus_plus(const std::vector<Vector>& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Vector> centroids;
  centroids.reserve(k);
  centroids.push_back(points[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))]);
  const std::size_t local_trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> d2(n);
  for (std::size_t q = 0; q < n; ++q) d2[q] = squared_distance(points[q], centroids[0]);
  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (!(total > 0.0)) {
      // Fewer distinct points than clusters.
      centroids.push_back(points[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))]);
      continue;
    }
    // Greedy variant: draw several D^2 candidates and keep the one that lowers
    // the potential most.
    std::size_t pick = 0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_d2;
    for (std::size_t trial = 0; trial < local_trials; ++trial) {
      const std::size_t cand = draw_weighted(d2, rng);
      std::vector<double> next(n);
      double potential = 0.0;
      for (std::size_t q = 0; q < n; ++q) {
        next[q] = std::min(d2[q], squared_distance(points[q], points[cand]));
        potential += next[q];
      }
      if (potential < best) {
        best = potential;
        pick = cand;
        best_d2 = std::move(next);
      }
    }
    centroids.push_back(points[pick]);
    d2 = std::move(best_d2);
  }
  return centroids;
}

}  // namespace

// One seeding plus Lloyd refinement; returns the final centroids.
static std::vector<Vector> lloyd_run(const std::vector<Vector>& points, std::size_t k, Rng& rng,
                                     const KMeansOptions& options, std::vector<double>* trace) {
  const std::size_t dim = points.front().size();
  std::vector<Vector> centroids = seed_plus_plus(points, k, rng);
  std::vector<std::size_t> labels = assign(points, centroids);
  if (trace) trace->push_back(kmeans_objective(points, centroids, labels));

  for (int iter = 0; iter < options.max_iter; ++iter) {
    std::vector<Vector> next(k, Vector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t q = 0; q < points.size(); ++q) {
      ++counts[labels[q]];
      for (std::size_t d = 0; d < dim; ++d) next[labels[q]][d] += points[q][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (double& v : next[c]) v /= static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // Reseed at the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t q = 0; q < points.size(); ++q) {
        if (counts[labels[q]] <= 1) continue;
        const double d = squared_distance(points[q], next[labels[q]]);
        if (d > far_d) {
          far_d = d;
          far = q;
        }
      }
      if (far_d < 0.0) break;
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
      next[c] = points[far];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, distance(next[c], centroids[c]));
    centroids = std::move(next);
    labels = assign(points, centroids);
    if (trace) trace->push_back(kmeans_objective(points, centroids, labels));
    if (shift < options.tol) break;
  }

  return centroids;
}

ClusterModel kmeanspp(const std::vector<Vector>& points, std::size_t k, Rng& rng,
                      const KMeansOptions& options) {
  if (k == 0) throw InfeasibleError("K-means needs K >= 1");
  if (points.empty()) throw InfeasibleError("K-means over an empty point set");
  if (k > points.size()) {
    throw InfeasibleError("K-means with K=" + std::to_string(k) + " over " +
                          std::to_string(points.size()) + " points");
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ShapeError("K-means points have mixed dimensions");
    for (double v : p) {
      if (!std::isfinite(v)) throw DataError("K-means point has a non-finite coordinate");
    }
  }

  std::vector<Vector> centroids;
  std::vector<double> best_trace;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(options.restarts, 1); ++r) {
    std::vector<double> trace;
    std::vector<Vector> c = lloyd_run(points, k, rng, options, options.objective_trace ? &trace : nullptr);
    const double obj = kmeans_objective(points, c, assign(points, c));
    if (obj < best) {
      best = obj;
      centroids = std::move(c);
      best_trace = std::move(trace);
    }
  }
  if (options.objective_trace) options.objective_trace->insert(options.objective_trace->end(), best_trace.begin(), best_trace.end());

  // Canonical order.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return centroids[a] < centroids[b]; });
  ClusterModel model;
  model.centroids.reserve(k);
  for (std::size_t c : order) model.centroids.push_back(centroids[c]);
  model.assignments = assign(points, model.centroids);
  model.counts.assign(k, 0);
  for (std::size_t a : model.assignments) ++model.counts[a];
  model.radii = cluster_radii(model, points);
  return model;
}

}  // namespace cfcl
