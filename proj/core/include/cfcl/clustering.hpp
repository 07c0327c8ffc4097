#pragma once

#include <vector>

#include "cfcl/common.hpp"

namespace cfcl {

struct ClusterModel {
  std::vector<Vector> centroids;
  std::vector<std::size_t> assignments;
  std::vector<std::size_t> counts;
  std::vector<double> radii;

  std::size_t cluster_count() const { return centroids.size(); }
  // Member indices of each cluster, ascending.
  std::vector<std::vector<std::size_t>> members() const;
};

struct KMeansOptions {
  int max_iter = 100;
  double tol = 1e-6;
  // Independent seedings; the lowest-objective result is kept.
  int restarts = 20;
  // When set, receives the objective after seeding and after every Lloyd step
  // of the winning restart.
  std::vector<double>* objective_trace = nullptr;
};

// K-means++ (D^2) seeding followed by Lloyd iterations, repeated
// `restarts` times. Centroids are sorted
// lexicographically on return and assignments/counts/radii follow that order.
// An empty cluster during Lloyd is reseeded at the point farthest from its
// current centroid.
ClusterModel kmeanspp(const std::vector<Vector>& points, std::size_t k, Rng& rng,
                      const KMeansOptions& options = {});

// Nearest centroid per point; ties go to the lowest index.
std::vector<std::size_t> assign(const std::vector<Vector>& points,
                                const std::vector<Vector>& centroids);

// Max member distance to the centroid; 0 for empty clusters.
std::vector<double> cluster_radii(const ClusterModel& model, const std::vector<Vector>& points);

// Up to `count` distinct point indices chosen round-robin over clusters in
// canonical order: first every cluster's member nearest its centroid, then
// every cluster's second nearest, and so on.
std::vector<std::size_t> centroid_representatives(const ClusterModel& model,
                                                  const std::vector<Vector>& points,
                                                  std::size_t count);

// Sum of squared distances from each point to its assigned centroid.
double kmeans_objective(const std::vector<Vector>& points, const std::vector<Vector>& centroids,
                        const std::vector<std::size_t>& assignments);

}  // namespace cfcl
