#include <algorithm>
#include <numeric>

#include "cfcl/clustering.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cfcl;

namespace {

std::size_t nearest_by_scan(const Vector& x, const std::vector<Vector>& centroids) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    if (squared_distance(x, centroids[c]) < squared_distance(x, centroids[best])) best = c;
  }
  return best;
}

// Naive seeding: K distinct points chosen uniformly, then Lloyd to convergence.
double naive_restart_objective(const std::vector<Vector>& pts, std::size_t k, Rng& rng) {
  std::vector<Vector> centroids;
  for (std::size_t q : uniform_subset(pts.size(), k, rng)) centroids.push_back(pts[q]);
  std::vector<std::size_t> a;
  for (int it = 0; it < 100; ++it) {
    a.clear();
    for (const auto& p : pts) a.push_back(nearest_by_scan(p, centroids));
    std::vector<Vector> next(k, Vector(pts[0].size(), 0.0));
    std::vector<double> n(k, 0.0);
    for (std::size_t q = 0; q < pts.size(); ++q) {
      n[a[q]] += 1.0;
      for (std::size_t d = 0; d < pts[q].size(); ++d) next[a[q]][d] += pts[q][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (n[c] == 0.0) next[c] = centroids[c];
      else
        for (double& v : next[c]) v /= n[c];
    }
    centroids = next;
  }
  double obj = 0.0;
  for (const auto& p : pts) obj += squared_distance(p, centroids[nearest_by_scan(p, centroids)]);
  return obj;
}

}  // namespace

TEST_CASE("K=1 gives the mean") {
  Rng rng(1);
  const auto pts = testing::gaussian_points(20, 3, rng);
  const ClusterModel m = kmeanspp(pts, 1, rng);
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[d];
    CHECK(m.centroids[0][d] == doctest::Approx(mean / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("separated pairs") {
  Rng rng(2);
  const std::vector<Vector> pts{{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}};
  const ClusterModel m = kmeanspp(pts, 2, rng);
  // Centroids come back sorted lexicographically.
  CHECK(m.centroids[0][0] == doctest::Approx(0.05));
  CHECK(m.centroids[1][0] == doctest::Approx(10.05));
  CHECK(m.assignments == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(m.counts == std::vector<std::size_t>{2, 2});
}

TEST_CASE("structural invariants") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = testing::gaussian_points(60, 2, rng);
    const ClusterModel m = kmeanspp(pts, 5, rng);
    CHECK(std::accumulate(m.counts.begin(), m.counts.end(), std::size_t{0}) == 60);
    const auto members = m.members();
    for (std::size_t c = 0; c < 5; ++c) {
      REQUIRE(!members[c].empty());
      Vector mean(2, 0.0);
      for (std::size_t q : members[c])
        for (std::size_t d = 0; d < 2; ++d) mean[d] += pts[q][d] / static_cast<double>(members[c].size());
      CHECK(squared_distance(mean, m.centroids[c]) < 1e-10);
    }
    CHECK(std::is_sorted(m.centroids.begin(), m.centroids.end()));
  }
}

TEST_CASE("objective never increases across Lloyd steps") {
  Rng rng(4);
  std::vector<double> trace;
  KMeansOptions opts;
  opts.objective_trace = &trace;
  kmeanspp(testing::gaussian_points(300, 2, rng), 8, rng, opts);
  REQUIRE(trace.size() >= 2);
  for (std::size_t q = 1; q < trace.size(); ++q) CHECK(trace[q] <= trace[q - 1] + 1e-12);
}

TEST_CASE("kmeans++ competes with 200 naive restarts") {
  int wins = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(1000 + s);
    const auto pts = testing::gaussian_points(12, 2, rng);
    const ClusterModel m = kmeanspp(pts, 3, rng);
    const double ours = kmeans_objective(pts, m.centroids, m.assignments);
    double best = 1e300;
    for (int r = 0; r < 200; ++r) best = std::min(best, naive_restart_objective(pts, 3, rng));
    if (ours <= best + 1e-9) ++wins;
  }
  // At least 90% of seeds.
  CHECK(wins >= 45);
}

TEST_CASE("assign") {
  const std::vector<Vector> centroids{{0, 0}, {2, 0}};
  CHECK(assign({{2, 0}}, centroids) == std::vector<std::size_t>{1});
  CHECK(assign({{1, 0}}, centroids) == std::vector<std::size_t>{0});
  Rng rng(5);
  const auto pts = testing::gaussian_points(200, 3, rng);
  const auto cs = testing::gaussian_points(7, 3, rng);
  const auto a = assign(pts, cs);
  for (std::size_t q = 0; q < pts.size(); ++q) CHECK(a[q] == nearest_by_scan(pts[q], cs));
}

TEST_CASE("cluster radii") {
  Rng rng(6);
  SUBCASE("singleton and symmetric pair") {
    ClusterModel m;
    m.centroids = {{0.0}, {5.0}};
    m.assignments = {0, 0, 1};
    m.counts = {2, 1};
    const auto r = cluster_radii(m, {{-1.0}, {1.0}, {5.0}});
    CHECK(r == std::vector<double>{1.0, 0.0});
  }
  SUBCASE("matches a max scan") {
    const auto pts = testing::gaussian_points(100, 2, rng);
    const ClusterModel m = kmeanspp(pts, 4, rng);
    std::vector<double> want(4, 0.0);
    for (std::size_t q = 0; q < pts.size(); ++q)
      want[m.assignments[q]] = std::max(want[m.assignments[q]], distance(pts[q], m.centroids[m.assignments[q]]));
    const auto got = cluster_radii(m, pts);
    for (std::size_t c = 0; c < 4; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12));
    CHECK(m.radii == got);
  }
}

TEST_CASE("representatives are nearest members, round-robin") {
  const std::vector<Vector> pts{{0, 0}, {0.1, 0}, {0.3, 0}, {10, 0}, {10.2, 0}, {10.7, 0}};
  Rng rng(7);
  const ClusterModel m = kmeanspp(pts, 2, rng);
  // Centroids at x=0.1333 and x=10.3; members by distance are (1, 0, 2) and (4, 3, 5).
  CHECK(centroid_representatives(m, pts, 2) == std::vector<std::size_t>{1, 4});
  CHECK(centroid_representatives(m, pts, 4) == std::vector<std::size_t>{1, 4, 0, 3});
  CHECK(centroid_representatives(m, pts, 9).size() == 6);
}

TEST_CASE("errors") {
  Rng rng(8);
  CHECK_THROWS_AS(kmeanspp({}, 1, rng), InfeasibleError);
  CHECK_THROWS_AS(kmeanspp({{1.0}}, 2, rng), InfeasibleError);
  CHECK_THROWS_AS(kmeanspp({{1.0}, {2.0}}, 0, rng), InfeasibleError);
  CHECK_THROWS_AS(kmeanspp({{1.0}, {std::nan("")}}, 1, rng), DataError);
  CHECK_THROWS_AS(kmeanspp({{1.0}, {2.0, 3.0}}, 1, rng), ShapeError);
}

TEST_CASE("duplicate points with K equal to n") {
  Rng rng(9);
  const std::vector<Vector> pts{{1, 1}, {1, 1}, {1, 1}};
  const ClusterModel m = kmeanspp(pts, 3, rng);
  CHECK(m.cluster_count() == 3);
  CHECK(std::accumulate(m.counts.begin(), m.counts.end(), std::size_t{0}) == 3);
}
