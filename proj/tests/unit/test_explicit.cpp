#include <algorithm>
#include <cmath>
#include <set>

#include "cfcl/explicit_exchange.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cfcl;

namespace {

EncoderModel identity_2d() {
  EncoderModel m = make_zero_encoder({2, 2});
  m.weights = {1, 0, 0, 1, 0, 0};
  return m;
}

std::vector<Vector> blob(double cx, double cy, std::size_t n, Rng& rng, double s = 0.01) {
  auto pts = testing::gaussian_points(n, 2, rng, s);
  for (auto& p : pts) {
    p[0] += cx;
    p[1] += cy;
  }
  return pts;
}

CandidateSet as_candidates(const std::vector<Vector>& items) {
  CandidateSet c;
  c.items = items;
  for (std::size_t q = 0; q < items.size(); ++q) c.source_indices.push_back(q);
  return c;
}

}  // namespace

TEST_CASE("select_reserve") {
  Rng rng(1);
  SUBCASE("K equal to the dataset size returns every point") {
    const auto ds = testing::gaussian_points(8, 2, rng);
    const auto r = select_reserve(ds, 8, rng);
    CHECK(std::set<std::size_t>(r.source_indices.begin(), r.source_indices.end()).size() == 8);
  }
  SUBCASE("separated pairs") {
    const std::vector<Vector> ds{{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}};
    const auto r = select_reserve(ds, 2, rng);
    REQUIRE(r.points.size() == 2);
    std::vector<double> xs{r.points[0][0], r.points[1][0]};
    std::sort(xs.begin(), xs.end());
    CHECK(xs[0] < 1.0);
    CHECK(xs[1] > 9.0);
  }
  SUBCASE("each reserve point is its cluster's nearest member") {
    const auto ds = testing::gaussian_points(50, 2, rng);
    Rng a(42), b(42);
    const auto r = select_reserve(ds, 5, a);
    const ClusterModel m = kmeanspp(ds, 5, b);
    REQUIRE(r.source_indices.size() == 5);
    for (std::size_t c = 0; c < 5; ++c) {
      std::size_t best = ds.size();
      for (std::size_t q = 0; q < ds.size(); ++q) {
        if (m.assignments[q] != c) continue;
        if (best == ds.size() || squared_distance(ds[q], m.centroids[c]) < squared_distance(ds[best], m.centroids[c])) best = q;
      }
      CHECK(std::count(r.source_indices.begin(), r.source_indices.end(), best) == 1);
    }
  }
  SUBCASE("infeasible K") {
    CHECK_THROWS_AS(select_reserve({{1.0}}, 2, rng), InfeasibleError);
    CHECK_THROWS_AS(select_reserve_uniform({{1.0}}, 0, rng), InfeasibleError);
  }
}

TEST_CASE("uniform reserve and approx sets") {
  Rng rng(2);
  const auto ds = testing::gaussian_points(20, 2, rng);
  CHECK(select_reserve_uniform(ds, 20, rng).points.size() == 20);
  CHECK(approx_local(ds, 20, rng).size() == 20);
  Rng a(5), b(5);
  CHECK(select_reserve_uniform(ds, 4, a).source_indices == select_reserve_uniform(ds, 4, b).source_indices);
  Rng c(6), d(6);
  CHECK(approx_local(ds, 4, c).source_indices == approx_local(ds, 4, d).source_indices);

  const int trials = 100000;
  std::vector<double> hits(20, 0.0), approx_hits(20, 0.0);
  for (int t = 0; t < trials; ++t) {
    for (std::size_t q : select_reserve_uniform(ds, 5, rng).source_indices) hits[q] += 1.0;
    for (std::size_t q : approx_local(ds, 5, rng).source_indices) approx_hits[q] += 1.0;
  }
  const double p = 5.0 / 20.0;
  for (std::size_t q : {std::size_t{0}, std::size_t{19}}) {
    CHECK(std::abs(hits[q] / trials - p) < testing::three_sigma(p, trials));
    CHECK(std::abs(approx_hits[q] / trials - p) < testing::three_sigma(p, trials));
  }
}

TEST_CASE("macro probabilities") {
  SUBCASE("hand counts") {
    const auto p = macro_from_counts({10, 10}, {0, 10});
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(macro_from_counts({4}, {9}) == std::vector<double>{1.0});
    const auto q = macro_from_counts({0, 3}, {5, 1});
    CHECK(q == std::vector<double>{0.0, 1.0});
    CHECK_THROWS_AS(macro_from_counts({0, 0}, {1, 1}), EmptyCandidatesError);
  }
  SUBCASE("joint clustering on separated geometry") {
    Rng rng(3);
    auto approx = blob(0, 0, 10, rng);
    const auto more = blob(10, 0, 10, rng);
    approx.insert(approx.end(), more.begin(), more.end());
    const auto reserve = blob(10, 0, 10, rng);
    const MacroSampling m = macro_probs(approx, reserve, 2, rng);
    CHECK(m.approx_counts == std::vector<std::size_t>{10, 10});
    CHECK(m.reserve_counts == std::vector<std::size_t>{0, 10});
    CHECK(m.probs[0] == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("single cluster") {
    Rng rng(4);
    const MacroSampling m = macro_probs(testing::gaussian_points(6, 2, rng), testing::gaussian_points(3, 2, rng), 1, rng);
    CHECK(m.probs == std::vector<double>{1.0});
  }
  SUBCASE("random instance against direct evaluation") {
    Rng rng(5);
    const auto approx = testing::gaussian_points(30, 2, rng);
    const auto reserve = testing::gaussian_points(12, 2, rng);
    const MacroSampling m = macro_probs(approx, reserve, 3, rng);
    std::vector<double> a(3, 0.0), r(3, 0.0);
    for (std::size_t q = 0; q < 42; ++q) (q < 30 ? a : r)[m.clusters.assignments[q]] += 1.0;
    std::vector<double> x(3, 0.0);
    double total = 0.0;
    for (int l = 0; l < 3; ++l) {
      x[l] = a[l] > 0 ? a[l] / (a[l] + r[l]) : 0.0;
      total += x[l];
    }
    for (int l = 0; l < 3; ++l) CHECK(m.probs[l] == doctest::Approx(x[l] / total).epsilon(1e-12));
  }
}

TEST_CASE("micro probabilities") {
  CHECK(micro_probs({0.3, 5.0, 1.0}, 0.0) == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(micro_probs({7.0}, 2.0) == std::vector<double>{1.0});
  const auto p = micro_probs({1.0, 2.0}, 1.0);
  CHECK(p[0] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  // Large scores do not overflow.
  const auto big = micro_probs({1000.0, 1001.0}, 1.0);
  CHECK(big[1] == doctest::Approx(p[1]).epsilon(1e-12));
}

TEST_CASE("expected negative losses") {
  // 1-D: anchors (0, 1), positives (0.5, 1), candidate 0.6: hinge values
  // 0.25 - 0.36 + 1 = 0.89 and 0 - 0.16 + 1 = 0.84.
  const auto l = expected_negative_losses({{0.0}, {1.0}}, {{0.5}, {1.0}}, {{0.6}, {10.0}}, 1.0);
  CHECK(l[0] == doctest::Approx((0.89 + 0.84) / 2.0).epsilon(1e-14));
  CHECK(l[1] == 0.0);
}

TEST_CASE("sample_pull") {
  Rng rng(6);
  const EncoderModel id = identity_2d();
  ExplicitSamplerParams params;
  params.k_macro = 2;
  ReserveData reserve;
  reserve.points = blob(5, 5, 3, rng);
  SUBCASE("budget equal to the candidate count returns every candidate") {
    const auto approx = as_candidates(testing::gaussian_points(7, 2, rng));
    const PullRequest req{0, 1, 7, 0, &id};
    const auto [plan, trace] = sample_pull(req, reserve, approx, params, rng);
    std::vector<std::size_t> got = plan.candidate_indices;
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK(testing::sum(trace.final_probs) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("one cluster at zero temperature is uniform") {
    params.k_macro = 1;
    params.temperature = 0.0;
    const auto approx = as_candidates(testing::gaussian_points(5, 2, rng));
    const PullRequest req{0, 1, 2, 0, &id};
    const auto [plan, trace] = sample_pull(req, reserve, approx, params, rng);
    for (double p : trace.final_probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(plan.items.size() == 2);
    CHECK(plan.candidate_indices[0] != plan.candidate_indices[1]);
  }
  SUBCASE("items and source indices follow the candidate set") {
    auto approx = as_candidates(testing::gaussian_points(6, 2, rng));
    for (auto& s : approx.source_indices) s += 100;
    const PullRequest req{2, 3, 3, 25, &id};
    const auto [plan, trace] = sample_pull(req, reserve, approx, params, rng);
    CHECK(plan.receiver == 2);
    CHECK(plan.transmitter == 3);
    CHECK(plan.t == 25);
    for (std::size_t r = 0; r < plan.items.size(); ++r) {
      CHECK(plan.items[r] == approx.items[plan.candidate_indices[r]]);
      CHECK(plan.source_indices[r] == plan.candidate_indices[r] + 100);
    }
  }
}

TEST_CASE("uniform and K-means pulls") {
  Rng rng(7);
  const EncoderModel id = identity_2d();
  SUBCASE("uniform") {
    const auto c = as_candidates(testing::gaussian_points(10, 2, rng));
    CHECK(sample_pull_uniform({0, 1, 10, 0, &id}, c, rng).items.size() == 10);
    Rng a(1), b(1);
    CHECK(sample_pull_uniform({0, 1, 3, 0, &id}, c, a).candidate_indices ==
          sample_pull_uniform({0, 1, 3, 0, &id}, c, b).candidate_indices);
    const int trials = 100000;
    double hits = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto plan = sample_pull_uniform({0, 1, 3, 0, &id}, c, rng);
      hits += std::count(plan.candidate_indices.begin(), plan.candidate_indices.end(), std::size_t{4});
    }
    CHECK(std::abs(hits / trials - 0.3) < testing::three_sigma(0.3, trials));
  }
  SUBCASE("K-means") {
    const auto all = as_candidates(testing::gaussian_points(5, 2, rng));
    CHECK(sample_pull_kmeans({0, 1, 5, 0, &id}, all, all.items, 5, rng).items.size() == 5);
    const auto pairs = as_candidates({{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}});
    const auto plan = sample_pull_kmeans({0, 1, 2, 0, &id}, pairs, pairs.items, 2, rng);
    REQUIRE(plan.items.size() == 2);
    CHECK((plan.items[0][0] < 1.0) != (plan.items[1][0] < 1.0));

    const auto random = as_candidates(testing::gaussian_points(40, 2, rng));
    Rng a(9), b(9);
    const auto picked = sample_pull_kmeans({0, 1, 4, 0, &id}, random, random.items, 4, a);
    const ClusterModel m = kmeanspp(random.items, 4, b);
    for (std::size_t c = 0; c < 4; ++c) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t q = 0; q < 40; ++q) {
        if (m.assignments[q] == c && squared_distance(random.items[q], m.centroids[c]) < best_d) {
          best_d = squared_distance(random.items[q], m.centroids[c]);
          best = q;
        }
      }
      CHECK(std::count(picked.candidate_indices.begin(), picked.candidate_indices.end(), best) == 1);
    }
  }
}
