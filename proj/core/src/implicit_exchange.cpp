#include "cfcl/implicit_exchange.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace cfcl {

ReserveEmbeddings reserve_embeddings(const ReserveData& reserve, const EncoderModel& model,
                                     long generated_at) {
  ReserveEmbeddings out;
  out.owner = reserve.owner;
  out.target = reserve.target;
  out.generated_at = generated_at;
  out.embeddings = forward_all(model, reserve.points);
  return out;
}

ReserveEmbeddings reserve_embeddings(const std::vector<Vector>& dataset, const EncoderModel& model,
                                     std::size_t k_reserve, Rng& rng,
                                     const KMeansOptions& options) {
  return reserve_embeddings(select_reserve(dataset, k_reserve, rng, options), model, 0);
}

CandidateSet candidate_embeddings(const std::vector<Vector>& dataset, const EncoderModel& model,
                                  std::size_t k_approx, Rng& rng) {
  CandidateSet sample = approx_local(dataset, k_approx, rng);
  for (auto& item : sample.items) item = forward(model, item);
  return sample;
}

double embedding_score(std::span<const double> z, std::span<const double> centroid,
                       const std::vector<Vector>& reserve) {
  double spread = 0.0;
  for (const auto& r : reserve) spread += squared_distance(r, z);
  return squared_distance(z, centroid) * spread;
}

double cluster_score(const std::vector<double>& member_scores) {
  if (member_scores.empty()) return 0.0;
  double s = 0.0;
  for (double v : member_scores) s += v;
  return s / static_cast<double>(member_scores.size());
}

double overlap_ratio(std::size_t h, const std::vector<Vector>& local_centroids,
                     const std::vector<Vector>& reserve_centroids) {
  if (local_centroids.size() < 2) {
    throw DegenerateGeometryError("overlap needs at least two local clusters");
  }
  if (reserve_centroids.empty()) throw DegenerateGeometryError("overlap needs reserve clusters");
  double remote = 0.0;
  for (const auto& c : reserve_centroids) remote += squared_distance(local_centroids[h], c);
  remote /= static_cast<double>(reserve_centroids.size());
  double local = 0.0;
  for (const auto& c : local_centroids) local += squared_distance(local_centroids[h], c);
  local /= static_cast<double>(local_centroids.size() - 1);
  if (!(local > 0.0)) throw DegenerateGeometryError("all local centroids coincide");
  return (remote - local) / local;
}

double overlap_factor(std::size_t h, const std::vector<Vector>& local_centroids,
                      const std::vector<Vector>& reserve_centroids, const OverlapParams& params) {
  if (!(params.sigma > 0.0)) throw ConfigError("overlap sigma must be positive");
  const double b = overlap_ratio(h, local_centroids, reserve_centroids);
  const double u = (b - params.mu) / params.sigma;
  return std::exp(-0.5 * u * u) / (params.sigma * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<double> implicit_macro_probs(const std::vector<double>& cluster_scores,
                                         const std::vector<double>& overlaps) {
  if (cluster_scores.size() != overlaps.size()) throw ShapeError("one overlap per cluster required");
  std::vector<double> out(cluster_scores.size());
  double total = 0.0;
  for (std::size_t h = 0; h < out.size(); ++h) {
    out[h] = cluster_scores[h] * overlaps[h];
    total += out[h];
  }
  if (!(total > 0.0)) throw EmptyCandidatesError("every cluster has zero importance");
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> implicit_micro_probs(const std::vector<double>& member_scores) {
  std::vector<double> out(member_scores.size());
  if (out.empty()) return out;
  double total = 0.0;
  for (double v : member_scores) total += v;
  for (std::size_t q = 0; q < out.size(); ++q) {
    out[q] = total > 0.0 ? member_scores[q] / total : 1.0 / static_cast<double>(out.size());
  }
  return out;
}

std::pair<ExchangePlan, SamplingTrace> sample_embedding_pull(const PullRequest& req,
                                                             const ReserveEmbeddings& reserve,
                                                             const CandidateSet& candidates,
                                                             const ImplicitSamplerParams& params,
                                                             Rng& rng) {
  if (candidates.size() == 0) throw EmptyCandidatesError("embedding pull from an empty candidate set");
  if (reserve.embeddings.empty()) throw EmptyCandidatesError("embedding pull without reserve embeddings");

  SamplingTrace trace;
  const std::size_t k_local = std::clamp<std::size_t>(params.z_local, 1, candidates.size());
  trace.clusters = kmeanspp(candidates.items, k_local, rng, params.kmeans);
  trace.candidate_cluster = trace.clusters.assignments;

  trace.item_scores.resize(candidates.size());
  for (std::size_t q = 0; q < candidates.size(); ++q) {
    trace.item_scores[q] = embedding_score(candidates.items[q],
                                           trace.clusters.centroids[trace.candidate_cluster[q]],
                                           reserve.embeddings);
  }
  const auto groups = trace.clusters.members();
  trace.cluster_scores.resize(k_local);
  trace.micro_probs.assign(candidates.size(), 0.0);
  for (std::size_t h = 0; h < k_local; ++h) {
    std::vector<double> scores;
    scores.reserve(groups[h].size());
    for (std::size_t q : groups[h]) scores.push_back(trace.item_scores[q]);
    trace.cluster_scores[h] = cluster_score(scores);
    const auto probs = implicit_micro_probs(scores);
    for (std::size_t r = 0; r < groups[h].size(); ++r) trace.micro_probs[groups[h][r]] = probs[r];
  }

  if (k_local >= 2) {
    const std::size_t k_reserve = std::clamp<std::size_t>(params.z_reserve, 1, reserve.embeddings.size());
    const ClusterModel remote = kmeanspp(reserve.embeddings, k_reserve, rng, params.kmeans);
    trace.overlaps.resize(k_local);
    for (std::size_t h = 0; h < k_local; ++h) {
      trace.overlaps[h] = overlap_factor(h, trace.clusters.centroids, remote.centroids, params.overlap);
    }
  } else {
    // A single local cluster is sampled with probability 1 whatever its overlap.
    trace.overlaps.assign(1, 1.0);
  }
  trace.macro_probs = implicit_macro_probs(trace.cluster_scores, trace.overlaps);
  trace.final_probs = combine_probabilities(trace.macro_probs, trace.micro_probs, trace.candidate_cluster);
  trace.sampled = draw_without_replacement(trace.final_probs, req.budget, rng);

  ExchangePlan plan = make_plan(req, candidates, trace.sampled, trace.final_probs);
  return {std::move(plan), std::move(trace)};
}

double reg_margin(const ClusterModel& local_clusters, double k) {
  if (!(k > 0.0)) throw ConfigError("regularization margin scale k must be positive");
  if (local_clusters.radii.empty()) return 0.0;
  double s = 0.0;
  for (double r : local_clusters.radii) s += r;
  return k * s / static_cast<double>(local_clusters.radii.size());
}

double reg_weight_freshness(long t, long aggregation_period) {
  if (aggregation_period < 2) throw ConfigError("T_a must be >= 2 for the staleness weight");
  return std::exp(-static_cast<double>(t % aggregation_period) /
                  static_cast<double>(aggregation_period - 1));
}

double reg_weight(long t, const StalenessParams& params) {
  if (params.total_steps <= 0) throw ConfigError("T must be positive for the staleness weight");
  const double zeta = params.zeta ? params.zeta(t) : 0.0;
  const double trend = std::exp(static_cast<double>(t) / static_cast<double>(params.total_steps) -
                                params.rho * zeta);
  return params.lambda * (reg_weight_freshness(t, params.aggregation_period) + trend);
}

}  // namespace cfcl
