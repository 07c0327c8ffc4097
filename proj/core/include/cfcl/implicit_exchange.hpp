#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "cfcl/clustering.hpp"
#include "cfcl/encoder.hpp"
#include "cfcl/exchange.hpp"
#include "cfcl/explicit_exchange.hpp"

namespace cfcl {

// Embeddings of a device's reserve datapoints under the model current at
// `generated_at`; refreshed after every aggregation.
struct ReserveEmbeddings {
  std::size_t owner = 0;
  std::size_t target = 0;
  long generated_at = 0;
  std::vector<Vector> embeddings;
};

ReserveEmbeddings reserve_embeddings(const ReserveData& reserve, const EncoderModel& model,
                                     long generated_at);
ReserveEmbeddings reserve_embeddings(const std::vector<Vector>& dataset, const EncoderModel& model,
                                     std::size_t k_reserve, Rng& rng,
                                     const KMeansOptions& options = {});

// Uniform K_approx sample of the dataset mapped through the model. Items are
// embeddings; source indices stay local.
CandidateSet candidate_embeddings(const std::vector<Vector>& dataset, const EncoderModel& model,
                                  std::size_t k_approx, Rng& rng);

// s(z) = |z - mu_h|^2 * sum_{z' in reserve} |z' - z|^2.
double embedding_score(std::span<const double> z, std::span<const double> centroid,
                       const std::vector<Vector>& reserve);

// Mean member score; 0 for an empty cluster.
double cluster_score(const std::vector<double>& member_scores);

struct OverlapParams {
  double mu = 0.0;
  double sigma = 1.0;
};

// b(h): relative excess of the mean squared distance from local centroid h to
// the reserve centroids over its mean squared distance to the other local
// centroids.
double overlap_ratio(std::size_t h, const std::vector<Vector>& local_centroids,
                     const std::vector<Vector>& reserve_centroids);

// B(h) = N(b(h); mu, sigma) density.
double overlap_factor(std::size_t h, const std::vector<Vector>& local_centroids,
                      const std::vector<Vector>& reserve_centroids, const OverlapParams& params);

// P(h) proportional to S(h) * B(h), renormalized.
std::vector<double> implicit_macro_probs(const std::vector<double>& cluster_scores,
                                         const std::vector<double>& overlaps);

// s(z) / sum over the cluster; uniform when every score in the cluster is 0.
std::vector<double> implicit_micro_probs(const std::vector<double>& member_scores);

struct ImplicitSamplerParams {
  std::size_t z_local = 10;
  std::size_t z_reserve = 10;
  OverlapParams overlap;
  KMeansOptions kmeans;
};

std::pair<ExchangePlan, SamplingTrace> sample_embedding_pull(const PullRequest& req,
                                                             const ReserveEmbeddings& reserve,
                                                             const CandidateSet& candidates,
                                                             const ImplicitSamplerParams& params,
                                                             Rng& rng);

// k times the mean radius over all local clusters.
double reg_margin(const ClusterModel& local_clusters, double k);

struct StalenessParams {
  double lambda = 1.0;
  double rho = 0.0;
  // zeta(t); null means zeta_t = 0.
  std::function<double(long)> zeta;
  long aggregation_period = 25;
  long total_steps = 2000;
};

// W_t = lambda * (exp(-(t mod T_a) / (T_a - 1)) + exp(t / T - rho * zeta_t)).
double reg_weight(long t, const StalenessParams& params);

// First (sawtooth) term of W_t without lambda.
double reg_weight_freshness(long t, long aggregation_period);

}  // namespace cfcl
