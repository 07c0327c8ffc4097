#pragma once

#include <utility>
#include <vector>

#include "cfcl/clustering.hpp"
#include "cfcl/data.hpp"
#include "cfcl/encoder.hpp"
#include "cfcl/exchange.hpp"

namespace cfcl {

// Representative datapoints device `owner` pushes to neighbour `target`.
struct ReserveData {
  std::size_t owner = 0;
  std::size_t target = 0;
  std::vector<Vector> points;
  std::vector<std::size_t> source_indices;
};

// K-means++ with K clusters over the dataset; returns each cluster's member
// nearest its centroid.
ReserveData select_reserve(const std::vector<Vector>& dataset, std::size_t k, Rng& rng,
                           const KMeansOptions& options = {});

ReserveData select_reserve_uniform(const std::vector<Vector>& dataset, std::size_t k, Rng& rng);

struct MacroSampling {
  ClusterModel clusters;  // over approx embeddings followed by reserve embeddings
  std::vector<std::size_t> approx_counts;
  std::vector<std::size_t> reserve_counts;
  std::vector<double> ratios;  // X(l); 0 for clusters without approx points
  std::vector<double> probs;
  std::vector<std::size_t> approx_cluster;  // cluster of each approx point
};

// X(l) = A(l) / (A(l) + R(l)) normalized to a distribution; clusters with no
// approx points get X = 0.
std::vector<double> macro_from_counts(const std::vector<std::size_t>& approx_counts,
                                      const std::vector<std::size_t>& reserve_counts);

// Joint K-means++ over both embedding sets followed by macro_from_counts.
MacroSampling macro_probs(const std::vector<Vector>& approx_emb,
                          const std::vector<Vector>& reserve_emb, std::size_t k_clusters,
                          Rng& rng, const KMeansOptions& options = {});

// Mean hinge loss of each candidate used as the negative against every
// (anchor, positive) reserve pair.
std::vector<double> expected_negative_losses(const std::vector<Vector>& anchor_emb,
                                             const std::vector<Vector>& positive_emb,
                                             const std::vector<Vector>& candidate_emb,
                                             double margin);

// Softmax of temperature * score (max-subtracted).
std::vector<double> micro_probs(const std::vector<double>& expected_losses, double temperature);

struct ExplicitSamplerParams {
  std::size_t k_macro = 10;
  double margin = 1.0;
  double temperature = 1.0;
  AugmentationSpec augmentation;
  KMeansOptions kmeans;
};

// Two-stage importance pull: macro probabilities from the joint clustering of
// candidate and reserve embeddings, micro probabilities from the expected
// loss of each candidate as a negative for the receiver's reserve anchors
// (one fresh augmentation per anchor per call). Draws min(budget, |approx|)
// distinct candidates by sequential renormalized draws.
std::pair<ExchangePlan, SamplingTrace> sample_pull(const PullRequest& req,
                                                   const ReserveData& reserve,
                                                   const CandidateSet& approx,
                                                   const ExplicitSamplerParams& params,
                                                   Rng& rng);

}  // namespace cfcl
