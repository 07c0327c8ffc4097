#pragma once

#include <vector>

#include "cfcl/clustering.hpp"
#include "cfcl/common.hpp"
#include "cfcl/encoder.hpp"

namespace cfcl {

// Receiver i asks transmitter j for `budget` information units at time t.
// `model` is the model used for importance scoring (normally the latest
// global model).
struct PullRequest {
  std::size_t receiver = 0;
  std::size_t transmitter = 0;
  std::size_t budget = 0;
  long t = 0;
  const EncoderModel* model = nullptr;
};

// Candidate items at the transmitter together with their source indices in
// the transmitter's local dataset. Source indices never leave the
// transmitter; they are kept for provenance auditing only.
struct CandidateSet {
  std::vector<Vector> items;
  std::vector<std::size_t> source_indices;

  std::size_t size() const { return items.size(); }
};

// Items pulled over one link plus the final distribution they were drawn
// from (indexed like the candidate set).
struct ExchangePlan {
  std::size_t receiver = 0;
  std::size_t transmitter = 0;
  long t = 0;
  std::vector<Vector> items;
  std::vector<std::size_t> candidate_indices;
  std::vector<std::size_t> source_indices;
  std::vector<double> probabilities;
};

struct SamplingTrace {
  ClusterModel clusters;
  // Cluster of each candidate, indexing macro_probs.
  std::vector<std::size_t> candidate_cluster;
  std::vector<double> macro_probs;
  std::vector<double> micro_probs;
  std::vector<double> final_probs;
  std::vector<std::size_t> sampled;
  // Embedding-exchange extras; empty for datapoint pulls.
  std::vector<double> item_scores;
  std::vector<double> cluster_scores;
  std::vector<double> overlaps;
};

// Final per-candidate probabilities P(c) = P_micro(c) * P_macro(cluster(c)).
std::vector<double> combine_probabilities(const std::vector<double>& macro,
                                          const std::vector<double>& micro,
                                          const std::vector<std::size_t>& candidate_cluster);

// Fills plan items from the candidate set given sampled candidate indices.
ExchangePlan make_plan(const PullRequest& req, const CandidateSet& candidates,
                       std::vector<std::size_t> sampled, std::vector<double> probabilities);

// Uniform candidate sample of size k without replacement.
CandidateSet approx_local(const std::vector<Vector>& dataset, std::size_t k, Rng& rng);

// Uniform pull without replacement (baseline). The plan carries the uniform
// distribution over candidates.
ExchangePlan sample_pull_uniform(const PullRequest& req, const CandidateSet& candidates, Rng& rng);

// K-means over the candidates' `embeddings` (K = k_clusters) and a pull of the
// members nearest each centroid, round-robin when budget > k_clusters.
ExchangePlan sample_pull_kmeans(const PullRequest& req, const CandidateSet& candidates,
                                const std::vector<Vector>& embeddings, std::size_t k_clusters,
                                Rng& rng, const KMeansOptions& options = {});

}  // namespace cfcl
