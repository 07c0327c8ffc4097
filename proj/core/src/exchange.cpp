#include "cfcl/exchange.hpp"

#include <algorithm>
#include <string>

namespace cfcl {

std::vector<double> combine_probabilities(const std::vector<double>& macro,
                                          const std::vector<double>& micro,
                                          const std::vector<std::size_t>& candidate_cluster) {
  std::vector<double> out(micro.size());
  for (std::size_t q = 0; q < micro.size(); ++q) out[q] = micro[q] * macro[candidate_cluster[q]];
  return out;
}

ExchangePlan make_plan(const PullRequest& req, const CandidateSet& candidates,
                       std::vector<std::size_t> sampled, std::vector<double> probabilities) {
  ExchangePlan plan;
  plan.receiver = req.receiver;
  plan.transmitter = req.transmitter;
  plan.t = req.t;
  for (std::size_t q : sampled) {
    plan.items.push_back(candidates.items[q]);
    plan.source_indices.push_back(candidates.source_indices[q]);
  }
  plan.candidate_indices = std::move(sampled);
  plan.probabilities = std::move(probabilities);
  return plan;
}

CandidateSet approx_local(const std::vector<Vector>& dataset, std::size_t k, Rng& rng) {
  if (k > dataset.size()) {
    throw InfeasibleError("K_approx=" + std::to_string(k) + " exceeds local dataset size " +
                          std::to_string(dataset.size()));
  }
  CandidateSet out;
  out.source_indices = uniform_subset(dataset.size(), k, rng);
  out.items.reserve(k);
  for (std::size_t q : out.source_indices) out.items.push_back(dataset[q]);
  return out;
}

ExchangePlan sample_pull_uniform(const PullRequest& req, const CandidateSet& candidates, Rng& rng) {
  if (candidates.size() == 0) throw EmptyCandidatesError("uniform pull from an empty candidate set");
  const std::size_t n = std::min(req.budget, candidates.size());
  std::vector<double> probs(candidates.size(), 1.0 / static_cast<double>(candidates.size()));
  return make_plan(req, candidates, uniform_subset(candidates.size(), n, rng), std::move(probs));
}

ExchangePlan sample_pull_kmeans(const PullRequest& req, const CandidateSet& candidates,
                                const std::vector<Vector>& embeddings, std::size_t k_clusters,
                                Rng& rng, const KMeansOptions& options) {
  if (candidates.size() == 0) throw EmptyCandidatesError("K-means pull from an empty candidate set");
  if (embeddings.size() != candidates.size()) throw ShapeError("one embedding per candidate required");
  const std::size_t k = std::clamp<std::size_t>(k_clusters, 1, candidates.size());
  const ClusterModel clusters = kmeanspp(embeddings, k, rng, options);
  auto picked = centroid_representatives(clusters, embeddings, req.budget);
  std::vector<double> probs(candidates.size(), 0.0);
  for (std::size_t q : picked) probs[q] = 1.0 / static_cast<double>(picked.size());
  return make_plan(req, candidates, std::move(picked), std::move(probs));
}

}  // namespace cfcl
