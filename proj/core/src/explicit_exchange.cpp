#include "cfcl/explicit_exchange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cfcl {

ReserveData select_reserve(const std::vector<Vector>& dataset, std::size_t k, Rng& rng,
                           const KMeansOptions& options) {
  if (k == 0 || k > dataset.size()) {
    throw InfeasibleError("K_reserve=" + std::to_string(k) + " infeasible for dataset of size " +
                          std::to_string(dataset.size()));
  }
  const ClusterModel clusters = kmeanspp(dataset, k, rng, options);
  ReserveData out;
  out.source_indices = centroid_representatives(clusters, dataset, k);
  for (std::size_t q : out.source_indices) out.points.push_back(dataset[q]);
  return out;
}

ReserveData select_reserve_uniform(const std::vector<Vector>& dataset, std::size_t k, Rng& rng) {
  if (k == 0 || k > dataset.size()) {
    throw InfeasibleError("K_reserve=" + std::to_string(k) + " infeasible for dataset of size " +
                          std::to_string(dataset.size()));
  }
  ReserveData out;
  out.source_indices = uniform_subset(dataset.size(), k, rng);
  for (std::size_t q : out.source_indices) out.points.push_back(dataset[q]);
  return out;
}

std::vector<double> macro_from_counts(const std::vector<std::size_t>& approx_counts,
                                      const std::vector<std::size_t>& reserve_counts) {
  std::vector<double> x(approx_counts.size(), 0.0);
  double total = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (approx_counts[l] == 0) continue;
    x[l] = static_cast<double>(approx_counts[l]) /
           static_cast<double>(approx_counts[l] + reserve_counts[l]);
    total += x[l];
  }
  if (!(total > 0.0)) throw EmptyCandidatesError("no cluster holds a candidate point");
  for (double& v : x) v /= total;
  return x;
}

MacroSampling macro_probs(const std::vector<Vector>& approx_emb,
                          const std::vector<Vector>& reserve_emb, std::size_t k_clusters,
                          Rng& rng, const KMeansOptions& options) {
  if (approx_emb.empty()) throw EmptyCandidatesError("macro sampling without candidates");
  if (reserve_emb.empty()) throw EmptyCandidatesError("macro sampling without reserve embeddings");
  std::vector<Vector> joint = approx_emb;
  joint.insert(joint.end(), reserve_emb.begin(), reserve_emb.end());
  const std::size_t k = std::clamp<std::size_t>(k_clusters, 1, joint.size());

  MacroSampling out;
  out.clusters = kmeanspp(joint, k, rng, options);
  out.approx_counts.assign(k, 0);
  out.reserve_counts.assign(k, 0);
  out.approx_cluster.resize(approx_emb.size());
  for (std::size_t q = 0; q < joint.size(); ++q) {
    const std::size_t l = out.clusters.assignments[q];
    if (q < approx_emb.size()) {
      ++out.approx_counts[l];
      out.approx_cluster[q] = l;
    } else {
      ++out.reserve_counts[l];
    }
  }
  out.probs = macro_from_counts(out.approx_counts, out.reserve_counts);
  out.ratios.assign(k, 0.0);
  for (std::size_t l = 0; l < k; ++l) {
    if (out.approx_counts[l] == 0) continue;
    out.ratios[l] = static_cast<double>(out.approx_counts[l]) /
                    static_cast<double>(out.approx_counts[l] + out.reserve_counts[l]);
  }
  return out;
}

std::vector<double> expected_negative_losses(const std::vector<Vector>& anchor_emb,
                                             const std::vector<Vector>& positive_emb,
                                             const std::vector<Vector>& candidate_emb,
                                             double margin) {
  if (anchor_emb.size() != positive_emb.size()) throw ShapeError("one positive per anchor required");
  std::vector<double> out(candidate_emb.size(), 0.0);
  if (anchor_emb.empty()) return out;
  for (std::size_t c = 0; c < candidate_emb.size(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < anchor_emb.size(); ++r)
      s += hinge_on_embeddings(anchor_emb[r], positive_emb[r], candidate_emb[c], margin);
    out[c] = s / static_cast<double>(anchor_emb.size());
  }
  return out;
}

std::vector<double> micro_probs(const std::vector<double>& expected_losses, double temperature) {
  if (!std::isfinite(temperature)) throw ConfigError("selection temperature must be finite");
  std::vector<double> out(expected_losses.size());
  if (out.empty()) return out;
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : expected_losses) peak = std::max(peak, temperature * v);
  double total = 0.0;
  for (std::size_t q = 0; q < out.size(); ++q) {
    out[q] = std::exp(temperature * expected_losses[q] - peak);
    total += out[q];
  }
  for (double& v : out) v /= total;
  return out;
}

std::pair<ExchangePlan, SamplingTrace> sample_pull(const PullRequest& req,
                                                   const ReserveData& reserve,
                                                   const CandidateSet& approx,
                                                   const ExplicitSamplerParams& params,
                                                   Rng& rng) {
  if (approx.size() == 0) throw EmptyCandidatesError("explicit pull from an empty candidate set");
  if (req.model == nullptr) throw ConfigError("explicit pull needs an importance model");
  const EncoderModel& model = *req.model;

  const std::vector<Vector> candidate_emb = forward_all(model, approx.items);
  const std::vector<Vector> anchor_emb = forward_all(model, reserve.points);
  std::vector<Vector> positive_emb;
  positive_emb.reserve(reserve.points.size());
  for (const auto& d : reserve.points) positive_emb.push_back(forward(model, augment(d, params.augmentation, rng)));

  MacroSampling macro = macro_probs(candidate_emb, anchor_emb, params.k_macro, rng, params.kmeans);
  const std::vector<double> losses =
      expected_negative_losses(anchor_emb, positive_emb, candidate_emb, params.margin);

  SamplingTrace trace;
  trace.candidate_cluster = macro.approx_cluster;
  trace.micro_probs.assign(approx.size(), 0.0);
  const std::size_t k = macro.clusters.cluster_count();
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t q = 0; q < approx.size(); ++q) groups[trace.candidate_cluster[q]].push_back(q);
  for (const auto& g : groups) {
    if (g.empty()) continue;
    std::vector<double> cluster_losses;
    cluster_losses.reserve(g.size());
    for (std::size_t q : g) cluster_losses.push_back(losses[q]);
    const auto probs = micro_probs(cluster_losses, params.temperature);
    for (std::size_t r = 0; r < g.size(); ++r) trace.micro_probs[g[r]] = probs[r];
  }
  trace.macro_probs = macro.probs;
  trace.clusters = std::move(macro.clusters);
  trace.final_probs = combine_probabilities(trace.macro_probs, trace.micro_probs, trace.candidate_cluster);
  trace.sampled = draw_without_replacement(trace.final_probs, req.budget, rng);

  ExchangePlan plan = make_plan(req, approx, trace.sampled, trace.final_probs);
  return {std::move(plan), std::move(trace)};
}

}  // namespace cfcl
