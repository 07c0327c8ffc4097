#include <benchmark/benchmark.h>

#include <random>

#include "cfcl/clustering.hpp"
#include "cfcl/encoder.hpp"
#include "cfcl/explicit_exchange.hpp"
#include "cfcl/implicit_exchange.hpp"

using namespace cfcl;

namespace {

std::vector<Vector> gaussian(std::size_t n, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out)
    for (double& x : v) x = normal(rng);
  return out;
}

void BM_Forward(benchmark::State& state) {
  Rng rng(1);
  const EncoderModel m = make_encoder({2, 32, 16, 8}, Activation::relu, rng);
  const Vector x{0.3, -0.7};
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x));
}
BENCHMARK(BM_Forward);

void BM_LossGradient(benchmark::State& state) {
  Rng rng(2);
  const EncoderModel m = make_encoder({2, 32, 16, 8}, Activation::relu, rng);
  const auto pts = gaussian(96, 2, rng);
  std::vector<Triplet> batch;
  for (std::size_t q = 0; q < 32; ++q) batch.push_back({pts[3 * q], pts[3 * q + 1], pts[3 * q + 2]});
  RegularizerState reg;
  reg.reg_weight = 0.02;
  reg.reg_margin = 1.0;
  reg.received = {gaussian(static_cast<std::size_t>(state.range(0)), 8, rng)};
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(m, batch, 1.0, state.range(0) ? &reg : nullptr));
}
BENCHMARK(BM_LossGradient)->Arg(0)->Arg(35);

void BM_KMeans(benchmark::State& state) {
  Rng rng(3);
  const auto pts = gaussian(static_cast<std::size_t>(state.range(0)), 8, rng);
  KMeansOptions opts;
  opts.restarts = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(kmeanspp(pts, 10, rng, opts));
}
BENCHMARK(BM_KMeans)->Args({100, 1})->Args({100, 3})->Args({100, 20});

void BM_ExplicitPull(benchmark::State& state) {
  Rng rng(4);
  const EncoderModel m = make_encoder({2, 32, 16, 8}, Activation::relu, rng);
  CandidateSet approx;
  approx.items = gaussian(100, 2, rng);
  approx.source_indices.resize(100);
  ReserveData reserve;
  reserve.points = gaussian(10, 2, rng);
  reserve.source_indices.resize(10);
  ExplicitSamplerParams params;
  params.kmeans.restarts = 3;
  params.augmentation.steps.push_back({AugmentationFamily::gaussian_noise, 0.1});
  const PullRequest req{0, 1, 5, 0, &m};
  for (auto _ : state) benchmark::DoNotOptimize(sample_pull(req, reserve, approx, params, rng));
}
BENCHMARK(BM_ExplicitPull);

void BM_ImplicitPull(benchmark::State& state) {
  Rng rng(5);
  CandidateSet set;
  set.items = gaussian(100, 8, rng);
  set.source_indices.resize(100);
  ReserveEmbeddings reserve;
  reserve.embeddings = gaussian(10, 8, rng);
  ImplicitSamplerParams params;
  params.kmeans.restarts = 3;
  const PullRequest req{0, 1, 5, 0, nullptr};
  for (auto _ : state) benchmark::DoNotOptimize(sample_embedding_pull(req, reserve, set, params, rng));
}
BENCHMARK(BM_ImplicitPull);

}  // namespace

BENCHMARK_MAIN();
