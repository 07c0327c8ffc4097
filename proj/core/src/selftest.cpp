#include "cfcl/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "cfcl/clustering.hpp"
#include "cfcl/explicit_exchange.hpp"
#include "cfcl/implicit_exchange.hpp"

namespace cfcl {

namespace {

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

SelftestCheck close_to(const std::string& name, double got, double want, double rel) {
  const bool ok = std::abs(got - want) <= rel * std::abs(want);
  return {name, ok, fmt("got %.9g, expected %.9g", got, want)};
}

// Largest relative L2 error between the analytic and central-difference
// gradient over random small instances.
double gradient_error(bool regularized, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto vec = [&](std::size_t n) {
    Vector v(n);
    for (double& x : v) x = normal(rng);
    return v;
  };
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    EncoderModel model = make_encoder({3, 5, 4}, Activation::tanh, rng);
    std::vector<Triplet> batch;
    for (int b = 0; b < 3; ++b) batch.push_back({vec(3), vec(3), vec(3)});
    RegularizerState reg;
    reg.base_margin = 1.0;
    reg.reg_margin = 2.0;
    reg.reg_weight = 0.7;
    reg.received = {{vec(4), vec(4)}, {vec(4)}};
    auto loss = [&](const EncoderModel& m) {
      double s = 0.0;
      for (const auto& t : batch) s += regularized ? triplet_loss_regularized(m, t, reg) : triplet_loss(m, t, 1.0);
      return s / static_cast<double>(batch.size());
    };
    const Vector g = loss_gradient(model, batch, 1.0, regularized ? &reg : nullptr);
    Vector fd(g.size());
    const double h = 1e-5;
    for (std::size_t q = 0; q < g.size(); ++q) {
      EncoderModel up = model, down = model;
      up.weights[q] += h;
      down.weights[q] -= h;
      fd[q] = (loss(up) - loss(down)) / (2 * h);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
      num += (g[q] - fd[q]) * (g[q] - fd[q]);
      den += fd[q] * fd[q];
    }
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

bool is_distribution(const std::vector<double>& p) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= 1e-9;
}

SelftestCheck distributions(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto points = [&](std::size_t n, std::size_t d) {
    std::vector<Vector> out(n, Vector(d));
    for (auto& v : out)
      for (double& x : v) x = normal(rng);
    return out;
  };
  const EncoderModel model = make_encoder({2, 6, 3}, Activation::relu, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto local = points(40, 2);
    ReserveData reserve = select_reserve(points(30, 2), 4, rng);
    const CandidateSet approx = approx_local(local, 20, rng);
    PullRequest req{0, 1, 5, 0, &model};
    ExplicitSamplerParams ep;
    ep.k_macro = 3;
    ep.augmentation.steps.push_back({AugmentationFamily::gaussian_noise, 0.05});
    const auto [plan, trace] = sample_pull(req, reserve, approx, ep, rng);
    if (!is_distribution(trace.macro_probs) || !is_distribution(trace.final_probs)) {
      return {"distribution sums", false, "explicit sampler"};
    }
    const ReserveEmbeddings remb = reserve_embeddings(reserve, model, 0);
    const CandidateSet cands = candidate_embeddings(local, model, 20, rng);
    ImplicitSamplerParams ip;
    ip.z_local = 3;
    ip.z_reserve = 2;
    const auto [iplan, itrace] = sample_embedding_pull(req, remb, cands, ip, rng);
    if (!is_distribution(itrace.macro_probs) || !is_distribution(itrace.final_probs)) {
      return {"distribution sums", false, "implicit sampler"};
    }
  }
  return {"distribution sums", true, "50 explicit and 50 implicit instances"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const CostModel& cost) {
  std::vector<SelftestCheck> checks;
  auto guarded = [&](const std::string& name, const std::function<SelftestCheck()>& fn) {
    try {
      checks.push_back(fn());
    } catch (const std::exception& e) {
      checks.push_back({name, false, e.what()});
    }
  };

  guarded("accounting: datapoint pull", [&] {
    return close_to("accounting: datapoint pull",
                    account_event(EventKind::pull, {PayloadKind::datapoints, 1, 784}, cost).seconds, 6.272e-3, 1e-6);
  });
  guarded("accounting: embedding pull", [&] {
    return close_to("accounting: embedding pull",
                    account_event(EventKind::pull, {PayloadKind::embeddings, 1, 16}, cost).seconds, 5.12e-4, 1e-6);
  });
  guarded("accounting: model upload", [&] {
    return close_to("accounting: model upload",
                    account_event(EventKind::upload, {PayloadKind::model_params, 1, 45433}, cost).seconds, 1.453856,
                    1e-6);
  });
  guarded("accounting: bytes", [&] {
    return close_to("accounting: bytes",
                    account_event(EventKind::pull, {PayloadKind::datapoints, 1, 784}, cost).bytes, 784.0, 1e-12);
  });

  Rng rng = derive_rng(20240611, {1});
  guarded("gradient: triplet loss", [&] {
    const double err = gradient_error(false, rng);
    return SelftestCheck{"gradient: triplet loss", err < 1e-4, fmt("relative error %.3g (limit %.0e)", err, 1e-4)};
  });
  guarded("gradient: regularized loss", [&] {
    const double err = gradient_error(true, rng);
    return SelftestCheck{"gradient: regularized loss", err < 1e-4, fmt("relative error %.3g (limit %.0e)", err, 1e-4)};
  });
  guarded("distribution sums", [&] { return distributions(rng); });

  guarded("staleness weight", [&] {
    StalenessParams params;
    params.aggregation_period = 25;
    params.total_steps = 2000;
    return close_to("staleness weight", reg_weight(12, params), 1.61255, 1e-5);
  });
  guarded("kmeans objective monotone", [&] {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> pts(200, Vector(2));
    for (auto& p : pts)
      for (double& x : p) x = normal(rng);
    std::vector<double> trace;
    KMeansOptions opts;
    opts.objective_trace = &trace;
    kmeanspp(pts, 5, rng, opts);
    bool ok = true;
    for (std::size_t q = 1; q < trace.size(); ++q) ok = ok && trace[q] <= trace[q - 1] + 1e-12;
    return SelftestCheck{"kmeans objective monotone", ok, std::to_string(trace.size()) + " objective values"};
  });
  return checks;
}

}  // namespace cfcl
