// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cfcl/config.hpp"
#include "cfcl/encoder.hpp"
#include "cfcl/explicit_exchange.hpp"
#include "cfcl/federation.hpp"
#include "cfcl/implicit_exchange.hpp"
#include "cfcl/metrics.hpp"

using namespace cfcl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sq(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

// Linear encoder that maps R^2 to itself unchanged.
EncoderModel identity2() {
  EncoderModel m = make_zero_encoder({2, 2});
  m.weights = {1, 0, 0, 1, 0, 0};
  return m;
}

// ---------------------------------------------------------------- 1

Outcome accounting() {
  const CostModel cost;
  struct Case {
    const char* what;
    double got, want;
  };
  const Case cases[] = {
      {"datapoint", account_event(EventKind::pull, {PayloadKind::datapoints, 1, 784}, cost).seconds, 6.272e-3},
      {"embedding", account_event(EventKind::pull, {PayloadKind::embeddings, 1, 16}, cost).seconds, 5.12e-4},
      {"upload", account_event(EventKind::upload, {PayloadKind::model_params, 1, 45433}, cost).seconds, 1.453856},
  };
  Outcome o{true, ""};
  for (const auto& c : cases) {
    // Six significant figures.
    const bool ok = std::abs(c.got - c.want) <= 5e-7 * std::abs(c.want);
    o.pass = o.pass && ok;
    o.detail += fmt("%s %.7g s; ", c.what, c.got);
  }
  return o;
}

// ---------------------------------------------------------------- 2

// Smallest |pre-activation| over hidden units, computed independently of the
// library's forward pass.
double hidden_kink(const EncoderModel& m, const Vector& x) {
  double closest = 1e300;
  Vector prev = x;
  std::size_t off = 0;
  for (std::size_t k = 0; k + 2 < m.layer_dims.size(); ++k) {
    const std::size_t in = m.layer_dims[k], out = m.layer_dims[k + 1];
    Vector next(out);
    for (std::size_t r = 0; r < out; ++r) {
      double s = m.weights[off + in * out + r];
      for (std::size_t c = 0; c < in; ++c) s += m.weights[off + r * in + c] * prev[c];
      closest = std::min(closest, std::abs(s));
      next[r] = m.activation == Activation::relu ? std::max(s, 0.0) : std::tanh(s);
    }
    prev = std::move(next);
    off += (in + 1) * out;
  }
  return closest;
}

Outcome gradient_oracle() {
  Rng rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto vec = [&](std::size_t n) {
    Vector v(n);
    for (double& x : v) x = normal(rng);
    return v;
  };
  const std::vector<std::vector<std::size_t>> shapes = {{2, 32, 16, 8}, {3, 6, 4, 2}, {4, 5, 3}, {2, 8, 8, 4}};
  double worst = 0.0;
  int instances = 0, skipped = 0;
  while (instances < 100) {
    const auto& dims = shapes[static_cast<std::size_t>(instances) % shapes.size()];
    const Activation act = (instances / 4) % 2 ? Activation::tanh : Activation::relu;
    EncoderModel m = make_encoder(dims, act, rng);
    for (double& w : m.weights) w += 0.05 * normal(rng);
    const std::size_t in = dims.front(), out = dims.back();
    std::vector<Triplet> batch;
    for (int b = 0; b < 2; ++b) batch.push_back({vec(in), vec(in), vec(in)});
    RegularizerState reg;
    reg.base_margin = 1.0;
    reg.reg_margin = 1.5;
    reg.reg_weight = 0.9;
    reg.received = {{vec(out), vec(out)}, {vec(out)}};

    // Central differences are only meaningful away from hinge and ReLU kinks.
    double kink = 1e300;
    for (const auto& t : batch) {
      const Vector a = forward(m, t.anchor), p = forward(m, t.positive), n = forward(m, t.negative);
      kink = std::min(kink, std::abs(sq(a, p) - sq(a, n) + reg.base_margin));
      for (const auto& set : reg.received)
        for (const auto& z : set) kink = std::min(kink, std::abs(sq(a, p) - sq(a, z) + reg.reg_margin));
      if (act == Activation::relu)
        for (const Vector* x : {&t.anchor, &t.positive, &t.negative}) kink = std::min(kink, hidden_kink(m, *x));
    }
    if (kink < 1e-3) {
      ++skipped;
      continue;
    }
    for (const bool regularized : {false, true}) {
      auto loss = [&](const EncoderModel& x) {
        double s = 0.0;
        for (const auto& t : batch) s += regularized ? triplet_loss_regularized(x, t, reg) : triplet_loss(x, t, 1.0);
        return s / static_cast<double>(batch.size());
      };
      const Vector g = loss_gradient(m, batch, 1.0, regularized ? &reg : nullptr);
      double num = 0.0, den = 0.0;
      for (std::size_t q = 0; q < g.size(); ++q) {
        EncoderModel up = m, down = m;
        up.weights[q] += 1e-5;
        down.weights[q] -= 1e-5;
        const double fd = (loss(up) - loss(down)) / 2e-5;
        num += (g[q] - fd) * (g[q] - fd);
        den += fd * fd;
      }
      worst = std::max(worst, den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
    }
    ++instances;
  }
  return {worst < 1e-4, fmt("100 instances x {plain, regularized}, worst relative L2 error %.3g (%d near-kink draws redrawn)",
                            worst, skipped)};
}

// ---------------------------------------------------------------- 3

struct FrequencyCheck {
  bool ok = true;
  double worst_sigma = 0.0;
};

FrequencyCheck compare_frequencies(const std::vector<double>& p, const std::vector<long>& counts, long trials) {
  FrequencyCheck f;
  for (std::size_t q = 0; q < p.size(); ++q) {
    const double freq = static_cast<double>(counts[q]) / static_cast<double>(trials);
    const double sigma = std::sqrt(p[q] * (1.0 - p[q]) / static_cast<double>(trials));
    const double z = sigma > 0.0 ? std::abs(freq - p[q]) / sigma : (freq == p[q] ? 0.0 : 1e9);
    f.worst_sigma = std::max(f.worst_sigma, z);
    f.ok = f.ok && z <= 3.0;
  }
  return f;
}

Outcome sampler_exactness() {
  const long trials = 100000;
  Outcome o{true, ""};

  // Explicit: two clusters of three candidates, one reserve point near the
  // first cluster and two near the second.
  {
    const std::vector<Vector> cand = {{0, 0}, {0.3, 0}, {0, 0.4}, {6, 6}, {6.2, 6}, {6, 6.5}};
    const std::vector<Vector> reserve = {{0.2, 0.2}, {6.1, 6.1}, {5.9, 6.2}};
    const double margin = 1.0, temperature = 3.0;
    // Direct evaluation: X = A / (A + R) per cluster, normalized; micro is a
    // softmax of the mean hinge over reserve anchors (positive = anchor).
    const double xa = 3.0 / 4.0, xb = 3.0 / 5.0;
    const double macro[2] = {xa / (xa + xb), xb / (xa + xb)};
    std::vector<double> expected(6);
    for (int c = 0; c < 2; ++c) {
      double z = 0.0;
      double e[3];
      for (int q = 0; q < 3; ++q) {
        double loss = 0.0;
        for (const auto& d : reserve) loss += std::max(0.0, margin - sq(d, cand[3 * c + q]));
        e[q] = std::exp(temperature * loss / 3.0);
        z += e[q];
      }
      for (int q = 0; q < 3; ++q) expected[3 * c + q] = macro[c] * e[q] / z;
    }

    const EncoderModel id = identity2();
    CandidateSet approx;
    approx.items = cand;
    approx.source_indices = {0, 1, 2, 3, 4, 5};
    ReserveData rd;
    rd.points = reserve;
    rd.source_indices = {0, 1, 2};
    ExplicitSamplerParams params;
    params.k_macro = 2;
    params.margin = margin;
    params.temperature = temperature;
    PullRequest req{0, 1, 1, 0, &id};
    Rng rng = derive_rng(3, {1});
    std::vector<long> counts(6, 0);
    double analytic_err = 0.0;
    for (long r = 0; r < trials; ++r) {
      const auto [plan, trace] = sample_pull(req, rd, approx, params, rng);
      if (r == 0)
        for (std::size_t q = 0; q < 6; ++q) analytic_err = std::max(analytic_err, std::abs(trace.final_probs[q] - expected[q]));
      ++counts[trace.sampled.at(0)];
    }
    const auto f = compare_frequencies(expected, counts, trials);
    o.pass = o.pass && f.ok && analytic_err <= 1e-12;
    o.detail += fmt("explicit: analytic vs direct %.2g, worst deviation %.2f sigma; ", analytic_err, f.worst_sigma);
  }

  // Implicit: six embeddings in two local clusters, reserve embeddings in two
  // clusters.
  {
    const std::vector<Vector> cand = {{0, 0}, {0.5, 0}, {0, 0.7}, {5, 5}, {5.6, 5}, {5, 5.3}};
    const std::vector<Vector> reserve = {{1, 1}, {1.2, 1}, {8, 8}};
    const std::vector<Vector> reserve_centroids = {{1.1, 1}, {8, 8}};
    std::vector<Vector> centroids(2, Vector(2, 0.0));
    for (int c = 0; c < 2; ++c)
      for (int q = 0; q < 3; ++q)
        for (int d = 0; d < 2; ++d) centroids[c][d] += cand[3 * c + q][d] / 3.0;
    std::vector<double> s(6);
    for (int q = 0; q < 6; ++q) {
      double tot = 0.0;
      for (const auto& z : reserve) tot += sq(z, cand[q]);
      s[q] = sq(cand[q], centroids[q / 3]) * tot;
    }
    double weight[2];
    for (int c = 0; c < 2; ++c) {
      const double S = (s[3 * c] + s[3 * c + 1] + s[3 * c + 2]) / 3.0;
      const double to_reserve = (sq(centroids[c], reserve_centroids[0]) + sq(centroids[c], reserve_centroids[1])) / 2.0;
      const double to_local = sq(centroids[c], centroids[1 - c]);
      const double b = (to_reserve - to_local) / to_local;
      const double B = std::exp(-0.5 * b * b) / std::sqrt(2.0 * std::acos(-1.0));
      weight[c] = S * B;
    }
    std::vector<double> expected(6);
    for (int q = 0; q < 6; ++q) {
      const int c = q / 3;
      const double within = s[q] / (s[3 * c] + s[3 * c + 1] + s[3 * c + 2]);
      expected[q] = weight[c] / (weight[0] + weight[1]) * within;
    }

    CandidateSet set;
    set.items = cand;
    set.source_indices = {0, 1, 2, 3, 4, 5};
    ReserveEmbeddings re;
    re.embeddings = reserve;
    ImplicitSamplerParams params;
    params.z_local = 2;
    params.z_reserve = 2;
    PullRequest req{0, 1, 1, 0, nullptr};
    Rng rng = derive_rng(3, {2});
    std::vector<long> counts(6, 0);
    double analytic_err = 0.0;
    for (long r = 0; r < trials; ++r) {
      const auto [plan, trace] = sample_embedding_pull(req, re, set, params, rng);
      if (r == 0)
        for (std::size_t q = 0; q < 6; ++q) analytic_err = std::max(analytic_err, std::abs(trace.final_probs[q] - expected[q]));
      ++counts[trace.sampled.at(0)];
    }
    const auto f = compare_frequencies(expected, counts, trials);
    o.pass = o.pass && f.ok && analytic_err <= 1e-12;
    o.detail += fmt("implicit: analytic vs direct %.2g, worst deviation %.2f sigma", analytic_err, f.worst_sigma);
  }
  return o;
}

// ---------------------------------------------------------------- 4

bool valid_distribution(const std::vector<double>& p) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= 1e-9;
}

// Micro probabilities must sum to one within every non-empty cluster.
bool valid_micro(const std::vector<double>& micro, const std::vector<std::size_t>& cluster, std::size_t k) {
  std::vector<double> sums(k, 0.0);
  std::vector<bool> used(k, false);
  for (std::size_t q = 0; q < micro.size(); ++q) {
    if (!(micro[q] >= 0.0 && micro[q] <= 1.0)) return false;
    sums[cluster[q]] += micro[q];
    used[cluster[q]] = true;
  }
  for (std::size_t c = 0; c < k; ++c)
    if (used[c] && std::abs(sums[c] - 1.0) > 1e-9) return false;
  return true;
}

Outcome distribution_validity() {
  Rng rng(44);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto points = [&](std::size_t n, std::size_t dim, double scale) {
    std::vector<Vector> out(n, Vector(dim));
    for (auto& v : out)
      for (double& x : v) x = scale * normal(rng);
    return out;
  };
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
  };
  int explicit_bad = 0, implicit_bad = 0, errors = 0;
  for (int r = 0; r < 1000; ++r) {
    try {
      const std::size_t dim = pick(2, 6);
      const EncoderModel model = make_encoder({dim, 8, 4}, Activation::relu, rng);
      CandidateSet approx;
      approx.items = points(pick(3, 40), dim, 2.0);
      approx.source_indices.resize(approx.items.size());
      std::iota(approx.source_indices.begin(), approx.source_indices.end(), std::size_t{0});
      ReserveData rd;
      rd.points = points(pick(1, 10), dim, 2.0);
      rd.source_indices.resize(rd.points.size());
      ExplicitSamplerParams params;
      params.k_macro = pick(1, 8);
      params.temperature = 0.1 + 5.0 * uniform01(rng);
      params.augmentation.steps.push_back({AugmentationFamily::gaussian_noise, 0.1});
      PullRequest req{0, 1, pick(1, approx.size()), 0, &model};
      const auto [plan, trace] = sample_pull(req, rd, approx, params, rng);
      if (!valid_distribution(trace.macro_probs) || !valid_distribution(trace.final_probs) ||
          !valid_micro(trace.micro_probs, trace.candidate_cluster, trace.macro_probs.size()))
        ++explicit_bad;
    } catch (const std::exception& e) {
      ++errors;
      std::fprintf(stderr, "  explicit instance %d: %s\n", r, e.what());
    }
    try {
      const std::size_t dim = pick(2, 8);
      ImplicitSamplerParams params;
      params.z_local = pick(1, 6);
      params.z_reserve = pick(1, 6);
      // At least two candidates per local cluster: with all singletons every
      // score is zero and the sampler rejects the instance by contract.
      CandidateSet set;
      set.items = points(pick(2 * params.z_local, 40), dim, 1.0);
      set.source_indices.resize(set.items.size());
      ReserveEmbeddings re;
      re.embeddings = points(pick(1, 12), dim, 1.0 + uniform01(rng));
      PullRequest req{0, 1, pick(1, set.size()), 0, nullptr};
      const auto [plan, trace] = sample_embedding_pull(req, re, set, params, rng);
      if (!valid_distribution(trace.macro_probs) || !valid_distribution(trace.final_probs) ||
          !valid_micro(trace.micro_probs, trace.candidate_cluster, trace.macro_probs.size()))
        ++implicit_bad;
    } catch (const std::exception& e) {
      ++errors;
      std::fprintf(stderr, "  implicit instance %d: %s\n", r, e.what());
    }
  }
  return {explicit_bad == 0 && implicit_bad == 0 && errors == 0,
          fmt("1000 instances per sampler: %d explicit and %d implicit invalid, %d errors", explicit_bad, implicit_bad,
              errors)};
}

// ---------------------------------------------------------------- 5

Outcome sawtooth() {
  const long ta = 25, total = 2000;
  bool shape = true;
  for (long t = 0; t <= total; ++t) {
    const double f = reg_weight_freshness(t, ta);
    if (t % ta == 0) shape = shape && f == 1.0;
    else shape = shape && f < reg_weight_freshness(t - 1, ta) && f < 1.0;
  }
  StalenessParams params;
  params.aggregation_period = ta;
  params.total_steps = total;
  const double w12 = reg_weight(12, params);
  return {shape && std::abs(w12 - 1.61255) <= 1e-5,
          fmt("window maxima at t = 0 mod 25 and strictly decreasing within windows: %s; W_12 = %.6f",
              shape ? "yes" : "no", w12)};
}

// ---------------------------------------------------------------- 6, 7, 9, 10

SimConfig ordering_config(Mode mode, std::uint64_t seed) {
  SimConfig c = preset_config("synthetic");
  c.mode = mode;
  c.seed = seed;
  return c;
}

bool matches_setup(const SimConfig& c) {
  return c.devices == 10 && c.avg_degree == 7.0 && c.synthetic_classes == 10 && c.synthetic_dim == 2 &&
         c.classes_per_device == 3 && c.hidden_dims == std::vector<std::size_t>{32, 16} && c.embedding_dim == 8 &&
         c.total_steps == 1500 && c.aggregation_period == 25 && c.pull_period == 25 && c.pull_budget == 5;
}

struct OrderingRuns {
  std::map<Mode, std::vector<double>> accuracy, separation;
  std::map<Mode, std::vector<std::string>> csv;
  int audit_failures = 0;
  std::vector<std::string> audit_messages;
  double seconds = 0.0;
};

const std::vector<Mode> kOrderingModes = {Mode::fedavg, Mode::uniform, Mode::cfcl_explicit, Mode::cfcl_implicit};
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

OrderingRuns ordering_runs() {
  OrderingRuns out;
  const auto start = std::chrono::steady_clock::now();
  for (Mode m : kOrderingModes) {
    for (std::uint64_t seed : kSeeds) {
      const SimConfig c = ordering_config(m, seed);
      const RunResult r = run(c);
      out.accuracy[m].push_back(r.metrics.back().accuracy);
      out.separation[m].push_back(r.metrics.back().sep_ratio);
      out.csv[m].push_back(metrics_csv(r.metrics));
      const AuditReport audit = audit_trace(c, r);
      if (!audit.ok) {
        ++out.audit_failures;
        for (const auto& f : audit.failures) out.audit_messages.push_back(std::string(to_string(m)) + ": " + f);
      }
      std::fprintf(stderr, "  %-14s seed %llu: accuracy %.4f, separation %.3f\n", to_string(m),
                   static_cast<unsigned long long>(seed), r.metrics.back().accuracy, r.metrics.back().sep_ratio);
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Outcome ordering(const OrderingRuns& runs) {
  if (!matches_setup(ordering_config(Mode::fedavg, 1))) return {false, "synthetic preset does not match the required setup"};
  const double fed = median(runs.accuracy.at(Mode::fedavg));
  const double uni = median(runs.accuracy.at(Mode::uniform));
  const double ex = median(runs.accuracy.at(Mode::cfcl_explicit));
  const double im = median(runs.accuracy.at(Mode::cfcl_implicit));
  const bool a = ex >= uni + 0.03, b = uni >= fed + 0.03, c = im >= fed + 0.03, fast = runs.seconds < 600.0;
  return {a && b && c && fast,
          fmt("median accuracy fedavg %.4f, uniform %.4f, explicit %.4f, implicit %.4f; explicit-uniform %+.4f (%s), "
              "uniform-fedavg %+.4f (%s), implicit-fedavg %+.4f (%s); %.0f s",
              fed, uni, ex, im, ex - uni, a ? "ok" : "short", uni - fed, b ? "ok" : "short", im - fed,
              c ? "ok" : "short", runs.seconds)};
}

Outcome alignment(const OrderingRuns& runs) {
  const double fed = median(runs.separation.at(Mode::fedavg));
  const double ex = median(runs.separation.at(Mode::cfcl_explicit));
  const double im = median(runs.separation.at(Mode::cfcl_implicit));
  const bool a = ex >= 1.1 * fed, b = im >= 1.1 * fed;
  return {a && b, fmt("median separation ratio fedavg %.3f, explicit %.3f (%+.1f%%), implicit %.3f (%+.1f%%)", fed, ex,
                      100.0 * (ex / fed - 1.0), im, 100.0 * (im / fed - 1.0))};
}

Outcome determinism(const OrderingRuns& runs) {
  int mismatched = 0;
  for (Mode m : kOrderingModes)
    for (std::size_t s = 0; s < kSeeds.size(); ++s)
      if (metrics_csv(run(ordering_config(m, kSeeds[s])).metrics) != runs.csv.at(m)[s]) ++mismatched;
  return {mismatched == 0, fmt("%d of %zu re-runs differ byte-wise", mismatched, kOrderingModes.size() * kSeeds.size())};
}

Outcome protocol(const OrderingRuns& runs) {
  std::string detail = fmt("%d of %zu runs failed the trace audit", runs.audit_failures,
                           kOrderingModes.size() * kSeeds.size());
  for (std::size_t q = 0; q < std::min<std::size_t>(3, runs.audit_messages.size()); ++q)
    detail += "; " + runs.audit_messages[q];
  return {runs.audit_failures == 0, detail};
}

// ---------------------------------------------------------------- 8

Outcome reserve_ablation() {
  std::vector<double> km, un;
  for (std::uint64_t seed : kSeeds) {
    SimConfig c = ordering_config(Mode::cfcl_explicit, seed);
    c.k_reserve = 3;
    c.reserve_selection = ReserveSelection::kmeans;
    km.push_back(run(c).metrics.back().accuracy);
    c.reserve_selection = ReserveSelection::uniform;
    un.push_back(run(c).metrics.back().accuracy);
  }
  const double a = median(km), b = median(un);
  return {a >= b, fmt("K_reserve=3 median accuracy: kmeans %.4f, uniform %.4f", a, b)};
}

}  // namespace

// Arguments, if any, select criteria by number; the default runs all ten.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int q = 1; q < argc; ++q) only.push_back(std::atoi(argv[q]));
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  int failed = 0, ran = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %-28s %s  %s [%.1f s]\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  report(1, "accounting constants", accounting);
  report(2, "gradient oracle", gradient_oracle);
  report(3, "sampler exactness", sampler_exactness);
  report(4, "distribution validity", distribution_validity);
  report(5, "staleness sawtooth", sawtooth);

  OrderingRuns runs;
  bool have_runs = false;
  std::string run_error;
  try {
    if (wanted(6) || wanted(7) || wanted(9) || wanted(10)) {
      runs = ordering_runs();
      have_runs = true;
    }
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto with_runs = [&](Outcome (*fn)(const OrderingRuns&)) {
    return [&, fn]() -> Outcome {
      if (!have_runs) return {false, "ordering runs aborted: " + run_error};
      return fn(runs);
    };
  };
  report(6, "end-to-end ordering", with_runs(ordering));
  report(7, "alignment improvement", with_runs(alignment));
  report(8, "reserve ablation", reserve_ablation);
  report(9, "determinism", with_runs(determinism));
  report(10, "protocol invariants", with_runs(protocol));

  std::printf("%d of %d criteria failed\n", failed, ran);
  return failed == 0 ? 0 : 1;
}
