#include "cfcl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cfcl {

// ---------------------------------------------------------------------------
// Topology

double NetworkGraph::average_degree() const {
  if (node_count == 0) return 0.0;
  return 2.0 * static_cast<double>(edges.size()) / static_cast<double>(node_count);
}

bool NetworkGraph::connected() const {
  if (node_count <= 1) return true;
  std::vector<bool> seen(node_count, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t v = frontier.front();
    frontier.pop();
    for (std::size_t w : neighbors[v]) {
      if (seen[w]) continue;
      seen[w] = true;
      ++reached;
      frontier.push(w);
    }
  }
  return reached == node_count;
}

NetworkGraph graph_from_edges(std::size_t n,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  NetworkGraph g;
  g.node_count = n;
  g.neighbors.resize(n);
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (auto [a, b] : edges) {
    if (a == b) throw TopologyError("self-loop on node " + std::to_string(a));
    if (a >= n || b >= n) throw TopologyError("edge endpoint out of range");
    unique.insert({std::min(a, b), std::max(a, b)});
  }
  for (auto [a, b] : unique) {
    g.edges.emplace_back(a, b);
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  return g;
}

NetworkGraph build_rgg(std::size_t n, double target_avg_degree, Rng& rng) {
  if (n < 2) throw TopologyError("RGG needs at least 2 nodes");
  if (!(target_avg_degree > 0.0) || target_avg_degree > static_cast<double>(n - 1)) {
    throw TopologyError("RGG target degree must be in (0, n-1]");
  }
  struct Pair {
    double d;
    std::size_t a, b;
  };
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::array<double, 2>> pos(n);
    for (auto& p : pos) p = {uniform01(rng), uniform01(rng)};
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        pairs.push_back({std::hypot(pos[a][0] - pos[b][0], pos[a][1] - pos[b][1]), a, b});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.d < y.d; });

    // Average degree with the first m pairs connected is 2m/n; binary search
    // for the smallest m reaching the target, then keep whichever of m-1, m
    // lands closer.
    auto degree = [n](std::size_t m) { return 2.0 * static_cast<double>(m) / static_cast<double>(n); };
    std::size_t lo = 0, hi = pairs.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (degree(mid) < target_avg_degree) lo = mid + 1;
      else hi = mid;
    }
    std::size_t m = lo;
    if (m > 0 && std::abs(degree(m - 1) - target_avg_degree) <= std::abs(degree(m) - target_avg_degree)) --m;
    // Ties in distance cannot be split by a radius.
    while (m > 0 && m < pairs.size() && pairs[m].d == pairs[m - 1].d) ++m;

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t q = 0; q < m; ++q) edges.emplace_back(pairs[q].a, pairs[q].b);
    NetworkGraph g = graph_from_edges(n, edges);
    g.positions = pos;
    if (m == 0) g.radius = 0.0;
    else if (m == pairs.size()) g.radius = pairs.back().d;
    else g.radius = 0.5 * (pairs[m - 1].d + pairs[m].d);
    if (g.connected()) return g;
  }
  throw TopologyError("RGG: no connected layout after 100 attempts");
}

// ---------------------------------------------------------------------------
// Local training and aggregation

void local_step(DeviceState& device, const LocalStepParams& params) {
  const std::size_t n = device.training_size();
  if (n < 2) {
    throw InfeasibleError("device " + std::to_string(device.id) + " holds fewer than 2 datapoints");
  }
  if (params.learning_rate == 0.0) return;
  std::uniform_int_distribution<std::size_t> anchor_pick(0, n - 1);
  std::uniform_int_distribution<std::size_t> negative_pick(0, n - 2);
  std::vector<Triplet> batch;
  batch.reserve(params.batch_size);
  for (std::size_t b = 0; b < params.batch_size; ++b) {
    const std::size_t a = anchor_pick(device.rng);
    std::size_t neg = negative_pick(device.rng);
    if (neg >= a) ++neg;
    const Vector& anchor = device.training_point(a);
    batch.push_back({anchor, augment(anchor, params.augmentation, device.rng), device.training_point(neg)});
  }
  const Vector grad = params.regularized
                          ? loss_gradient(device.model, batch, params.margin, &device.reg)
                          : loss_gradient(device.model, batch, params.margin);
  if (params.optimizer == OptimizerKind::adam) {
    device.model = adam_step(device.model, grad, params.learning_rate, device.adam, params.adam);
  } else {
    device.model = sgd_step(device.model, grad, params.learning_rate);
  }
}

EncoderModel aggregate(const std::vector<EncoderModel>& models, const std::vector<double>& weights,
                       const std::vector<std::size_t>& participants) {
  if (participants.empty()) throw InfeasibleError("aggregation with no participants");
  if (weights.size() != models.size()) throw ShapeError("one aggregation weight per model required");
  EncoderModel out = models[participants.front()];
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  double total = 0.0;
  for (std::size_t i : participants) {
    if (!(weights[i] > 0.0)) throw InfeasibleError("aggregation weights must be positive");
    total += weights[i];
  }
  if (participants.size() == 1) return models[participants.front()];
  for (std::size_t i : participants) {
    const double w = weights[i] / total;
    const auto& src = models[i].weights;
    if (src.size() != out.weights.size()) throw ShapeError("aggregating models of different shapes");
    for (std::size_t q = 0; q < src.size(); ++q) out.weights[q] += w * src[q];
  }
  return out;
}

std::uint64_t model_fingerprint(const EncoderModel& model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double w : model.weights) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &w, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

const char* to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::aggregate: return "aggregate";
    case TraceKind::pull_instant: return "pull_instant";
    case TraceKind::pull: return "pull";
    case TraceKind::reserve_push: return "reserve_push";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Data

namespace {

// Stream tags for derive_rng.
enum : std::uint64_t {
  kTagData = 1,
  kTagPartition,
  kTagProbeTrain,
  kTagProbeTest,
  kTagTopology,
  kTagInit,
  kTagDevice,
  kTagReserve,
  kTagPull,
  kTagParticipants,
  kTagProbe,
  kTagEval,
  kTagRegMargin,
  kTagHistogram,
  kTagSubsample,
};

std::filesystem::path resolve_data_path(const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) {
    if (const char* dir = std::getenv("CFCL_DATA_DIR"); dir && *dir) return std::filesystem::path(dir) / path;
  }
  return path;
}

LabeledDataset subsample(const LabeledDataset& ds, std::size_t count, Rng& rng) {
  if (count == 0 || count >= ds.size()) return ds;
  LabeledDataset out;
  out.class_count = ds.class_count;
  out.rows = ds.rows;
  out.cols = ds.cols;
  for (std::size_t q : uniform_subset(ds.size(), count, rng)) {
    out.points.push_back(ds.points[q]);
    out.labels.push_back(ds.labels[q]);
  }
  return out;
}

}  // namespace

DatasetBundle prepare_data(const SimConfig& config) {
  DatasetBundle bundle;
  LabeledDataset full;
  if (config.dataset == "synthetic") {
    Rng rng = derive_rng(config.seed, {kTagData});
    full = gen_synthetic(config.synthetic_classes, config.synthetic_per_class, config.synthetic_dim,
                         config.synthetic_spread, rng);
    Rng train_rng = derive_rng(config.seed, {kTagProbeTrain});
    bundle.probe_train = gen_synthetic(config.synthetic_classes, config.probe_per_class,
                                       config.synthetic_dim, config.synthetic_spread, train_rng);
    Rng test_rng = derive_rng(config.seed, {kTagProbeTest});
    bundle.probe_test = gen_synthetic(config.synthetic_classes, config.probe_per_class,
                                      config.synthetic_dim, config.synthetic_spread, test_rng);
  } else {
    LabeledDataset train = load_idx(resolve_data_path(config.idx_train_images),
                                    resolve_data_path(config.idx_train_labels));
    LabeledDataset test = load_idx(resolve_data_path(config.idx_test_images),
                                   resolve_data_path(config.idx_test_labels));
    test.class_count = train.class_count = std::max(train.class_count, test.class_count);
    Rng rng = derive_rng(config.seed, {kTagSubsample});
    full = subsample(train, config.max_train_points, rng);
    Rng train_rng = derive_rng(config.seed, {kTagProbeTrain});
    bundle.probe_train = subsample(train, config.probe_train_points, train_rng);
    Rng test_rng = derive_rng(config.seed, {kTagProbeTest});
    bundle.probe_test = subsample(test, config.probe_test_points, test_rng);
  }
  Rng part_rng = derive_rng(config.seed, {kTagPartition});
  bundle.devices = partition_noniid(full, config.devices, config.classes_per_device, part_rng);
  bundle.input_dim = full.dim();
  bundle.rows = full.rows;
  bundle.cols = full.cols;
  return bundle;
}

// ---------------------------------------------------------------------------
// Run loop

namespace {

enum class Exchange { none, datapoints, embeddings };

Exchange exchange_of(const SimConfig& c) {
  switch (c.mode) {
    case Mode::cfcl_explicit: return Exchange::datapoints;
    case Mode::cfcl_implicit: return Exchange::embeddings;
    case Mode::fedavg: return Exchange::none;
    default: return c.regime == Regime::explicit_data ? Exchange::datapoints : Exchange::embeddings;
  }
}

bool uses_importance(Mode m) {
  return m == Mode::cfcl_explicit || m == Mode::cfcl_implicit || m == Mode::bulk;
}

bool periodic_pulls(Mode m) {
  return m == Mode::cfcl_explicit || m == Mode::cfcl_implicit || m == Mode::uniform || m == Mode::kmeans;
}

AugmentationSpec augmentation_for(const SimConfig& c, const DatasetBundle& data) {
  AugmentationSpec spec;
  if (c.dataset == "idx" && data.rows * data.cols == data.input_dim && data.rows > 1) {
    spec.rows = data.rows;
    spec.cols = data.cols;
    if (c.crop_pad > 0.0) spec.steps.push_back({AugmentationFamily::random_crop_pad, c.crop_pad});
    if (c.flip_probability > 0.0) spec.steps.push_back({AugmentationFamily::horizontal_flip, c.flip_probability});
    if (c.blur_probability > 0.0) spec.steps.push_back({AugmentationFamily::blur, c.blur_probability});
  }
  const double sigma = c.effective_noise_sigma();
  if (sigma > 0.0) spec.steps.push_back({AugmentationFamily::gaussian_noise, sigma});
  return spec;
}

// Balanced evaluation subset: the same number of points from every class.
LabeledDataset eval_subset(const LabeledDataset& ds, std::size_t points, Rng& rng) {
  const auto classes = static_cast<std::size_t>(ds.class_count);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t q = 0; q < ds.size(); ++q) by_class[static_cast<std::size_t>(ds.labels[q])].push_back(q);
  const std::size_t per = std::max<std::size_t>(2, points / std::max<std::size_t>(1, classes));
  LabeledDataset out;
  out.class_count = ds.class_count;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t r = 0; r < std::min(per, idx.size()); ++r) {
      out.points.push_back(ds.points[idx[r]]);
      out.labels.push_back(ds.labels[idx[r]]);
    }
  }
  return out;
}

TraceEvent event(long t, TraceKind kind, std::size_t receiver = 0, std::size_t transmitter = 0,
                 std::size_t count = 0) {
  TraceEvent ev;
  ev.t = t;
  ev.kind = kind;
  ev.receiver = receiver;
  ev.transmitter = transmitter;
  ev.count = count;
  return ev;
}

class Simulation {
 public:
  Simulation(const SimConfig& config, const DatasetBundle& data) : c_(config), data_(data) {
    validate(c_);
    if (data_.devices.size() != c_.devices) throw ConfigError("dataset bundle does not match device count");
    exchange_ = exchange_of(c_);
    augmentation_ = augmentation_for(c_, data_);

    std::vector<std::size_t> dims{data_.input_dim};
    dims.insert(dims.end(), c_.hidden_dims.begin(), c_.hidden_dims.end());
    dims.push_back(c_.embedding_dim);
    Rng init_rng = derive_rng(c_.seed, {kTagInit});
    global_ = make_encoder(dims, c_.activation, init_rng);

    if (c_.devices >= 2) {
      Rng topo_rng = derive_rng(c_.seed, {kTagTopology});
      result_.graph = build_rgg(c_.devices, c_.avg_degree, topo_rng);
    } else {
      result_.graph = graph_from_edges(1, {});
    }

    devices_.resize(c_.devices);
    for (std::size_t i = 0; i < c_.devices; ++i) {
      DeviceState& d = devices_[i];
      d.id = i;
      d.local = data_.devices[i].points;
      d.model = global_;
      d.rng = derive_rng(c_.seed, {kTagDevice, i});
      d.reg.base_margin = c_.margin;
      d.reg.received.assign(result_.graph.neighbors[i].size(), {});
    }

    step_.learning_rate = c_.learning_rate;
    step_.batch_size = c_.batch_size;
    step_.margin = c_.margin;
    step_.regularized = exchange_ == Exchange::embeddings;
    step_.optimizer = c_.optimizer;
    step_.adam = {c_.adam_beta1, c_.adam_beta2, c_.adam_epsilon};
    step_.augmentation = augmentation_;

    staleness_.lambda = c_.reg_lambda;
    staleness_.rho = c_.reg_rho;
    staleness_.aggregation_period = c_.aggregation_period;
    staleness_.total_steps = c_.total_steps;

    kmeans_.max_iter = c_.kmeans_max_iter;
    kmeans_.tol = c_.kmeans_tol;
    kmeans_.restarts = c_.kmeans_restarts;

    Rng eval_rng = derive_rng(c_.seed, {kTagEval});
    eval_set_ = eval_subset(data_.probe_test, c_.eval_points, eval_rng);
  }

  RunResult run() {
    const long T = c_.total_steps;
    for (std::size_t i = 0; i < c_.devices; ++i) charge(0, EventKind::broadcast, i, i, PayloadKind::model_params, 1, global_.weights.size());

    if (uses_importance(c_.mode) && exchange_ != Exchange::none) select_reserves();
    if (exchange_ == Exchange::datapoints && uses_importance(c_.mode)) push_reserve_data();
    if (exchange_ == Exchange::embeddings && uses_importance(c_.mode)) push_reserve_embeddings(0);
    if (c_.mode == Mode::bulk) pull_instant(0, bulk_budget());

    for (long t = 1; t <= T; ++t) {
      now_ = t;
      phase_ = "local step";
      const double w_t = step_.regularized ? reg_weight(t, staleness_) : 0.0;
      for (auto& d : devices_) {
        if (step_.regularized) d.reg.reg_weight = w_t;
        current_device_ = d.id;
        local_step(d, step_);
        d.size_accumulator += static_cast<double>(d.training_size());
      }
      current_device_ = npos;
      if (t % c_.aggregation_period == 0) {
        aggregate_at(t);
        if (exchange_ == Exchange::embeddings && uses_importance(c_.mode)) push_reserve_embeddings(t);
      }
      if (periodic_pulls(c_.mode) && t % c_.pull_period == 0 && t < T) pull_instant(t, c_.pull_budget);
    }
    result_.final_model = global_;
    return std::move(result_);
  }

  // Names the phase and device that failed.
  std::string where(long t) const {
    std::string s = "t=" + std::to_string(t) + ", phase=" + phase_;
    if (current_device_ != npos) s += ", device=" + std::to_string(current_device_);
    return s;
  }
  long now() const { return now_; }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  void charge(long t, EventKind kind, std::size_t from, std::size_t to, PayloadKind payload,
              std::size_t items, std::size_t dim) {
    const EventCost cost = account_event(kind, {payload, items, dim}, c_.cost);
    result_.ledger.record({t, kind, from, to, cost.bytes, cost.seconds});
  }

  const EncoderModel& importance_model(std::size_t transmitter) const {
    return c_.importance_model == ImportanceModel::global ? global_ : devices_[transmitter].model;
  }

  std::size_t bulk_budget() const {
    return c_.pull_budget * static_cast<std::size_t>(c_.total_steps / c_.pull_period);
  }

  void select_reserves() {
    phase_ = "reserve selection";
    reserves_.resize(c_.devices);
    for (std::size_t i = 0; i < c_.devices; ++i) {
      current_device_ = i;
      Rng rng = derive_rng(c_.seed, {kTagReserve, i});
      const auto& local = devices_[i].local;
      const std::size_t k = std::min(c_.k_reserve, local.size());
      reserves_[i] = c_.reserve_selection == ReserveSelection::kmeans ? select_reserve(local, k, rng, kmeans_)
                                                                     : select_reserve_uniform(local, k, rng);
      reserves_[i].owner = i;
    }
    current_device_ = npos;
  }

  void push_reserve_data() {
    for (std::size_t i = 0; i < c_.devices; ++i) {
      for (std::size_t j : result_.graph.neighbors[i]) {
        charge(0, EventKind::push, i, j, PayloadKind::datapoints, reserves_[i].points.size(), data_.input_dim);
        result_.trace.push_back(event(0, TraceKind::reserve_push, j, i, reserves_[i].points.size()));
      }
    }
  }

  void push_reserve_embeddings(long t) {
    phase_ = "reserve embedding push";
    reserve_emb_.resize(c_.devices);
    for (std::size_t i = 0; i < c_.devices; ++i) {
      reserve_emb_[i] = reserve_embeddings(reserves_[i], global_, t);
      reserve_emb_[i].owner = i;
      for (std::size_t j : result_.graph.neighbors[i]) {
        charge(t, EventKind::push, i, j, PayloadKind::embeddings, reserve_emb_[i].embeddings.size(), c_.embedding_dim);
        result_.trace.push_back(event(t, TraceKind::reserve_push, j, i, reserve_emb_[i].embeddings.size()));
      }
    }
  }

  // Every receiver pulls from every neighbour; buffers are replaced after
  // all links have been served.
  void pull_instant(long t, std::size_t budget) {
    phase_ = "pull";
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::vector<ExchangePlan>> incoming(c_.devices);
    for (std::size_t i = 0; i < c_.devices; ++i) {
      current_device_ = i;
      for (std::size_t j : result_.graph.neighbors[i]) {
        Rng rng = derive_rng(c_.seed, {kTagPull, static_cast<std::uint64_t>(t), i, j});
        PullRequest req{i, j, budget, t, &importance_model(j)};
        const auto& source = devices_[j].local;
        const std::size_t k_approx = std::min(source.size(), std::max(c_.k_approx, budget));
        CandidateSet candidates = exchange_ == Exchange::datapoints
                                      ? approx_local(source, k_approx, rng)
                                      : candidate_embeddings(source, *req.model, k_approx, rng);
        ExchangePlan plan;
        bool fallback = false;
        try {
          plan = exchange_ == Exchange::datapoints ? pull_datapoints(req, candidates, rng)
                                                   : pull_embeddings(req, candidates, rng);
        } catch (const EmptyCandidatesError&) {
          fallback = true;
        } catch (const DegenerateGeometryError&) {
          fallback = true;
        }
        if (fallback) plan = sample_pull_uniform(req, candidates, rng);
        TraceEvent ev = event(t, TraceKind::pull, i, j, plan.items.size());
        ev.fallback = fallback;
        for (std::size_t q : candidates.source_indices) ev.candidates.push_back({j, q});
        for (std::size_t q : plan.source_indices) ev.pulled.push_back({j, q});
        result_.trace.push_back(std::move(ev));
        const std::size_t dim = exchange_ == Exchange::datapoints ? data_.input_dim : c_.embedding_dim;
        const PayloadKind kind = exchange_ == Exchange::datapoints ? PayloadKind::datapoints : PayloadKind::embeddings;
        charge(t, EventKind::pull, j, i, kind, plan.items.size(), dim);
        incoming[i].push_back(std::move(plan));
      }
    }
    current_device_ = npos;
    result_.ledger.add_compute_seconds(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

    TraceEvent instant = event(t, TraceKind::pull_instant);
    for (std::size_t i = 0; i < c_.devices; ++i) {
      DeviceState& d = devices_[i];
      d.buffer.clear();
      d.buffer_sources.clear();
      d.reg_sources.clear();
      for (auto& set : d.reg.received) set.clear();
      for (std::size_t link = 0; link < incoming[i].size(); ++link) {
        ExchangePlan& plan = incoming[i][link];
        for (std::size_t q = 0; q < plan.items.size(); ++q) {
          const SourceId id{plan.transmitter, plan.source_indices[q]};
          if (exchange_ == Exchange::datapoints) {
            d.buffer.push_back(std::move(plan.items[q]));
            d.buffer_sources.push_back(id);
          } else {
            d.reg.received[link].push_back(std::move(plan.items[q]));
            d.reg_sources.push_back(id);
          }
        }
      }
      instant.buffers.push_back(exchange_ == Exchange::datapoints ? d.buffer_sources : d.reg_sources);
      if (exchange_ == Exchange::embeddings) update_reg_margin(t, d);
    }
    result_.trace.push_back(std::move(instant));
    if (c_.devices > 0 && !incoming[0].empty()) record_histogram(t, incoming, devices_[0]);
  }

  ExchangePlan pull_datapoints(const PullRequest& req, const CandidateSet& candidates, Rng& rng) {
    switch (c_.mode) {
      case Mode::uniform: return sample_pull_uniform(req, candidates, rng);
      case Mode::kmeans:
        return sample_pull_kmeans(req, candidates, forward_all(*req.model, candidates.items), req.budget, rng, kmeans_);
      default: {
        ExplicitSamplerParams p;
        p.k_macro = c_.k_macro;
        p.margin = c_.margin;
        p.temperature = c_.temperature;
        p.augmentation = augmentation_;
        p.kmeans = kmeans_;
        ReserveData reserve = reserves_[req.receiver];
        reserve.target = req.transmitter;
        return sample_pull(req, reserve, candidates, p, rng).first;
      }
    }
  }

  ExchangePlan pull_embeddings(const PullRequest& req, const CandidateSet& candidates, Rng& rng) {
    switch (c_.mode) {
      case Mode::uniform: return sample_pull_uniform(req, candidates, rng);
      case Mode::kmeans: return sample_pull_kmeans(req, candidates, candidates.items, req.budget, rng, kmeans_);
      default: {
        ImplicitSamplerParams p;
        p.z_local = c_.z_local_clusters();
        p.z_reserve = c_.z_reserve_clusters();
        p.overlap = {c_.overlap_mu, c_.overlap_sigma};
        p.kmeans = kmeans_;
        return sample_embedding_pull(req, reserve_emb_[req.receiver], candidates, p, rng).first;
      }
    }
  }

  // The receiver clusters embeddings of its own data under the model it just
  // received and sets m^Reg from the mean cluster radius.
  void update_reg_margin(long t, DeviceState& d) {
    Rng rng = derive_rng(c_.seed, {kTagRegMargin, static_cast<std::uint64_t>(t), d.id});
    const std::size_t k_approx = std::min(c_.k_approx, d.local.size());
    const CandidateSet own = candidate_embeddings(d.local, global_, k_approx, rng);
    const std::size_t k = std::clamp<std::size_t>(c_.z_local_clusters(), 1, own.size());
    const ClusterModel clusters = kmeanspp(own.items, k, rng, kmeans_);
    d.reg.reg_margin = reg_margin(clusters, c_.reg_k);
  }

  void record_histogram(long t, const std::vector<std::vector<ExchangePlan>>&, const DeviceState& d) {
    std::vector<Vector> received;
    if (exchange_ == Exchange::datapoints) {
      received = forward_all(global_, d.buffer);
    } else {
      for (const auto& set : d.reg.received) received.insert(received.end(), set.begin(), set.end());
    }
    if (received.empty()) return;
    Rng rng = derive_rng(c_.seed, {kTagHistogram, static_cast<std::uint64_t>(t)});
    const std::size_t k_approx = std::min(c_.k_approx, d.local.size());
    const CandidateSet own = candidate_embeddings(d.local, global_, k_approx, rng);
    const std::size_t k = std::clamp<std::size_t>(c_.z_local_clusters(), 1, own.size());
    const ClusterModel clusters = kmeanspp(own.items, k, rng, kmeans_);
    result_.final_histogram = importance_histogram(received, clusters.centroids, c_.histogram_bins);
  }

  void aggregate_at(long t) {
    phase_ = "aggregation";
    const long gamma = t / c_.aggregation_period;
    std::vector<std::size_t> participants(c_.devices);
    std::iota(participants.begin(), participants.end(), std::size_t{0});
    if (c_.participants != 0 && c_.participants < c_.devices) {
      Rng rng = derive_rng(c_.seed, {kTagParticipants, static_cast<std::uint64_t>(gamma)});
      participants = uniform_subset(c_.devices, c_.participants, rng);
    }
    std::vector<EncoderModel> models;
    std::vector<double> weights;
    models.reserve(c_.devices);
    for (const auto& d : devices_) {
      models.push_back(d.model);
      weights.push_back(d.size_accumulator / static_cast<double>(c_.aggregation_period));
    }
    for (std::size_t i : participants) charge(t, EventKind::upload, i, i, PayloadKind::model_params, 1, global_.weights.size());
    global_ = aggregate(models, weights, participants);

    TraceEvent ev = event(t, TraceKind::aggregate);
    ev.participants = participants;
    ev.global_fingerprint = model_fingerprint(global_);
    for (auto& d : devices_) {
      d.model = global_;
      d.size_accumulator = 0.0;
      charge(t, EventKind::broadcast, d.id, d.id, PayloadKind::model_params, 1, global_.weights.size());
      ev.device_fingerprints.push_back(model_fingerprint(d.model));
    }
    result_.trace.push_back(std::move(ev));
    evaluate(t, gamma);
  }

  void evaluate(long t, long gamma) {
    phase_ = "evaluation";
    ProbeParams probe{c_.probe_iters, c_.probe_lr, c_.probe_batch};
    Rng rng = derive_rng(c_.seed, {kTagProbe, static_cast<std::uint64_t>(gamma)});
    MetricsRow row;
    row.t = t;
    row.gamma = gamma;
    row.accuracy = linear_probe(global_, data_.probe_train, data_.probe_test, probe, rng);
    const Matrix m = alignment_matrix(global_, eval_set_);
    try {
      row.sep_ratio = separation_ratio(m);
    } catch (const InfeasibleError&) {
      row.sep_ratio = 0.0;  // collapsed embeddings
    }
    row.d2d_bytes_cum = result_.ledger.d2d_bytes();
    row.uplink_bytes_cum = result_.ledger.uplink_bytes();
    row.delay_seconds_cum = result_.ledger.delay_seconds();
    result_.metrics.push_back(row);
  }

  const SimConfig& c_;
  const DatasetBundle& data_;
  Exchange exchange_ = Exchange::none;
  AugmentationSpec augmentation_;
  EncoderModel global_;
  std::vector<DeviceState> devices_;
  std::vector<ReserveData> reserves_;
  std::vector<ReserveEmbeddings> reserve_emb_;
  LocalStepParams step_;
  StalenessParams staleness_;
  KMeansOptions kmeans_;
  LabeledDataset eval_set_;
  RunResult result_;
  std::string phase_ = "setup";
  std::size_t current_device_ = npos;
  long now_ = 0;
};

}  // namespace

RunResult run(const SimConfig& config, const DatasetBundle& data) {
  Simulation sim(config, data);
  try {
    return sim.run();
  } catch (const Error& e) {
    throw Error(std::string("run aborted (") + sim.where(sim.now()) + "): " + e.what());
  }
}

RunResult run(const SimConfig& config) {
  validate(config);
  const DatasetBundle data = prepare_data(config);
  return run(config, data);
}

// ---------------------------------------------------------------------------
// Audit and trace export

AuditReport audit_trace(const SimConfig& config, const RunResult& result) {
  AuditReport report;
  auto fail = [&](const std::string& msg) {
    report.ok = false;
    report.failures.push_back(msg);
  };
  const bool bulk = config.mode == Mode::bulk;
  std::map<long, std::vector<const TraceEvent*>> pulls_at;
  long aggregations = 0;
  for (const auto& ev : result.trace) {
    switch (ev.kind) {
      case TraceKind::aggregate: {
        ++aggregations;
        if (ev.t % config.aggregation_period != 0) fail("aggregation at t=" + std::to_string(ev.t));
        for (std::uint64_t fp : ev.device_fingerprints) {
          if (fp != ev.global_fingerprint) {
            fail("device model differs from global after aggregation at t=" + std::to_string(ev.t));
            break;
          }
        }
        if (ev.device_fingerprints.size() != config.devices) fail("aggregation did not reach every device");
        break;
      }
      case TraceKind::pull:
        pulls_at[ev.t].push_back(&ev);
        if (ev.count > config.pull_budget && !bulk) fail("pull over budget at t=" + std::to_string(ev.t));
        for (const auto& id : ev.pulled) {
          if (std::find(ev.candidates.begin(), ev.candidates.end(), id) == ev.candidates.end()) {
            fail("pulled item outside the transmitter's candidates at t=" + std::to_string(ev.t));
            break;
          }
        }
        break;
      case TraceKind::pull_instant: {
        const bool on_schedule = bulk ? ev.t == 0 : (ev.t > 0 && ev.t % config.pull_period == 0);
        if (!on_schedule) fail("pull instant at t=" + std::to_string(ev.t));
        std::vector<std::vector<SourceId>> expected(config.devices);
        for (const TraceEvent* p : pulls_at[ev.t]) {
          expected[p->receiver].insert(expected[p->receiver].end(), p->pulled.begin(), p->pulled.end());
        }
        for (std::size_t i = 0; i < ev.buffers.size() && i < expected.size(); ++i) {
          auto got = ev.buffers[i];
          auto want = expected[i];
          std::sort(got.begin(), got.end());
          std::sort(want.begin(), want.end());
          if (got != want) {
            fail("buffer of device " + std::to_string(i) + " is not exactly the pulls of t=" + std::to_string(ev.t));
          }
        }
        break;
      }
      case TraceKind::reserve_push: break;
    }
  }
  if (aggregations != config.total_steps / config.aggregation_period) fail("unexpected aggregation count");
  for (const auto& [t, evs] : pulls_at) {
    const bool on_schedule = bulk ? t == 0 : (t > 0 && t % config.pull_period == 0);
    if (!on_schedule) fail("pull at t=" + std::to_string(t));
  }
  return report;
}

std::string trace_to_json(const SimConfig& config, const RunResult& result) {
  using json = nlohmann::ordered_json;
  json doc;
  doc["mode"] = to_string(config.mode);
  doc["seed"] = config.seed;
  json graph;
  graph["nodes"] = result.graph.node_count;
  graph["radius"] = result.graph.radius;
  graph["average_degree"] = result.graph.average_degree();
  json edges = json::array();
  for (auto [a, b] : result.graph.edges) edges.push_back({a, b});
  graph["edges"] = edges;
  doc["graph"] = graph;

  json ledger = json::array();
  for (const auto& e : result.ledger.events()) {
    ledger.push_back({{"t", e.t}, {"kind", to_string(e.kind)}, {"from", e.from}, {"to", e.to},
                      {"bytes", e.bytes}, {"seconds", e.seconds}});
  }
  doc["ledger"] = ledger;
  doc["totals"] = {{"d2d_bytes", result.ledger.d2d_bytes()},
                   {"uplink_bytes", result.ledger.uplink_bytes()},
                   {"delay_seconds", result.ledger.delay_seconds()},
                   {"compute_seconds", result.ledger.compute_seconds()}};

  json events = json::array();
  for (const auto& ev : result.trace) {
    json e{{"t", ev.t}, {"kind", to_string(ev.kind)}};
    if (ev.kind == TraceKind::pull || ev.kind == TraceKind::reserve_push) {
      e["receiver"] = ev.receiver;
      e["transmitter"] = ev.transmitter;
      e["count"] = ev.count;
    }
    if (ev.kind == TraceKind::pull && ev.fallback) e["fallback"] = true;
    if (ev.kind == TraceKind::aggregate) {
      e["participants"] = ev.participants;
      std::ostringstream fp;
      fp << std::hex << ev.global_fingerprint;
      e["global_fingerprint"] = fp.str();
    }
    events.push_back(std::move(e));
  }
  doc["events"] = events;

  if (result.final_histogram) {
    const auto& h = *result.final_histogram;
    doc["importance_histogram"] = {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace cfcl
