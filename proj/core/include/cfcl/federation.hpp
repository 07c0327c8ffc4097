#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cfcl/config.hpp"
#include "cfcl/data.hpp"
#include "cfcl/encoder.hpp"
#include "cfcl/explicit_exchange.hpp"
#include "cfcl/implicit_exchange.hpp"
#include "cfcl/metrics.hpp"

namespace cfcl {

// Undirected D2D graph; positions record where an RGG placed the nodes.
struct NetworkGraph {
  std::size_t node_count = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (a, b) with a < b
  std::vector<std::array<double, 2>> positions;
  std::vector<std::vector<std::size_t>> neighbors;
  double radius = 0.0;

  double average_degree() const;
  bool connected() const;
};

NetworkGraph graph_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

// Random geometric graph on the unit square. The connection radius is chosen
// by binary search over the sorted pairwise distances so the realized average
// degree is as close to the target as possible; layouts are redrawn until the
// graph is connected (at most 100 attempts).
NetworkGraph build_rgg(std::size_t n, double target_avg_degree, Rng& rng);

// Identifies a datapoint by the device that owns it and its index there.
struct SourceId {
  std::size_t device = 0;
  std::size_t index = 0;
  auto operator<=>(const SourceId&) const = default;
};

struct DeviceState {
  std::size_t id = 0;
  std::vector<Vector> local;  // initial dataset D_i
  // Explicit mode: datapoints pulled at the latest pull instant.
  std::vector<Vector> buffer;
  std::vector<SourceId> buffer_sources;
  // Implicit mode: embeddings pulled at the latest pull instant.
  RegularizerState reg;
  std::vector<SourceId> reg_sources;
  EncoderModel model;
  AdamState adam;
  Rng rng;
  double size_accumulator = 0.0;  // sum of |D_i^t| over the current window

  std::size_t training_size() const { return local.size() + buffer.size(); }
  const Vector& training_point(std::size_t q) const {
    return q < local.size() ? local[q] : buffer[q - local.size()];
  }
};

struct LocalStepParams {
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  double margin = 1.0;
  bool regularized = false;
  OptimizerKind optimizer = OptimizerKind::sgd;
  AdamParams adam;
  AugmentationSpec augmentation;
};

// One minibatch update: anchors uniform over D_i^t, positives by augmentation,
// negatives uniform over D_i^t without the anchor.
void local_step(DeviceState& device, const LocalStepParams& params);

// Weighted mean of the participants' models.
EncoderModel aggregate(const std::vector<EncoderModel>& models, const std::vector<double>& weights,
                       const std::vector<std::size_t>& participants);

// FNV-1a over the weight bytes; used to audit model synchrony.
std::uint64_t model_fingerprint(const EncoderModel& model);

enum class TraceKind { aggregate, pull_instant, pull, reserve_push };

struct TraceEvent {
  long t = 0;
  TraceKind kind = TraceKind::pull;
  std::size_t receiver = 0;
  std::size_t transmitter = 0;
  std::size_t count = 0;
  // pull: the importance sampler found no usable geometry (all scores zero or
  // coincident centroids) and the link fell back to a uniform pull.
  bool fallback = false;
  // pull: candidate and pulled source ids.
  std::vector<SourceId> candidates;
  std::vector<SourceId> pulled;
  // pull_instant: contents of every receiver's buffer right after the pulls.
  std::vector<std::vector<SourceId>> buffers;
  // aggregate: fingerprints of the global and every device model after broadcast.
  std::uint64_t global_fingerprint = 0;
  std::vector<std::uint64_t> device_fingerprints;
  std::vector<std::size_t> participants;
};

const char* to_string(TraceKind kind);

struct DatasetBundle {
  std::vector<LabeledDataset> devices;
  LabeledDataset probe_train;
  LabeledDataset probe_test;
  std::size_t input_dim = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Device partitions and probe splits for a config; depends only on the data
// keys and the seed, so every mode sees the same data for a given seed.
DatasetBundle prepare_data(const SimConfig& config);

struct RunResult {
  std::vector<MetricsRow> metrics;
  RunLedger ledger;
  std::vector<TraceEvent> trace;
  NetworkGraph graph;
  EncoderModel final_model;
  std::optional<Histogram> final_histogram;
};

RunResult run(const SimConfig& config);
RunResult run(const SimConfig& config, const DatasetBundle& data);

struct AuditReport {
  bool ok = true;
  std::vector<std::string> failures;
};

// Checks the event trace against the protocol: pull instants only at
// multiples of T_p, aggregations only at multiples of T_a, synchronized models
// after every aggregation, buffers holding exactly the latest pulls, and
// pulled items drawn from the transmitter's candidates.
AuditReport audit_trace(const SimConfig& config, const RunResult& result);

std::string trace_to_json(const SimConfig& config, const RunResult& result);

}  // namespace cfcl
