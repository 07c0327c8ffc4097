#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfcl/common.hpp"
#include "cfcl/data.hpp"
#include "cfcl/encoder.hpp"

namespace cfcl {

struct ProbeParams {
  int iterations = 1000;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
};

// Multinomial logistic regression trained by minibatch SGD on frozen,
// standardized embeddings of `train`; returns accuracy on `test`.
double linear_probe(const EncoderModel& encoder, const LabeledDataset& train,
                    const LabeledDataset& test, const ProbeParams& params, Rng& rng);

// Same probe on already computed features.
double linear_probe_features(const std::vector<Vector>& train_x, const std::vector<int>& train_y,
                             const std::vector<Vector>& test_x, const std::vector<int>& test_y,
                             int class_count, const ProbeParams& params, Rng& rng);

using Matrix = std::vector<std::vector<double>>;

// Entry (a, b): mean Euclidean distance between embeddings of class a and
// class b; the diagonal averages over distinct pairs only.
Matrix alignment_matrix(const EncoderModel& encoder, const LabeledDataset& ds);
Matrix alignment_matrix_from_embeddings(const std::vector<Vector>& embeddings,
                                        const std::vector<int>& labels, int class_count);

// Mean off-diagonal entry over mean diagonal entry.
double separation_ratio(const Matrix& m);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  std::vector<double> values;  // the per-item mean distances that were binned
};

// Per received item, its mean Euclidean distance to the local centroids,
// binned into fixed-width bins over the observed range.
Histogram importance_histogram(const std::vector<Vector>& received,
                               const std::vector<Vector>& local_centroids, std::size_t bins = 30);

struct CostModel {
  double d2d_rate = 1e6;
  double uplink_rate = 1e6;
  double model_param_bits = 32;
  double datapoint_bits = 8;
  double embedding_value_bits = 32;
};

enum class EventKind { pull, push, upload, broadcast };
enum class PayloadKind { model_params, datapoints, embeddings };

struct PayloadDescriptor {
  PayloadKind kind = PayloadKind::datapoints;
  std::size_t items = 1;
  std::size_t item_dim = 1;
};

struct EventCost {
  double bytes = 0.0;
  double seconds = 0.0;
};

// bytes = elements * bits / 8; seconds = bits / rate, the uplink rate for
// upload/broadcast events and the D2D rate for push/pull events.
EventCost account_event(EventKind kind, const PayloadDescriptor& payload, const CostModel& cost);

const char* to_string(EventKind kind);

struct LedgerEvent {
  long t = 0;
  EventKind kind = EventKind::pull;
  std::size_t from = 0;
  std::size_t to = 0;
  double bytes = 0.0;
  double seconds = 0.0;
};

// Append-only communication ledger.
class RunLedger {
 public:
  void record(const LedgerEvent& e);
  const std::vector<LedgerEvent>& events() const { return events_; }

  double d2d_bytes() const { return d2d_bytes_; }
  double uplink_bytes() const { return uplink_bytes_; }
  double delay_seconds() const { return delay_seconds_; }

  // Wall-clock seconds spent on importance computations (K-means, scoring).
  void add_compute_seconds(double s) { compute_seconds_ += s; }
  double compute_seconds() const { return compute_seconds_; }

 private:
  std::vector<LedgerEvent> events_;
  double d2d_bytes_ = 0.0;
  double uplink_bytes_ = 0.0;
  double delay_seconds_ = 0.0;
  double compute_seconds_ = 0.0;
};

struct CostAccuracy {
  double cost = 0.0;
  double accuracy = 0.0;
};

// First cumulative cost at which accuracy >= threshold.
std::optional<double> time_to_threshold(const std::vector<CostAccuracy>& series, double threshold);

struct MetricsRow {
  long t = 0;
  long gamma = 0;
  double accuracy = 0.0;
  double sep_ratio = 0.0;
  double d2d_bytes_cum = 0.0;
  double uplink_bytes_cum = 0.0;
  double delay_seconds_cum = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
std::string metrics_csv(const std::vector<MetricsRow>& rows);

// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace cfcl
