#include "cfcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace cfcl {

double linear_probe_features(const std::vector<Vector>& train_x, const std::vector<int>& train_y,
                             const std::vector<Vector>& test_x, const std::vector<int>& test_y,
                             int class_count, const ProbeParams& params, Rng& rng) {
  if (train_x.empty() || test_x.empty()) throw InfeasibleError("linear probe needs train and test data");
  const auto classes = static_cast<std::size_t>(class_count);
  std::vector<bool> in_train(classes, false);
  for (int y : train_y) in_train[static_cast<std::size_t>(y)] = true;
  for (int y : test_y) {
    if (!in_train[static_cast<std::size_t>(y)]) {
      throw InfeasibleError("linear probe: class " + std::to_string(y) + " missing from train split");
    }
  }
  const std::size_t dim = train_x.front().size();
  for (const auto* set : {&train_x, &test_x}) {
    for (const auto& x : *set) {
      if (x.size() != dim) throw ShapeError("linear probe: features of mixed dimension");
      for (double v : x)
        if (!std::isfinite(v)) throw DataError("linear probe: non-finite embedding (diverged encoder?)");
    }
  }

  // Standardize with train statistics; constant features are only centred.
  Vector mean(dim, 0.0), scale(dim, 0.0);
  for (const auto& x : train_x)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += x[d];
  for (double& m : mean) m /= static_cast<double>(train_x.size());
  for (const auto& x : train_x)
    for (std::size_t d = 0; d < dim; ++d) scale[d] += (x[d] - mean[d]) * (x[d] - mean[d]);
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(train_x.size()));
    s = s > 1e-12 ? 1.0 / s : 0.0;
  }
  auto standardize = [&](const Vector& x) {
    Vector z(dim);
    for (std::size_t d = 0; d < dim; ++d) z[d] = (x[d] - mean[d]) * scale[d];
    return z;
  };
  std::vector<Vector> xs;
  xs.reserve(train_x.size());
  for (const auto& x : train_x) xs.push_back(standardize(x));

  // weights[c] holds dim coefficients followed by the bias.
  std::vector<Vector> w(classes, Vector(dim + 1, 0.0));
  std::vector<Vector> g(classes, Vector(dim + 1, 0.0));
  Vector logits(classes);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  for (int it = 0; it < params.iterations; ++it) {
    for (auto& row : g) std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t b = 0; b < params.batch_size; ++b) {
      const std::size_t q = pick(rng);
      const Vector& x = xs[q];
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) {
        double s = w[c][dim];
        for (std::size_t d = 0; d < dim; ++d) s += w[c][d] * x[d];
        logits[c] = s;
        peak = std::max(peak, s);
      }
      double total = 0.0;
      for (double& l : logits) {
        l = std::exp(l - peak);
        total += l;
      }
      for (std::size_t c = 0; c < classes; ++c) {
        const double err = logits[c] / total - (static_cast<int>(c) == train_y[q] ? 1.0 : 0.0);
        for (std::size_t d = 0; d < dim; ++d) g[c][d] += err * x[d];
        g[c][dim] += err;
      }
    }
    const double step = params.learning_rate / static_cast<double>(params.batch_size);
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t d = 0; d <= dim; ++d) w[c][d] -= step * g[c][d];
  }

  std::size_t correct = 0;
  for (std::size_t q = 0; q < test_x.size(); ++q) {
    const Vector x = standardize(test_x[q]);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      double s = w[c][dim];
      for (std::size_t d = 0; d < dim; ++d) s += w[c][d] * x[d];
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    if (static_cast<int>(best) == test_y[q]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

double linear_probe(const EncoderModel& encoder, const LabeledDataset& train,
                    const LabeledDataset& test, const ProbeParams& params, Rng& rng) {
  return linear_probe_features(forward_all(encoder, train.points), train.labels,
                               forward_all(encoder, test.points), test.labels, train.class_count,
                               params, rng);
}

Matrix alignment_matrix_from_embeddings(const std::vector<Vector>& embeddings,
                                        const std::vector<int>& labels, int class_count) {
  const auto classes = static_cast<std::size_t>(class_count);
  Matrix sum(classes, std::vector<double>(classes, 0.0));
  std::vector<std::vector<double>> pairs(classes, std::vector<double>(classes, 0.0));
  for (std::size_t p = 0; p < embeddings.size(); ++p) {
    for (std::size_t q = p + 1; q < embeddings.size(); ++q) {
      const auto a = static_cast<std::size_t>(labels[p]), b = static_cast<std::size_t>(labels[q]);
      const double d = distance(embeddings[p], embeddings[q]);
      sum[a][b] += d;
      pairs[a][b] += 1.0;
      if (a != b) {
        sum[b][a] += d;
        pairs[b][a] += 1.0;
      }
    }
  }
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = 0; b < classes; ++b) {
      if (pairs[a][b] == 0.0) {
        if (a != b) throw InfeasibleError("alignment matrix: class without members");
        continue;  // singleton class: no distinct pairs
      }
      sum[a][b] /= pairs[a][b];
    }
  }
  return sum;
}

Matrix alignment_matrix(const EncoderModel& encoder, const LabeledDataset& ds) {
  return alignment_matrix_from_embeddings(forward_all(encoder, ds.points), ds.labels, ds.class_count);
}

double separation_ratio(const Matrix& m) {
  double diag = 0.0, off = 0.0;
  std::size_t nd = 0, no = 0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = 0; b < m.size(); ++b) {
      if (a == b) {
        diag += m[a][b];
        ++nd;
      } else {
        off += m[a][b];
        ++no;
      }
    }
  }
  if (nd == 0 || no == 0) throw InfeasibleError("separation ratio needs at least two classes");
  diag /= static_cast<double>(nd);
  off /= static_cast<double>(no);
  if (!(diag > 0.0)) throw InfeasibleError("separation ratio undefined: zero intra-class distance");
  return off / diag;
}

Histogram importance_histogram(const std::vector<Vector>& received,
                               const std::vector<Vector>& local_centroids, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  if (local_centroids.empty()) throw InfeasibleError("histogram needs local centroids");
  Histogram h;
  h.counts.assign(bins, 0);
  if (received.empty()) return h;
  for (const auto& z : received) {
    double s = 0.0;
    for (const auto& c : local_centroids) s += distance(z, c);
    h.values.push_back(s / static_cast<double>(local_centroids.size()));
  }
  h.lo = *std::min_element(h.values.begin(), h.values.end());
  h.hi = *std::max_element(h.values.begin(), h.values.end());
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (double v : h.values) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - h.lo) / width) : 0;
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

EventCost account_event(EventKind kind, const PayloadDescriptor& payload, const CostModel& cost) {
  double bits_per_element = 0.0;
  switch (payload.kind) {
    case PayloadKind::model_params: bits_per_element = cost.model_param_bits; break;
    case PayloadKind::datapoints: bits_per_element = cost.datapoint_bits; break;
    case PayloadKind::embeddings: bits_per_element = cost.embedding_value_bits; break;
  }
  const double bits =
      static_cast<double>(payload.items) * static_cast<double>(payload.item_dim) * bits_per_element;
  const bool uplink = kind == EventKind::upload || kind == EventKind::broadcast;
  const double rate = uplink ? cost.uplink_rate : cost.d2d_rate;
  if (!(rate > 0.0)) throw ConfigError("transmission rates must be positive");
  return {bits / 8.0, bits / rate};
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::pull: return "pull";
    case EventKind::push: return "push";
    case EventKind::upload: return "upload";
    case EventKind::broadcast: return "broadcast";
  }
  return "?";
}

void RunLedger::record(const LedgerEvent& e) {
  events_.push_back(e);
  if (e.kind == EventKind::upload || e.kind == EventKind::broadcast) {
    uplink_bytes_ += e.bytes;
  } else {
    d2d_bytes_ += e.bytes;
  }
  delay_seconds_ += e.seconds;
}

std::optional<double> time_to_threshold(const std::vector<CostAccuracy>& series, double threshold) {
  for (const auto& p : series) {
    if (p.accuracy >= threshold) return p.cost;
  }
  return std::nullopt;
}

std::string metrics_csv_header() {
  return "t,gamma,accuracy,sep_ratio,d2d_bytes_cum,uplink_bytes_cum,delay_seconds_cum\n";
}

std::string metrics_csv_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%ld,%.6f,%.6f,%.0f,%.0f,%.9g\n", r.t, r.gamma, r.accuracy,
                r.sep_ratio, r.d2d_bytes_cum, r.uplink_bytes_cum, r.delay_seconds_cum);
  return buf;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = metrics_csv_header();
  for (const auto& r : rows) out += metrics_csv_row(r);
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace cfcl
