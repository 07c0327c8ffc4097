#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cfcl/encoder.hpp"
#include "cfcl/metrics.hpp"

namespace cfcl {

enum class Mode { cfcl_explicit, cfcl_implicit, uniform, bulk, kmeans, fedavg };
// What baselines exchange: raw datapoints or embeddings.
enum class Regime { explicit_data, implicit_embeddings };
enum class ReserveSelection { kmeans, uniform };
enum class ImportanceModel { global, local };
enum class OptimizerKind { sgd, adam };

const char* to_string(Mode m);
Mode parse_mode(const std::string& s);
const std::vector<Mode>& all_modes();

// Every knob of a simulation run. Defaults describe the desk-scale synthetic
// setup; presets override them.
struct SimConfig {
  Mode mode = Mode::cfcl_explicit;
  Regime regime = Regime::explicit_data;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  // Data.
  std::string dataset = "synthetic";  // "synthetic" or "idx"
  int synthetic_classes = 10;
  std::size_t synthetic_per_class = 50;
  std::size_t synthetic_dim = 2;
  double synthetic_spread = 0.1;
  std::size_t probe_per_class = 100;  // synthetic probe train and test size per class
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;
  std::size_t max_train_points = 0;  // 0 keeps every training point
  std::size_t probe_train_points = 2000;
  std::size_t probe_test_points = 1000;

  // Topology and partition.
  std::size_t devices = 10;
  double avg_degree = 7.0;
  int classes_per_device = 3;

  // Schedule.
  long total_steps = 1500;
  long aggregation_period = 25;
  long pull_period = 25;
  std::size_t pull_budget = 5;
  std::size_t participants = 0;  // 0 means every device

  // Exchange.
  std::size_t k_reserve = 10;
  std::size_t k_approx = 100;
  std::size_t k_macro = 10;
  std::size_t z_local = 0;    // 0 means k_macro
  std::size_t z_reserve = 0;  // 0 means k_macro
  ReserveSelection reserve_selection = ReserveSelection::kmeans;
  ImportanceModel importance_model = ImportanceModel::global;
  double temperature = 1.0;
  double margin = 1.0;
  double reg_k = 1.0;
  double overlap_mu = 0.0;
  double overlap_sigma = 1.0;
  double reg_lambda = 1.0;
  double reg_rho = 0.0;
  std::string zeta_schedule = "zero";

  // Encoder and optimizer.
  std::vector<std::size_t> hidden_dims = {32, 16};
  std::size_t embedding_dim = 8;
  Activation activation = Activation::relu;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  // Augmentation. noise_sigma < 0 means 0.1 * synthetic_spread.
  double noise_sigma = -1.0;
  double crop_pad = 2.0;
  double flip_probability = 0.5;
  double blur_probability = 0.5;

  // Evaluation.
  int probe_iters = 1000;
  double probe_lr = 0.1;
  std::size_t probe_batch = 32;
  std::size_t eval_points = 500;
  std::size_t histogram_bins = 30;
  std::vector<double> thresholds = {0.5, 0.6, 0.7, 0.8};

  CostModel cost;

  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  int kmeans_restarts = 3;

  std::size_t z_local_clusters() const { return z_local ? z_local : k_macro; }
  std::size_t z_reserve_clusters() const { return z_reserve ? z_reserve : k_macro; }
  double effective_noise_sigma() const { return noise_sigma >= 0.0 ? noise_sigma : 0.1 * synthetic_spread; }
};

// Throws ConfigError naming the offending key.
void validate(const SimConfig& config);

// Parses a JSON document; missing keys keep their defaults and unknown keys
// are rejected. `overrides` maps key -> JSON value text and takes precedence
// over the document.
SimConfig parse_config(const std::string& json_text,
                       const std::map<std::string, std::string>& overrides = {});
SimConfig load_config(const std::string& path,
                      const std::map<std::string, std::string>& overrides = {});

std::string config_to_json(const SimConfig& config);

// Built-in presets: "synthetic", "fmnist", "usps".
SimConfig preset_config(const std::string& name);

}  // namespace cfcl
