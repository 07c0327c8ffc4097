#include "cfcl/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace cfcl {

using json = nlohmann::ordered_json;

namespace {

struct EnumName {
  const char* name;
  int value;
};

template <typename E, std::size_t N>
E enum_from(const std::string& key, const std::string& s, const EnumName (&names)[N]) {
  for (const auto& n : names) {
    if (s == n.name) return static_cast<E>(n.value);
  }
  std::string allowed;
  for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.name;
  throw ConfigError("config key '" + key + "': unknown value '" + s + "' (expected one of " + allowed + ")");
}

template <typename E, std::size_t N>
std::string enum_to(E e, const EnumName (&names)[N]) {
  for (const auto& n : names) {
    if (static_cast<int>(e) == n.value) return n.name;
  }
  return "?";
}

constexpr EnumName kModes[] = {{"cfcl_explicit", 0}, {"cfcl_implicit", 1}, {"uniform", 2},
                               {"bulk", 3},          {"kmeans", 4},        {"fedavg", 5}};
constexpr EnumName kRegimes[] = {{"explicit", 0}, {"implicit", 1}};
constexpr EnumName kReserve[] = {{"kmeans", 0}, {"uniform", 1}};
constexpr EnumName kImportance[] = {{"global", 0}, {"local", 1}};
constexpr EnumName kOptimizers[] = {{"sgd", 0}, {"adam", 1}};
constexpr EnumName kActivations[] = {{"relu", 0}, {"tanh", 1}};

// One entry per config key: how to read it from JSON and how to write it.
struct Field {
  std::function<void(SimConfig&, const json&)> read;
  std::function<json(const SimConfig&)> write;
};

template <typename T>
Field plain(T SimConfig::*member) {
  return {[member](SimConfig& c, const json& v) { c.*member = v.get<T>(); },
          [member](const SimConfig& c) { return json(c.*member); }};
}

template <typename E, std::size_t N>
Field enumerated(E SimConfig::*member, const EnumName (&names)[N], std::string key) {
  return {[member, &names, key](SimConfig& c, const json& v) {
            c.*member = enum_from<E>(key, v.get<std::string>(), names);
          },
          [member, &names](const SimConfig& c) { return json(enum_to(c.*member, names)); }};
}

Field cost_field(double CostModel::*member) {
  return {[member](SimConfig& c, const json& v) { c.cost.*member = v.get<double>(); },
          [member](const SimConfig& c) { return json(c.cost.*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"mode", enumerated(&SimConfig::mode, kModes, "mode")},
      {"regime", enumerated(&SimConfig::regime, kRegimes, "regime")},
      {"seed", plain(&SimConfig::seed)},
      {"out_dir", plain(&SimConfig::out_dir)},
      {"dataset", plain(&SimConfig::dataset)},
      {"synthetic_classes", plain(&SimConfig::synthetic_classes)},
      {"synthetic_per_class", plain(&SimConfig::synthetic_per_class)},
      {"synthetic_dim", plain(&SimConfig::synthetic_dim)},
      {"synthetic_spread", plain(&SimConfig::synthetic_spread)},
      {"probe_per_class", plain(&SimConfig::probe_per_class)},
      {"idx_train_images", plain(&SimConfig::idx_train_images)},
      {"idx_train_labels", plain(&SimConfig::idx_train_labels)},
      {"idx_test_images", plain(&SimConfig::idx_test_images)},
      {"idx_test_labels", plain(&SimConfig::idx_test_labels)},
      {"max_train_points", plain(&SimConfig::max_train_points)},
      {"probe_train_points", plain(&SimConfig::probe_train_points)},
      {"probe_test_points", plain(&SimConfig::probe_test_points)},
      {"devices", plain(&SimConfig::devices)},
      {"avg_degree", plain(&SimConfig::avg_degree)},
      {"classes_per_device", plain(&SimConfig::classes_per_device)},
      {"T", plain(&SimConfig::total_steps)},
      {"T_a", plain(&SimConfig::aggregation_period)},
      {"T_p", plain(&SimConfig::pull_period)},
      {"pull_budget", plain(&SimConfig::pull_budget)},
      {"participants", plain(&SimConfig::participants)},
      {"k_reserve", plain(&SimConfig::k_reserve)},
      {"k_approx", plain(&SimConfig::k_approx)},
      {"k_macro", plain(&SimConfig::k_macro)},
      {"z_local", plain(&SimConfig::z_local)},
      {"z_reserve", plain(&SimConfig::z_reserve)},
      {"reserve_selection", enumerated(&SimConfig::reserve_selection, kReserve, "reserve_selection")},
      {"importance_model", enumerated(&SimConfig::importance_model, kImportance, "importance_model")},
      {"temperature", plain(&SimConfig::temperature)},
      {"margin", plain(&SimConfig::margin)},
      {"reg_k", plain(&SimConfig::reg_k)},
      {"overlap_mu", plain(&SimConfig::overlap_mu)},
      {"overlap_sigma", plain(&SimConfig::overlap_sigma)},
      {"reg_lambda", plain(&SimConfig::reg_lambda)},
      {"reg_rho", plain(&SimConfig::reg_rho)},
      {"zeta_schedule", plain(&SimConfig::zeta_schedule)},
      {"hidden_dims", plain(&SimConfig::hidden_dims)},
      {"embedding_dim", plain(&SimConfig::embedding_dim)},
      {"activation", enumerated(&SimConfig::activation, kActivations, "activation")},
      {"optimizer", enumerated(&SimConfig::optimizer, kOptimizers, "optimizer")},
      {"learning_rate", plain(&SimConfig::learning_rate)},
      {"batch_size", plain(&SimConfig::batch_size)},
      {"adam_beta1", plain(&SimConfig::adam_beta1)},
      {"adam_beta2", plain(&SimConfig::adam_beta2)},
      {"adam_epsilon", plain(&SimConfig::adam_epsilon)},
      {"noise_sigma", plain(&SimConfig::noise_sigma)},
      {"crop_pad", plain(&SimConfig::crop_pad)},
      {"flip_probability", plain(&SimConfig::flip_probability)},
      {"blur_probability", plain(&SimConfig::blur_probability)},
      {"probe_iters", plain(&SimConfig::probe_iters)},
      {"probe_lr", plain(&SimConfig::probe_lr)},
      {"probe_batch", plain(&SimConfig::probe_batch)},
      {"eval_points", plain(&SimConfig::eval_points)},
      {"histogram_bins", plain(&SimConfig::histogram_bins)},
      {"thresholds", plain(&SimConfig::thresholds)},
      {"d2d_rate", cost_field(&CostModel::d2d_rate)},
      {"uplink_rate", cost_field(&CostModel::uplink_rate)},
      {"model_param_bits", cost_field(&CostModel::model_param_bits)},
      {"datapoint_bits", cost_field(&CostModel::datapoint_bits)},
      {"embedding_value_bits", cost_field(&CostModel::embedding_value_bits)},
      {"kmeans_max_iter", plain(&SimConfig::kmeans_max_iter)},
      {"kmeans_tol", plain(&SimConfig::kmeans_tol)},
      {"kmeans_restarts", plain(&SimConfig::kmeans_restarts)},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

void apply(SimConfig& config, const std::string& key, const json& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  try {
    f->read(config, value);
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError("config key '" + key + "': " + why);
}

}  // namespace

const char* to_string(Mode m) { return kModes[static_cast<int>(m)].name; }

Mode parse_mode(const std::string& s) { return enum_from<Mode>("mode", s, kModes); }

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes = {Mode::cfcl_explicit, Mode::cfcl_implicit, Mode::uniform,
                                          Mode::bulk,          Mode::kmeans,        Mode::fedavg};
  return modes;
}

void validate(const SimConfig& c) {
  require(c.dataset == "synthetic" || c.dataset == "idx", "dataset", "must be 'synthetic' or 'idx'");
  if (c.dataset == "synthetic") {
    require(c.synthetic_classes >= 2, "synthetic_classes", "must be >= 2");
    require(c.synthetic_dim >= 2, "synthetic_dim", "must be >= 2");
    require(c.synthetic_per_class >= 1, "synthetic_per_class", "must be >= 1");
    require(c.synthetic_spread >= 0.0, "synthetic_spread", "must be >= 0");
    require(c.probe_per_class >= 1, "probe_per_class", "must be >= 1");
  } else {
    require(!c.idx_train_images.empty(), "idx_train_images", "required for idx datasets");
    require(!c.idx_train_labels.empty(), "idx_train_labels", "required for idx datasets");
    require(!c.idx_test_images.empty(), "idx_test_images", "required for idx datasets");
    require(!c.idx_test_labels.empty(), "idx_test_labels", "required for idx datasets");
    require(c.probe_train_points >= 1, "probe_train_points", "must be >= 1");
    require(c.probe_test_points >= 1, "probe_test_points", "must be >= 1");
  }
  require(c.devices >= 1, "devices", "must be >= 1");
  require(c.classes_per_device >= 1, "classes_per_device", "must be >= 1");
  if (c.devices >= 2) {
    require(c.avg_degree > 0.0 && c.avg_degree <= static_cast<double>(c.devices - 1), "avg_degree",
            "must be in (0, devices-1]");
  }
  require(c.aggregation_period >= 2, "T_a", "must be >= 2 (staleness weight divides by T_a-1)");
  require(c.pull_period >= 1, "T_p", "must be >= 1");
  require(c.total_steps >= c.aggregation_period, "T", "must be at least T_a");
  require(c.total_steps % c.aggregation_period == 0, "T", "must be a multiple of T_a");
  require(c.pull_budget >= 1, "pull_budget", "must be >= 1");
  require(c.participants <= c.devices, "participants", "must not exceed devices");
  require(c.k_reserve >= 1, "k_reserve", "must be >= 1");
  require(c.k_approx >= 1, "k_approx", "must be >= 1");
  require(c.k_macro >= 1, "k_macro", "must be >= 1");
  require(std::isfinite(c.temperature), "temperature", "must be finite");
  require(c.margin > 0.0, "margin", "must be > 0");
  require(c.reg_k > 0.0, "reg_k", "must be > 0");
  require(c.overlap_sigma > 0.0, "overlap_sigma", "must be > 0");
  require(c.reg_lambda > 0.0, "reg_lambda", "must be > 0");
  require(c.zeta_schedule == "zero", "zeta_schedule", "only 'zero' is defined");
  require(c.embedding_dim >= 1, "embedding_dim", "must be >= 1");
  for (std::size_t h : c.hidden_dims) require(h >= 1, "hidden_dims", "entries must be >= 1");
  require(c.learning_rate >= 0.0, "learning_rate", "must be >= 0");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.probe_iters >= 1, "probe_iters", "must be >= 1");
  require(c.probe_lr > 0.0, "probe_lr", "must be > 0");
  require(c.probe_batch >= 1, "probe_batch", "must be >= 1");
  require(c.eval_points >= 2, "eval_points", "must be >= 2");
  require(c.histogram_bins >= 1, "histogram_bins", "must be >= 1");
  require(c.cost.d2d_rate > 0.0, "d2d_rate", "must be > 0");
  require(c.cost.uplink_rate > 0.0, "uplink_rate", "must be > 0");
  require(c.cost.model_param_bits > 0.0, "model_param_bits", "must be > 0");
  require(c.cost.datapoint_bits > 0.0, "datapoint_bits", "must be > 0");
  require(c.cost.embedding_value_bits > 0.0, "embedding_value_bits", "must be > 0");
  require(c.kmeans_max_iter >= 1, "kmeans_max_iter", "must be >= 1");
  require(c.kmeans_tol >= 0.0, "kmeans_tol", "must be >= 0");
  require(c.kmeans_restarts >= 1, "kmeans_restarts", "must be >= 1");
}

SimConfig parse_config(const std::string& json_text,
                       const std::map<std::string, std::string>& overrides) {
  SimConfig config;
  const std::string trimmed = json_text.find_first_not_of(" \t\r\n") == std::string::npos ? "{}" : json_text;
  const json doc = parse_json(trimmed, "config document");
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");

  auto preset_of = [](const json& v) {
    try {
      return v.get<std::string>();
    } catch (const json::exception&) {
      throw ConfigError("config key 'preset': must be a string");
    }
  };
  if (auto it = overrides.find("preset"); it != overrides.end()) {
    config = preset_config(preset_of(parse_json(it->second, "override 'preset'")));
  } else if (doc.contains("preset")) {
    config = preset_config(preset_of(doc.at("preset")));
  }
  for (const auto& [key, value] : doc.items()) {
    if (key == "preset") continue;
    apply(config, key, value);
  }
  for (const auto& [key, text] : overrides) {
    if (key == "preset") continue;
    // Bare words are taken as strings so `--set mode=fedavg` works.
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    apply(config, key, value);
  }
  validate(config);
  return config;
}

SimConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string config_to_json(const SimConfig& config) {
  json doc = json::object();
  for (const auto& [name, field] : fields()) doc[name] = field.write(config);
  return doc.dump(2) + "\n";
}

SimConfig preset_config(const std::string& name) {
  SimConfig c;
  if (name == "synthetic") {
    // Heavy augmentation noise relative to the class spread makes devices that
    // lack neighbouring classes collapse them; the regularizer sums over every
    // received embedding, so its weight is scaled down.
    c.noise_sigma = 1.0;
    c.reg_lambda = 0.02;
    return c;
  }
  if (name == "fmnist" || name == "usps") {
    c.dataset = "idx";
    c.devices = 10;
    c.avg_degree = 7.0;
    c.classes_per_device = 3;
    c.embedding_dim = 16;
    c.optimizer = OptimizerKind::adam;
    c.k_approx = 100;
    c.pull_budget = 5;
    c.noise_sigma = 0.0;
    c.eval_points = 1000;
    if (name == "fmnist") {
      c.idx_train_images = "train-images-idx3-ubyte";
      c.idx_train_labels = "train-labels-idx1-ubyte";
      c.idx_test_images = "t10k-images-idx3-ubyte";
      c.idx_test_labels = "t10k-labels-idx1-ubyte";
      c.hidden_dims = {128};
      c.learning_rate = 1e-4;
      c.total_steps = 2000;
      c.aggregation_period = 25;
      c.pull_period = 25;
      c.k_reserve = 20;
      c.k_macro = 20;
    } else {
      c.idx_train_images = "usps-train-images-idx3-ubyte";
      c.idx_train_labels = "usps-train-labels-idx1-ubyte";
      c.idx_test_images = "usps-test-images-idx3-ubyte";
      c.idx_test_labels = "usps-test-labels-idx1-ubyte";
      c.hidden_dims = {128};
      c.learning_rate = 1e-3;
      c.total_steps = 1500;
      c.aggregation_period = 10;
      c.pull_period = 25;
      c.k_reserve = 10;
      c.k_macro = 10;
      c.crop_pad = 1.0;
      c.flip_probability = 0.0;
    }
    return c;
  }
  throw ConfigError("config key 'preset': unknown preset '" + name + "' (expected synthetic, fmnist, usps)");
}

}  // namespace cfcl
