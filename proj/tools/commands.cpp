#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <future>
#include <iomanip>

#include "cfcl/selftest.hpp"

namespace cfcl::cli {

RunResult cmd_run(const SimConfig& config) {
  RunResult result = run(config);
  std::filesystem::create_directories(config.out_dir);
  const std::filesystem::path dir(config.out_dir);
  write_file_atomic((dir / "metrics.csv").string(), metrics_csv(result.metrics));
  write_file_atomic((dir / "trace.json").string(), trace_to_json(config, result));
  write_file_atomic((dir / "config.json").string(), config_to_json(config));
  return result;
}

namespace {

std::string summary_rows(const std::string& mode, std::uint64_t seed, const std::vector<double>& thresholds,
                         const std::vector<MetricsRow>& rows) {
  std::vector<CostAccuracy> by_delay, by_d2d, by_uplink;
  for (const auto& r : rows) {
    by_delay.push_back({r.delay_seconds_cum, r.accuracy});
    by_d2d.push_back({r.d2d_bytes_cum, r.accuracy});
    by_uplink.push_back({r.uplink_bytes_cum, r.accuracy});
  }
  auto cell = [](std::optional<double> v, const char* f) {
    if (!v) return std::string("unreached");
    char buf[64];
    std::snprintf(buf, sizeof buf, f, *v);
    return std::string(buf);
  };
  std::string out;
  for (double th : thresholds) {
    char head[96];
    std::snprintf(head, sizeof head, "%s,%llu,%.4g,", mode.c_str(), static_cast<unsigned long long>(seed), th);
    out += head + cell(time_to_threshold(by_delay, th), "%.9g") + "," + cell(time_to_threshold(by_d2d, th), "%.0f") +
           "," + cell(time_to_threshold(by_uplink, th), "%.0f") + "\n";
  }
  return out;
}

}  // namespace

SweepOutput sweep(const SimConfig& base, const std::vector<Mode>& modes,
                  const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  if (modes.empty()) throw ConfigError("sweep: no modes given");
  if (seeds.empty()) throw ConfigError("sweep: no seeds given");
  jobs = std::max(1u, jobs);

  std::vector<SimConfig> configs;
  for (Mode m : modes) {
    for (std::uint64_t s : seeds) {
      SimConfig c = base;
      c.mode = m;
      c.seed = s;
      validate(c);
      configs.push_back(c);
    }
  }
  std::vector<std::vector<MetricsRow>> results(configs.size());
  for (std::size_t start = 0; start < configs.size(); start += jobs) {
    std::vector<std::future<std::vector<MetricsRow>>> running;
    for (std::size_t q = start; q < std::min(configs.size(), start + jobs); ++q) {
      running.push_back(std::async(std::launch::async, [&c = configs[q]] { return run(c).metrics; }));
    }
    for (std::size_t q = 0; q < running.size(); ++q) results[start + q] = running[q].get();
  }

  SweepOutput out;
  out.long_csv = "mode,seed," + metrics_csv_header();
  out.summary_csv = "mode,seed,threshold,delay_seconds,d2d_bytes,uplink_bytes\n";
  for (std::size_t q = 0; q < configs.size(); ++q) {
    const std::string mode = to_string(configs[q].mode);
    const std::string prefix = mode + "," + std::to_string(configs[q].seed) + ",";
    for (const auto& row : results[q]) out.long_csv += prefix + metrics_csv_row(row);
    out.summary_csv += summary_rows(mode, configs[q].seed, base.thresholds, results[q]);
  }
  return out;
}

SweepOutput cmd_sweep(const SimConfig& base, const std::vector<Mode>& modes,
                      const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  SweepOutput out = sweep(base, modes, seeds, jobs);
  std::filesystem::create_directories(base.out_dir);
  const std::filesystem::path dir(base.out_dir);
  write_file_atomic((dir / "sweep.csv").string(), out.long_csv);
  write_file_atomic((dir / "sweep_summary.csv").string(), out.summary_csv);
  return out;
}

int cmd_selftest(std::ostream& out, const CostModel& cost) {
  const auto checks = run_selftest(cost);
  std::size_t width = 5;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  bool all = true;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << c.name << "  "
        << c.detail << "\n";
    all = all && c.passed;
  }
  out << (all ? "selftest passed" : "selftest FAILED") << "\n";
  return all ? 0 : 1;
}

}  // namespace cfcl::cli
