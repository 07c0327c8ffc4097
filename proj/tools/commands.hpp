#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cfcl/config.hpp"
#include "cfcl/federation.hpp"

namespace cfcl::cli {

// Runs one simulation and writes metrics.csv, trace.json and config.json into
// config.out_dir. Each file is written via temp-file rename, and nothing is
// written if the run fails.
RunResult cmd_run(const SimConfig& config);

struct SweepOutput {
  std::string long_csv;     // mode,seed,t,gamma,accuracy,sep_ratio,d2d_bytes_cum,uplink_bytes_cum,delay_seconds_cum
  std::string summary_csv;  // mode,seed,threshold,delay_seconds,d2d_bytes,uplink_bytes
};

// Cross product of modes and seeds on a base config; `jobs` runs execute
// concurrently. Output rows are ordered by mode, then seed.
SweepOutput sweep(const SimConfig& base, const std::vector<Mode>& modes,
                  const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);

// Writes sweep.csv and sweep_summary.csv into base.out_dir.
SweepOutput cmd_sweep(const SimConfig& base, const std::vector<Mode>& modes,
                      const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);

// Prints a pass/fail table; returns the process exit code.
int cmd_selftest(std::ostream& out, const CostModel& cost = {});

}  // namespace cfcl::cli
