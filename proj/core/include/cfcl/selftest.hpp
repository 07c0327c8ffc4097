#pragma once

#include <string>
#include <vector>

#include "cfcl/metrics.hpp"

namespace cfcl {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Property and oracle checks bundled with the library. The cost model is a
// parameter so the accounting checks run against whatever constants the
// caller ships.
std::vector<SelftestCheck> run_selftest(const CostModel& cost = {});

}  // namespace cfcl
