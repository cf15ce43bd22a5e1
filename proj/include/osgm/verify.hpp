#pragma once

#include "osgm/report.hpp"

#include <cstdint>
#include <string>

namespace osgm {

struct SuiteOptions {
  std::uint64_t seed = 0;
  // Only checks whose name starts with this prefix are run and reported.
  std::string only;
  int iters = 300;
};

// Invariant and property checks over the built-in problems, the feedback
// derivatives, projections, trace I/O, and monitored solver runs of every
// feedback/action pairing.
MonitorReport run_invariant_suite(const SuiteOptions& options);

}  // namespace osgm
