#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osgm {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failed = 1;
inline constexpr int exit_monitor_failure = 2;
inline constexpr int exit_usage = 64;
inline constexpr int exit_config = 65;

// Each command takes its arguments without the program and command names.
int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_verify(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_bench(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Dispatches "run", "verify" or "bench".
int osgm_main(int argc, char** argv);

}  // namespace osgm
