#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpmn/hpmn_core.hpp"

namespace hpmn::cli {

/// Named model structure: update periods and slot width.
struct Preset {
  std::string name;
  UpdateSchedule schedule;
  std::size_t memory_dim = 32;
  std::size_t embed_dim = 16;
};

/// amazon, taobao, xlong or small. Throws std::invalid_argument otherwise.
Preset preset(const std::string& name);

/// Parses "1,2,4" into a validated schedule.
UpdateSchedule parse_periods(const std::string& text);

/// Runs one command. `args` excludes the program name. Returns the process
/// exit code: 0 on success, 1 on a failed command, 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hpmn::cli
