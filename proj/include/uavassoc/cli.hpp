#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace uavassoc {

/// Entry point of the command-line tool. Returns the process exit code;
/// diagnostics and progress go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uavassoc
