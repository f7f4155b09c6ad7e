#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reachkin::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kIoError = 3,
};

/// Runs one subcommand. args excludes the program name. Defaults may come
/// from an INI/TOML file named by --config or the REACHKIN_CONFIG variable.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reachkin::cli
