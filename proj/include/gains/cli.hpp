#pragma once

#include "gains/core_math.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace gains {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnknown = 1,
  kExitFalsified = 2,
  kExitUsage = 3,
  kExitInternal = 4,
};

/// One input CSV row. A leading `mask=0110` field selects observed features.
struct InputRow {
  Vector x;
  std::vector<bool> mask;
};

std::vector<InputRow> parse_input_csv(const std::string& text);
std::vector<InputRow> load_input_csv(const std::string& path);

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace gains
