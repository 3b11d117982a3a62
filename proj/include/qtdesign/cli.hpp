#pragma once

#include <string>

#include "qtdesign/config.hpp"

namespace qtdesign {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitNonConvergence = 4,
};

struct CommandOptions {
  std::string out_dir;  // overrides the config's output directory when set
  bool timestamp = true;
  unsigned threads = 1;
  std::string mode = "deterministic";
};

int cmd_transmission(const RunConfig& config, const CommandOptions& options);
int cmd_validate_wkb(const RunConfig& config, const CommandOptions& options);
int cmd_design(const RunConfig& config, const CommandOptions& options);
int cmd_oracle_compare(const RunConfig& config, const CommandOptions& options);
int cmd_quadrature_export(const RunConfig& config, const CommandOptions& options);

/// Full command line: subcommand dispatch, error reporting, exit codes.
int run_cli(int argc, char** argv);

}  // namespace qtdesign
