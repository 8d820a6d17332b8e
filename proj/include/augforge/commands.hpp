#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "augforge/run_config.hpp"

namespace augforge {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct SynthOptions {
  int dim = 100;
  int per_class = 1000;
  int classes = 2;
  double separation = 2.0;
  double cov = 1.0;
  std::uint64_t seed = 1;
  std::filesystem::path output;
};

/// Each command writes its artifacts under config.out_dir and log lines to
/// `log`. Errors propagate as exceptions; run_cli maps them to exit codes.
void cmd_synth(const SynthOptions& options, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_sweep(const RunConfig& config, std::ostream& log);
void cmd_tsne(const RunConfig& config, std::ostream& log);

/// Full command-line entry point (args exclude the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace augforge
