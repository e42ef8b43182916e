#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "roesl/config.hpp"

namespace roesl {

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct CliOptions {
  std::string command;
  RunConfig config;
  std::filesystem::path run_dir = ".";

  // Per-command inputs; only the relevant ones are populated.
  std::string input;      // select-frames: frame directory or manifest
  std::string dataset;    // relabel / train-offline
  std::string spec_path;  // relabel / train-offline / finetune
  std::string ckpt;       // finetune / eval
  std::string vnet;       // finetune (optional warm-start value net)
  std::string expert;     // eval: skill name for a scripted rollout
  std::string output;     // command-specific output path or directory
  std::string hybrid_dir, baseline_dir;  // report
  int select_k = -1;      // select-frames override
  long budget = -1;       // finetune env-step override
  bool svg = false;       // eval: also emit SVG plots
};

struct CliParse {
  int exit_code = kExitOk;
  std::string message;              // help or error text
  std::optional<CliOptions> options;  // set only when parsing succeeded
};

// Parses argv (without the program name). Never throws.
CliParse parse_cli(const std::vector<std::string>& args);

// Executes a parsed command, returning the process exit code.
int run_command(const CliOptions& options);

}  // namespace roesl
