// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "config.hpp"

namespace gpsbc {

/// Exit codes shared by every command. 0/2/3 are verdicts; 1 is an execution failure.
namespace exit_code {
inline constexpr int kPass = 0;
inline constexpr int kError = 1;
inline constexpr int kFail = 2;
inline constexpr int kInconclusive = 3;
}  // namespace exit_code

struct RunContext {
  std::filesystem::path out_dir;
  unsigned threads = 1;
  /// Relative data_csv paths are resolved against this directory.
  std::filesystem::path base_dir = ".";
};

struct CommandResult {
  int exit_code = exit_code::kError;
  std::string summary;
};

const char* tool_version();

/// Run one command. Exceptions propagate; nothing is written for a failed run.
CommandResult cmd_sbc(const ExperimentConfig& config, const RunContext& context);
CommandResult cmd_demo_bug(const ExperimentConfig& config, const RunContext& context);
CommandResult cmd_marg_check(const ExperimentConfig& config, const RunContext& context);

CommandResult run_command(Command command, const ExperimentConfig& config, const RunContext& context);

}  // namespace gpsbc
