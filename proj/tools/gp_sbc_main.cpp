// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

// gp-sbc command-line front end. Exit codes: 0 pass, 2 fail, 3 inconclusive, 1 error.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "gpsbc.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--seed", o.seed, "Override sbc.base_seed");
  sub->add_option("--threads", o.threads, "Worker threads (default: GP_SBC_THREADS or all cores)")
      ->check(CLI::Range(1u, 4096u));
}

int report_error(const char* what) {
  std::fprintf(stderr, "gp-sbc: error: %s: %s\n", what, gpsbc_last_error());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-based calibration checks for Gaussian-process models", "gp-sbc"};
  app.set_version_flag("--version", gpsbc_version());
  app.require_subcommand(1);

  Options opts;
  auto* sbc = app.add_subcommand("sbc", "Run the SBC loop and test rank uniformity");
  auto* demo = app.add_subcommand("demo-bug", "Compare a model with a planted fault against the fault-free model");
  auto* marg = app.add_subcommand("marg-check", "Check whether type-II hyperparameter fitting is adequate");
  for (auto* sub : {sbc, demo, marg}) add_common(sub, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  gpsbc_command command = GPSBC_CMD_SBC;
  if (demo->parsed()) command = GPSBC_CMD_DEMO_BUG;
  if (marg->parsed()) command = GPSBC_CMD_MARG_CHECK;

  gpsbc_config* cfg = nullptr;
  if (gpsbc_config_load(opts.config.c_str(), &cfg) != GPSBC_OK) return report_error("config");
  if (opts.seed) gpsbc_config_set_seed(cfg, *opts.seed);
  gpsbc_config_set_output_dir(cfg, opts.out.c_str());

  int exit_code = 1;
  char* summary = nullptr;
  const gpsbc_status status = gpsbc_run(cfg, command, opts.threads, &exit_code, &summary);
  gpsbc_config_free(cfg);
  if (status != GPSBC_OK) return report_error("run");
  std::printf("%s\n", summary);
  gpsbc_string_free(summary);
  return exit_code;
}
