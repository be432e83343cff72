// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gpsbc.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "commands.hpp"
#include "config.hpp"
#include "error.hpp"
#include "sbc.hpp"

struct gpsbc_config {
  gpsbc::ExperimentConfig config;
  std::filesystem::path base_dir = ".";
};

struct gpsbc_tally {
  gpsbc::RankTally tally;
};

namespace {

thread_local std::string g_last_error;

gpsbc_status fail(gpsbc_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Maps the exception hierarchy onto status codes; most specific first.
template <typename F>
gpsbc_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return GPSBC_OK;
  } catch (const gpsbc::TrialFailureLimit& e) {
    return fail(GPSBC_ERR_TRIAL_FAILURE_LIMIT, e.what());
  } catch (const gpsbc::NumericalError& e) {
    return fail(GPSBC_ERR_NUMERICAL, e.what());
  } catch (const gpsbc::ConfigError& e) {
    return fail(GPSBC_ERR_CONFIG, e.what());
  } catch (const gpsbc::IoError& e) {
    return fail(GPSBC_ERR_IO, e.what());
  } catch (const gpsbc::InvalidArgument& e) {
    return fail(GPSBC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(GPSBC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GPSBC_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GP_SBC_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0' || v == 0 || v > 4096) throw gpsbc::ConfigError("GP_SBC_THREADS: must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

extern "C" {

const char* gpsbc_version(void) { return gpsbc::tool_version(); }

const char* gpsbc_last_error(void) { return g_last_error.c_str(); }

gpsbc_status gpsbc_config_parse(const char* json_text, gpsbc_config** out) {
  if (json_text == nullptr || out == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new gpsbc_config{gpsbc::parse_config(json_text)}; });
}

gpsbc_status gpsbc_config_load(const char* path, gpsbc_config** out) {
  if (path == nullptr || out == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw gpsbc::IoError(std::string("cannot read config '") + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    auto cfg = std::make_unique<gpsbc_config>(gpsbc_config{gpsbc::parse_config(text.str())});
    const auto parent = std::filesystem::path(path).parent_path();
    cfg->base_dir = parent.empty() ? std::filesystem::path(".") : parent;
    *out = cfg.release();
  });
}

void gpsbc_config_free(gpsbc_config* config) { delete config; }

gpsbc_status gpsbc_config_to_json(const gpsbc_config* config, char** out) {
  if (config == nullptr || out == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = dup_string(gpsbc::serialize_config(config->config)); });
}

void gpsbc_string_free(char* text) { std::free(text); }

gpsbc_status gpsbc_config_set_seed(gpsbc_config* config, uint64_t seed) {
  if (config == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  config->config.sbc.base_seed = seed;
  return GPSBC_OK;
}

gpsbc_status gpsbc_config_set_output_dir(gpsbc_config* config, const char* dir) {
  if (config == nullptr || dir == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  if (*dir == '\0') return fail(GPSBC_ERR_INVALID_ARGUMENT, "output directory must not be empty");
  config->config.output_dir = dir;
  return GPSBC_OK;
}

gpsbc_status gpsbc_run(const gpsbc_config* config, gpsbc_command command, unsigned threads, int* exit_code,
                       char** summary) {
  if (config == nullptr || exit_code == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  *exit_code = gpsbc::exit_code::kError;
  if (summary != nullptr) *summary = nullptr;
  return guarded([&] {
    if (!config->config.output_dir) throw gpsbc::ConfigError("output_dir: not set");
    gpsbc::Command cmd;
    switch (command) {
      case GPSBC_CMD_SBC:
        cmd = gpsbc::Command::kSbc;
        break;
      case GPSBC_CMD_DEMO_BUG:
        cmd = gpsbc::Command::kDemoBug;
        break;
      case GPSBC_CMD_MARG_CHECK:
        cmd = gpsbc::Command::kMargCheck;
        break;
      default:
        throw gpsbc::InvalidArgument("unknown command");
    }
    gpsbc::RunContext ctx{*config->config.output_dir, resolve_threads(threads), config->base_dir};
    const auto result = gpsbc::run_command(cmd, config->config, ctx);
    *exit_code = result.exit_code;
    if (summary != nullptr) *summary = dup_string(result.summary);
  });
}

gpsbc_status gpsbc_sbc_run(const gpsbc_config* config, unsigned threads, gpsbc_tally** out) {
  if (config == nullptr || out == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto exp = gpsbc::resolve_experiment(config->config, gpsbc::Command::kSbc);
    *out = new gpsbc_tally{gpsbc::run_sbc(exp.model, exp.sbc, gpsbc::RunOptions{resolve_threads(threads)})};
  });
}

void gpsbc_tally_free(gpsbc_tally* tally) { delete tally; }

size_t gpsbc_tally_num_test(const gpsbc_tally* t) { return t ? static_cast<size_t>(t->tally.num_test()) : 0; }
size_t gpsbc_tally_num_outputs(const gpsbc_tally* t) { return t ? static_cast<size_t>(t->tally.num_outputs()) : 0; }
size_t gpsbc_tally_num_samples(const gpsbc_tally* t) { return t ? static_cast<size_t>(t->tally.num_samples()) : 0; }
size_t gpsbc_tally_completed(const gpsbc_tally* t) { return t ? static_cast<size_t>(t->tally.completed()) : 0; }
size_t gpsbc_tally_num_failed(const gpsbc_tally* t) { return t ? t->tally.failed_trials().size() : 0; }

gpsbc_status gpsbc_tally_count(const gpsbc_tally* t, size_t test_point, size_t output, size_t rank, int64_t* out) {
  if (t == nullptr || out == nullptr) return fail(GPSBC_ERR_INVALID_ARGUMENT, "null argument");
  const auto& tally = t->tally;
  if (test_point >= static_cast<size_t>(tally.num_test()) || output >= static_cast<size_t>(tally.num_outputs()) ||
      rank > static_cast<size_t>(tally.num_samples())) {
    return fail(GPSBC_ERR_INVALID_ARGUMENT, "tally index out of range");
  }
  *out = tally.count(static_cast<Eigen::Index>(test_point), static_cast<Eigen::Index>(output),
                     static_cast<std::int64_t>(rank));
  return GPSBC_OK;
}

}  // extern "C"
