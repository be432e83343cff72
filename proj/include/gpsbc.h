/* Copyright 2026 The gp-sbc Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the gp-sbc library. All handles are opaque; every call that
 * can fail returns a gpsbc_status and leaves a message in gpsbc_last_error().
 */
#ifndef GPSBC_H_
#define GPSBC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GPSBC_API __declspec(dllexport)
#else
#define GPSBC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gpsbc_status {
  GPSBC_OK = 0,
  GPSBC_ERR_INVALID_ARGUMENT = 1,
  GPSBC_ERR_CONFIG = 2,
  GPSBC_ERR_NUMERICAL = 3,
  GPSBC_ERR_TRIAL_FAILURE_LIMIT = 4,
  GPSBC_ERR_IO = 5,
  GPSBC_ERR_INTERNAL = 6
} gpsbc_status;

typedef enum gpsbc_command {
  GPSBC_CMD_SBC = 0,
  GPSBC_CMD_DEMO_BUG = 1,
  GPSBC_CMD_MARG_CHECK = 2
} gpsbc_command;

typedef struct gpsbc_config gpsbc_config;
typedef struct gpsbc_tally gpsbc_tally;

GPSBC_API const char* gpsbc_version(void);

/* Message of the most recent failure on this thread; empty if none. */
GPSBC_API const char* gpsbc_last_error(void);

GPSBC_API gpsbc_status gpsbc_config_parse(const char* json_text, gpsbc_config** out);
/* Relative data paths inside the file resolve against the file's directory. */
GPSBC_API gpsbc_status gpsbc_config_load(const char* path, gpsbc_config** out);
GPSBC_API void gpsbc_config_free(gpsbc_config* config);

/* Canonical JSON of the validated config. Free the result with gpsbc_string_free. */
GPSBC_API gpsbc_status gpsbc_config_to_json(const gpsbc_config* config, char** out);
GPSBC_API void gpsbc_string_free(char* text);

GPSBC_API gpsbc_status gpsbc_config_set_seed(gpsbc_config* config, uint64_t seed);
GPSBC_API gpsbc_status gpsbc_config_set_output_dir(gpsbc_config* config, const char* dir);

/*
 * Run a command, writing artifacts to the configured output directory.
 * exit_code receives 0 (pass), 2 (fail) or 3 (inconclusive) on GPSBC_OK.
 * threads == 0 picks GP_SBC_THREADS or the hardware concurrency.
 * summary, if non-NULL, receives a one-line description (free with gpsbc_string_free).
 */
GPSBC_API gpsbc_status gpsbc_run(const gpsbc_config* config, gpsbc_command command, unsigned threads,
                                 int* exit_code, char** summary);

/* Run the plain SBC loop and return the rank tally without writing files. */
GPSBC_API gpsbc_status gpsbc_sbc_run(const gpsbc_config* config, unsigned threads, gpsbc_tally** out);
GPSBC_API void gpsbc_tally_free(gpsbc_tally* tally);
GPSBC_API size_t gpsbc_tally_num_test(const gpsbc_tally* tally);
GPSBC_API size_t gpsbc_tally_num_outputs(const gpsbc_tally* tally);
GPSBC_API size_t gpsbc_tally_num_samples(const gpsbc_tally* tally);
GPSBC_API size_t gpsbc_tally_completed(const gpsbc_tally* tally);
GPSBC_API size_t gpsbc_tally_num_failed(const gpsbc_tally* tally);
/* Count of trials where slice (test_point, output) landed at rank r. */
GPSBC_API gpsbc_status gpsbc_tally_count(const gpsbc_tally* tally, size_t test_point, size_t output, size_t rank,
                                         int64_t* out);

#ifdef __cplusplus
}
#endif

#endif /* GPSBC_H_ */
