#ifndef VIALAB_H
#define VIALAB_H

/* Generated by cbindgen from vialab-ffi; regenerate with a build, do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a vialab call. Anything other than `OK` leaves a message in
 * `vialab_last_error`.
 */
typedef enum VialabStatus {
  VIALAB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  VIALAB_STATUS_NULL_POINTER = 1,
  /**
   * An input string was not valid UTF-8.
   */
  VIALAB_STATUS_INVALID_UTF8 = 2,
  /**
   * The config failed to parse or validate.
   */
  VIALAB_STATUS_INVALID_CONFIG = 3,
  /**
   * The experiment started but did not finish.
   */
  VIALAB_STATUS_RUN_FAILED = 4,
  /**
   * An internal invariant broke; the handle is still safe to free.
   */
  VIALAB_STATUS_PANIC = 5,
} VialabStatus;

/**
 * Opaque handle to a parsed and validated experiment configuration.
 */
typedef struct VialabConfig VialabConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *vialab_version(void);

/**
 * Copy of the message for the most recent failure on this thread, or null
 * if the last call succeeded. Free with `vialab_string_free`.
 */
char *vialab_last_error(void);

/**
 * Parse an experiment config from a JSON string into a new handle.
 *
 * On success writes the handle through `out` and returns `OK`; on failure
 * leaves `out` untouched.
 *
 * # Safety
 *
 * `json` must point to a NUL-terminated string and `out` to writable
 * memory for one pointer; both stay borrowed only for the call.
 */
enum VialabStatus vialab_config_parse(const char *json, struct VialabConfig **out);

/**
 * Release a config handle. Null is a no-op.
 *
 * # Safety
 *
 * `config` must be null or a handle from `vialab_config_parse` that has
 * not been freed before.
 */
void vialab_config_free(struct VialabConfig *config);

/**
 * Run the experiment described by `config` and return the report as a
 * JSON string through `out_json`. Free the string with
 * `vialab_string_free`. The config handle stays valid and reusable.
 *
 * # Safety
 *
 * `config` must be a live handle from `vialab_config_parse` and
 * `out_json` must point to writable memory for one pointer.
 */
enum VialabStatus vialab_experiment_run(const struct VialabConfig *config, char **out_json);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 *
 * `s` must be null or a string obtained from this library that has not
 * been freed before.
 */
void vialab_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VIALAB_H */
