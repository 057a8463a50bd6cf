#ifndef FRESGLD_H
#define FRESGLD_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum FresgldStatus {
  FresgldStatus_Ok = 0,
  FresgldStatus_NullPointer = 1,
  FresgldStatus_InvalidArgument = 2,
  FresgldStatus_ConfigError = 3,
  FresgldStatus_StepTooLarge = 4,
  FresgldStatus_RuntimeError = 5,
} FresgldStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct FresgldConfig FresgldConfig;

/**
 * Opaque result of one seeded run.
 */
typedef struct FresgldRun FresgldRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread; empty string if
 * none. The pointer stays valid until the next failing call on the thread.
 */
const char *fresgld_last_error_message(void);

/**
 * Parse a TOML experiment configuration. On success `*out` owns a new
 * handle.
 *
 * # Safety
 * `toml_text` must be a valid NUL-terminated string and `out` a valid
 * pointer.
 */
enum FresgldStatus fresgld_config_from_toml(const char *toml_text, struct FresgldConfig **out);

/**
 * Load a built-in preset by name (for example `paper-mixture-fixed`).
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum FresgldStatus fresgld_config_preset(const char *name, struct FresgldConfig **out);

/**
 * Release a configuration handle; a null handle is a no-op.
 *
 * # Safety
 * `config` must be null or a pointer obtained from this library and not yet
 * freed.
 */
void fresgld_config_free(struct FresgldConfig *config);

/**
 * Run one seed of the experiment in memory (no files are written). On
 * success `*out` owns a new run handle.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum FresgldStatus fresgld_run_seed(const struct FresgldConfig *config,
                                    uint64_t seed,
                                    struct FresgldRun **out);

/**
 * Release a run handle; a null handle is a no-op.
 *
 * # Safety
 * `run` must be null or a pointer obtained from this library and not yet
 * freed.
 */
void fresgld_run_free(struct FresgldRun *run);

/**
 * Number of retained low-temperature samples; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
uintptr_t fresgld_run_sample_count(const struct FresgldRun *run);

/**
 * Dimension of each retained sample; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
uintptr_t fresgld_run_dim(const struct FresgldRun *run);

/**
 * Copy the retained samples row-major into `buffer`
 * (`sample_count * dim` doubles).
 *
 * # Safety
 * `run` must be a live handle; `buffer` must point to at least
 * `buffer_len` doubles.
 */
enum FresgldStatus fresgld_run_samples(const struct FresgldRun *run,
                                       double *buffer,
                                       uintptr_t buffer_len);

/**
 * Transport distance of the retained samples to the analytic target; NaN is
 * written when the target has no distance metric (the inverse-PDE target).
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum FresgldStatus fresgld_run_w2(const struct FresgldRun *run, double *out);

/**
 * Fraction of swap attempts that exchanged the chains.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum FresgldStatus fresgld_run_swap_rate(const struct FresgldRun *run, double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fresgld_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRESGLD_H */
