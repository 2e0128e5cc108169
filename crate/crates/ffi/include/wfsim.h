#ifndef WFSIM_H
#define WFSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Broken-bar representation.
 */
typedef enum WfsimBarModel {
  WFSIM_BAR_MODEL_SCALE = 0,
  WFSIM_BAR_MODEL_ELIMINATE = 1,
} WfsimBarModel;

/**
 * Inductance block selector.
 */
typedef enum WfsimBlock {
  WFSIM_BLOCK_LS = 0,
  WFSIM_BLOCK_LR = 1,
  WFSIM_BLOCK_LSR = 2,
} WfsimBlock;

/**
 * Uniformly sampled trace of a finished run.
 */
typedef enum WfsimSeries {
  WFSIM_SERIES_TIME = 0,
  WFSIM_SERIES_IA = 1,
  WFSIM_SERIES_IB = 2,
  WFSIM_SERIES_IC = 3,
  WFSIM_SERIES_OMEGA = 4,
  WFSIM_SERIES_TORQUE = 5,
  WFSIM_SERIES_THETA = 6,
} WfsimSeries;

/**
 * Result code of every fallible call.
 */
typedef enum WfsimStatus {
  WFSIM_STATUS_OK = 0,
  WFSIM_STATUS_NULL_POINTER = 1,
  WFSIM_STATUS_INVALID_ARGUMENT = 2,
  WFSIM_STATUS_CONFIG = 3,
  WFSIM_STATUS_INVALID_PARAMETER = 4,
  WFSIM_STATUS_ROTOR_CONTACT = 5,
  WFSIM_STATUS_INDEX_OUT_OF_RANGE = 6,
  WFSIM_STATUS_UNSUPPORTED = 7,
  WFSIM_STATUS_NUMERICAL = 8,
  WFSIM_STATUS_IO = 9,
  WFSIM_STATUS_PANIC = 10,
} WfsimStatus;

/**
 * Run configuration.
 */
typedef struct WfsimConfig WfsimConfig;

/**
 * Inductance model bound to the eccentricity of a configuration.
 */
typedef struct WfsimModel WfsimModel;

/**
 * Result of a simulation.
 */
typedef struct WfsimRun WfsimRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *wfsim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wfsim_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void wfsim_string_free(char *s);

/**
 * Built-in reference configuration.
 */
struct WfsimConfig *wfsim_config_reference(void);

/**
 * Parses TOML overrides of the reference configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WfsimStatus wfsim_config_from_toml(const char *text, struct WfsimConfig **out);

/**
 * Effective configuration as TOML; free with [`wfsim_string_free`].
 *
 * # Safety
 * `cfg` must be a live configuration and `out` a valid pointer.
 */
enum WfsimStatus wfsim_config_to_toml(const struct WfsimConfig *cfg, char **out);

/**
 * Sets the static and dynamic eccentricity degrees.
 *
 * # Safety
 * `cfg` must be a live configuration.
 */
enum WfsimStatus wfsim_config_set_eccentricity(struct WfsimConfig *cfg,
                                               double delta_s,
                                               double delta_d);

/**
 * Breaks `count` adjacent bars starting at bar 1.
 *
 * # Safety
 * `cfg` must be a live configuration.
 */
enum WfsimStatus wfsim_config_set_broken_bars(struct WfsimConfig *cfg,
                                              size_t count,
                                              enum WfsimBarModel model);

/**
 * Sets the simulated duration in seconds.
 *
 * # Safety
 * `cfg` must be a live configuration.
 */
enum WfsimStatus wfsim_config_set_duration(struct WfsimConfig *cfg, double t_end);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice.
 */
void wfsim_config_free(struct WfsimConfig *cfg);

/**
 * Builds the inductance model of a configuration.
 *
 * # Safety
 * `cfg` must be a live configuration and `out` a valid pointer.
 */
enum WfsimStatus wfsim_model_new(const struct WfsimConfig *cfg, struct WfsimModel **out);

/**
 * One inductance entry (H) and its θ-derivative (H/rad) at rotor angle
 * `theta`. Indices are 1-based; `derivative` may be null.
 *
 * # Safety
 * `model` must be live and `value` valid; `derivative` valid or null.
 */
enum WfsimStatus wfsim_model_inductance(const struct WfsimModel *model,
                                        double theta,
                                        enum WfsimBlock block,
                                        size_t i,
                                        size_t j,
                                        double *value,
                                        double *derivative);

/**
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void wfsim_model_free(struct WfsimModel *model);

/**
 * Simulates a configuration and analyses its steady state. Blocks until
 * the run finishes.
 *
 * # Safety
 * `cfg` must be a live configuration and `out` a valid pointer.
 */
enum WfsimStatus wfsim_run(const struct WfsimConfig *cfg, struct WfsimRun **out);

/**
 * Number of samples in every series of a run, or 0 for null.
 *
 * # Safety
 * `run` must be live or null.
 */
size_t wfsim_run_len(const struct WfsimRun *run);

/**
 * Measured steady-state slip.
 *
 * # Safety
 * `run` must be live and `out` valid.
 */
enum WfsimStatus wfsim_run_slip(const struct WfsimRun *run, double *out);

/**
 * Copies one series into `buf`, which must hold [`wfsim_run_len`] values.
 *
 * # Safety
 * `run` must be live and `buf` valid for `capacity` doubles.
 */
enum WfsimStatus wfsim_run_copy_series(const struct WfsimRun *run,
                                       enum WfsimSeries series,
                                       double *buf,
                                       size_t capacity);

/**
 * Run manifest as JSON; free with [`wfsim_string_free`].
 *
 * # Safety
 * `run` must be live and `out` valid.
 */
enum WfsimStatus wfsim_run_manifest_json(const struct WfsimRun *run, char **out);

/**
 * Writes the run artifacts into directory `dir`.
 *
 * # Safety
 * `run` must be live and `dir` a NUL-terminated string.
 */
enum WfsimStatus wfsim_run_write(const struct WfsimRun *run, const char *dir);

/**
 * # Safety
 * `run` must come from this library and not be freed twice.
 */
void wfsim_run_free(struct WfsimRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WFSIM_H */
