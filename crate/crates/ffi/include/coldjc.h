#ifndef COLDJC_H
#define COLDJC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum CjStatus {
  CJ_STATUS_OK = 0,
  CJ_STATUS_NULL_POINTER = 1,
  CJ_STATUS_INVALID_UTF8 = 2,
  CJ_STATUS_VALIDATION = 3,
  CJ_STATUS_UNSUPPORTED = 4,
  CJ_STATUS_NUMERICAL = 5,
  CJ_STATUS_IO = 6,
  // The run completed but a tolerance check failed.
  CJ_STATUS_VERIFICATION_FAILED = 7,
  CJ_STATUS_OUT_OF_RANGE = 8,
  CJ_STATUS_BUFFER_TOO_SMALL = 9,
  CJ_STATUS_PANIC = 10,
} CjStatus;

typedef enum CjMethod {
  CJ_METHOD_ORACLE = 0,
  CJ_METHOD_DECOMPOSED = 1,
  CJ_METHOD_ANALYTIC = 2,
  // Whatever the configuration selects.
  CJ_METHOD_FROM_CONFIG = 3,
} CjMethod;

typedef enum CjQuantity {
  CJ_QUANTITY_LENGTH = 0,
  CJ_QUANTITY_MOMENTUM = 1,
  CJ_QUANTITY_TIME = 2,
  CJ_QUANTITY_TEMPERATURE = 3,
} CjQuantity;

// Parsed and validated run configuration.
typedef struct CjConfig CjConfig;

// Evolved time series for every case of a configuration.
typedef struct CjSimulation CjSimulation;

// One emitted row; mirrors the CSV columns.
typedef struct CjRecord {
  double t;
  double sigma_z;
  double z_mean;
  double p_mean;
  double field_n_mean;
  double norm;
} CjRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread; empty if none.
// The pointer stays valid until the next failing call on the same thread.
const char *cj_last_error(void);

// Library version as a static NUL-terminated string.
const char *cj_version(void);

// Parses a JSON configuration.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum CjStatus cj_config_from_json(const char *json, struct CjConfig **out);

// Reads and parses a JSON configuration file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CjStatus cj_config_from_file(const char *path, struct CjConfig **out);

// # Safety
// `config` must come from `cj_config_from_*` and not be freed twice; null is ignored.
void cj_config_free(struct CjConfig *config);

// Total dimension `2 · n_cm · n_field` of the configured space.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum CjStatus cj_config_dimension(const struct CjConfig *config, size_t *out);

// Evolves every case of `config` in memory.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum CjStatus cj_simulate(const struct CjConfig *config,
                          enum CjMethod method,
                          struct CjSimulation **out);

// # Safety
// `sim` must come from `cj_simulate` and not be freed twice; null is ignored.
void cj_simulation_free(struct CjSimulation *sim);

// Number of (coupling, initial state) cases.
//
// # Safety
// `sim` must be a live handle or null (returns 0).
size_t cj_simulation_case_count(const struct CjSimulation *sim);

// Label of case `index`, owned by the handle; null when out of range.
//
// # Safety
// `sim` must be a live handle or null.
const char *cj_simulation_case_label(const struct CjSimulation *sim, size_t index);

// Number of methods evaluated per case.
//
// # Safety
// `sim` must be a live handle or null (returns 0).
size_t cj_simulation_method_count(const struct CjSimulation *sim);

// Copies the series of case `case` and method slot `method_index` into `rows`.
//
// `*len` receives the number of rows. With `rows` null or `capacity` too small
// nothing is copied and `BufferTooSmall` is returned (or `Ok` for a null probe).
//
// # Safety
// `sim` must be a live handle, `len` valid, and `rows` valid for `capacity` records if non-null.
enum CjStatus cj_simulation_series(const struct CjSimulation *sim,
                                   size_t case_,
                                   size_t method_index,
                                   struct CjRecord *rows,
                                   size_t capacity,
                                   size_t *len);

// Runs the configuration and writes all output files into `out_dir`.
// Returns `VerificationFailed` when a norm or cross-method tolerance is exceeded.
//
// # Safety
// `config` must be a live handle and `out_dir` a NUL-terminated string.
enum CjStatus cj_run(const struct CjConfig *config, const char *out_dir);

// Runs the invariant suite; `config` may be null for the built-in default.
// `*failed` receives the number of failing checks.
//
// # Safety
// `config` must be a live handle or null; `failed` must be valid.
enum CjStatus cj_verify(const struct CjConfig *config, size_t *failed);

// `cos(2 g0 √(n+1) t)`.
double cj_jc_baseline_inversion(size_t n, double g0, double t);

// Scaled → SI (`to_physical != 0`) or SI → scaled, with the default unit system.
//
// # Safety
// `out` must be a valid pointer.
enum CjStatus cj_convert_units(double value,
                               enum CjQuantity quantity,
                               int32_t to_physical,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLDJC_H */
