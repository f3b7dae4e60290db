#ifndef CYCLEMIMO_H
#define CYCLEMIMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes shared by all functions.
 */
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_NULL_POINTER = 1,
  CM_STATUS_INVALID_ARGUMENT = 2,
  CM_STATUS_CONFIG = 3,
  CM_STATUS_DIMENSION = 4,
  CM_STATUS_INSUFFICIENT_DATA = 5,
  CM_STATUS_NUMERIC = 6,
  CM_STATUS_IO = 7,
  CM_STATUS_OUT_OF_RANGE = 8,
  CM_STATUS_PANIC = 99,
} CmStatus;

/**
 * Detector identifiers used in [`CmRecord`].
 */
typedef enum CmDetector {
  CM_DETECTOR_LMMSE = 0,
  CM_DETECTOR_DNN = 1,
  CM_DETECTOR_CYCLE_DNN = 2,
  CM_DETECTOR_CYCLE_GAN = 3,
} CmDetector;

/**
 * Opaque experiment configuration.
 */
typedef struct CmConfig CmConfig;

/**
 * Opaque list of results rows.
 */
typedef struct CmResults CmResults;

/**
 * One results row.
 */
typedef struct CmRecord {
  double ebn0_db;
  uint64_t block_index;
  enum CmDetector detector;
  double ber;
  double achievable_rate_bits_per_use;
  uint64_t epochs_run;
  bool used_previous_pilots;
  uint64_t pseudo_label_refreshes;
  double wallclock_s;
  uint64_t seed;
} CmRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *cm_last_error_message(void);

/**
 * New config from a profile: 0 = paper, 1 = smoke.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CmStatus cm_config_new(uint32_t profile, struct CmConfig **out);

/**
 * Parses TOML config text. The result is validated.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` as in [`cm_config_new`].
 */
enum CmStatus cm_config_from_toml(const char *text, struct CmConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is a no-op.
 */
void cm_config_free(struct CmConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum CmStatus cm_config_set_seed(struct CmConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum CmStatus cm_config_set_blocks(struct CmConfig *cfg, uint64_t blocks);

/**
 * Sets the pilot count and gives the rest of the block to the payload.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum CmStatus cm_config_set_pilots(struct CmConfig *cfg, uint64_t pilots);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum CmStatus cm_config_set_pa(struct CmConfig *cfg, bool enabled);

/**
 * # Safety
 * `cfg` must be a live handle and `values` must point to `len` doubles.
 */
enum CmStatus cm_config_set_ebn0(struct CmConfig *cfg, const double *values, size_t len);

/**
 * Comma-separated detector names, e.g. `"lmmse,cyclegan"`.
 *
 * # Safety
 * `cfg` must be a live handle and `list` a NUL-terminated string.
 */
enum CmStatus cm_config_set_detectors(struct CmConfig *cfg, const char *list);

/**
 * Checks the config without running anything.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum CmStatus cm_config_validate(const struct CmConfig *cfg);

/**
 * Runs the full sweep. Blocks until done.
 *
 * # Safety
 * `cfg` must be a live handle; `out` as in [`cm_config_new`].
 */
enum CmStatus cm_run(const struct CmConfig *cfg, struct CmResults **out);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t cm_results_len(const struct CmResults *res);

/**
 * # Safety
 * `res` must be a live handle and `out` writable.
 */
enum CmStatus cm_results_get(const struct CmResults *res, size_t index, struct CmRecord *out);

/**
 * Writes the rows as the harness CSV.
 *
 * # Safety
 * `res` must be a live handle and `path` a NUL-terminated string.
 */
enum CmStatus cm_results_write_csv(const struct CmResults *res, const char *path);

/**
 * # Safety
 * `res` must come from [`cm_run`] and not be used afterwards. Null is a no-op.
 */
void cm_results_free(struct CmResults *res);

/**
 * Fraction of differing bytes between two bit arrays of length `len`.
 *
 * # Safety
 * `detected` and `truth` must point to `len` bytes; `out` must be writable.
 */
enum CmStatus cm_ber(const uint8_t *detected, const uint8_t *truth, size_t len, double *out);

/**
 * Hard-decision rate in bits per channel use.
 *
 * # Safety
 * `out` must be writable.
 */
enum CmStatus cm_achievable_rate(double ber,
                                 uint32_t bits_per_symbol,
                                 uint32_t streams,
                                 double payload_fraction,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYCLEMIMO_H */
