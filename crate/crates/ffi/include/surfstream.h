#ifndef SURFSTREAM_H
#define SURFSTREAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_NOT_CONVERGED = 3,
  SS_STATUS_GEOMETRY = 4,
  SS_STATUS_IO = 5,
  SS_STATUS_BUFFER_TOO_SMALL = 6,
  SS_STATUS_INTERNAL = 7,
  SS_STATUS_PANIC = 8,
} SsStatus;

typedef enum {
  SS_SURFACE_ELLIPSOID = 0,
  SS_SURFACE_SPHERE = 1,
} SsSurface;

typedef enum {
  SS_DATA_SMOOTH = 0,
  SS_DATA_ROTATION = 1,
} SsData;

typedef enum {
  SS_VARIANT_STREAM_TILDE = 0,
  SS_VARIANT_STREAM_CE = 1,
  SS_VARIANT_VEL_PIOLA = 2,
  SS_VARIANT_VEL_CE = 3,
} SsVariant;

/**
 * Opaque convergence report.
 */
typedef struct SsReport SsReport;

/**
 * Opaque study configuration.
 */
typedef struct SsStudyConfig SsStudyConfig;

/**
 * One row of a convergence table. Unselected error variants are NaN.
 */
typedef struct {
  uint32_t level;
  double h;
  uint64_t ndof;
  double err_stream_tilde;
  double err_stream_ce;
  double err_vel_piola;
  double err_vel_ce;
  uint64_t iterations;
} SsRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ss_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ss_last_error_message(void);

/**
 * New configuration with the default study (ellipsoid, k = 2, k_g = 2,
 * levels 1..4).
 */
SsStudyConfig *ss_study_config_new(void);

/**
 * # Safety
 * `config` must come from [`ss_study_config_new`] and not be used afterwards.
 */
void ss_study_config_free(SsStudyConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
SsStatus ss_study_config_set_problem(SsStudyConfig *config, SsSurface surf, SsData data);

/**
 * # Safety
 * `config` must be a live handle.
 */
SsStatus ss_study_config_set_degrees(SsStudyConfig *config, uint32_t k, uint32_t kg);

/**
 * # Safety
 * `config` must be a live handle and `levels` must point to `len` values.
 */
SsStatus ss_study_config_set_levels(SsStudyConfig *config, const uint32_t *levels, size_t len);

/**
 * Penalty parameter; a non-positive or NaN value restores the default 10k².
 *
 * # Safety
 * `config` must be a live handle.
 */
SsStatus ss_study_config_set_sigma(SsStudyConfig *config, double sigma);

/**
 * # Safety
 * `config` must be a live handle.
 */
SsStatus ss_study_config_set_solver(SsStudyConfig *config, double rel_tol, uint64_t max_iter);

/**
 * Validate `config`, run every level and store a new report in `*out`.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
SsStatus ss_study_run(const SsStudyConfig *config, SsReport **out);

/**
 * # Safety
 * `report` must come from [`ss_study_run`] and not be used afterwards.
 */
void ss_report_free(SsReport *report);

/**
 * Number of levels in the report; 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t ss_report_len(const SsReport *report);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
SsStatus ss_report_record(const SsReport *report, size_t index, SsRecord *out);

/**
 * Observed order between levels `index` and `index + 1`; NaN when undefined.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
SsStatus ss_report_rate(const SsReport *report, SsVariant v, size_t index, double *out);

/**
 * Write the CSV table into `buf`. Pass a null `buf` to query the size.
 *
 * # Safety
 * `report` must be a live handle; `buf` must be null or hold `cap` bytes;
 * `needed` must be null or valid.
 */
SsStatus ss_report_csv(const SsReport *report, char *buf, size_t cap, size_t *needed);

/**
 * Run the verification suites and write the JSON summary into `buf`.
 * `*passed` is set to 1 when every suite passes, else 0. A non-positive
 * `sigma` selects the default penalty.
 *
 * # Safety
 * `passed` must be valid; `buf` must be null or hold `cap` bytes; `needed`
 * must be null or valid.
 */
SsStatus ss_verify(SsSurface surf,
                   uint32_t level,
                   uint32_t k,
                   uint32_t kg,
                   double sigma,
                   bool flip_penalty_sign,
                   int32_t *passed,
                   char *buf,
                   size_t cap,
                   size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFSTREAM_H */
