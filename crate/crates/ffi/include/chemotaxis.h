#ifndef CHEMOTAXIS_H
#define CHEMOTAXIS_H

#pragma once

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KsStatus {
  KS_STATUS_OK = 0,
  KS_STATUS_NULL_POINTER = 1,
  KS_STATUS_INVALID_ARGUMENT = 2,
  KS_STATUS_CONFIG_ERROR = 3,
  KS_STATUS_VALIDATION_ERROR = 4,
  KS_STATUS_BUFFER_TOO_SMALL = 5,
  KS_STATUS_RUNTIME_ERROR = 6,
  KS_STATUS_PANIC = 7,
} KsStatus;

typedef enum KsRunStatus {
  KS_RUN_STATUS_COMPLETED = 0,
  KS_RUN_STATUS_STOPPED_AT_TAU = 1,
  KS_RUN_STATUS_DIVERGED = 2,
} KsRunStatus;

typedef enum KsSeries {
  KS_SERIES_TIMES = 0,
  KS_SERIES_SUP_NORMS = 1,
  KS_SERIES_MASSES = 2,
  KS_SERIES_MIN_VALUES = 3,
} KsSeries;

/**
 * Parsed and validated run configuration.
 */
typedef struct KsConfig KsConfig;

/**
 * Nodal field on a cell-centred grid, y-major.
 */
typedef struct KsField KsField;

/**
 * Recorded trajectory.
 */
typedef struct KsRecord KsRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length of the last error message in bytes, without the terminator.
 */
size_t ks_last_error_length(void);

/**
 * Copies the last error message as a NUL-terminated string.
 */
enum KsStatus ks_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ks_version(void);

/**
 * Parses TOML configuration text and runs every applicable validator.
 */
enum KsStatus ks_config_from_toml(const char *text, struct KsConfig **out);

void ks_config_free(struct KsConfig *cfg);

/**
 * Runs path `path` of master seed `seed` with the configured integrator.
 */
enum KsStatus ks_simulate(const struct KsConfig *cfg,
                          uint64_t seed,
                          uint64_t path,
                          struct KsRecord **out);

void ks_record_free(struct KsRecord *rec);

enum KsStatus ks_record_status(const struct KsRecord *rec, enum KsRunStatus *status);

/**
 * Copies one recorded time series.
 */
enum KsStatus ks_record_series(const struct KsRecord *rec,
                               enum KsSeries which,
                               double *buf,
                               size_t cap,
                               size_t *len_out);

/**
 * Copies the last field of the record into a new handle.
 */
enum KsStatus ks_record_final_field(const struct KsRecord *rec, struct KsField **out);

/**
 * Field on `[0, lx] x [0, ly]` from `nx * ny` values, `values[j * nx + i]`.
 */
enum KsStatus ks_field_new(size_t nx,
                           size_t ny,
                           double lx,
                           double ly,
                           const double *values,
                           struct KsField **out);

void ks_field_free(struct KsField *field);

enum KsStatus ks_field_dims(const struct KsField *field, size_t *nx, size_t *ny);

enum KsStatus ks_field_values(const struct KsField *field,
                              double *buf,
                              size_t cap,
                              size_t *len_out);

enum KsStatus ks_field_sup_norm(const struct KsField *field, double *out);

/**
 * `e^{-tA} u` for the Neumann Laplacian `A`.
 */
enum KsStatus ks_heat_semigroup(const struct KsField *field, double t, struct KsField **out);

/**
 * Solves `-Δv + v = u` with Neumann conditions.
 */
enum KsStatus ks_green_solve(const struct KsField *field, struct KsField **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEMOTAXIS_H */
