#ifndef HOTR_H
#define HOTR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HotrStatus {
  HOTR_STATUS_OK = 0,
  HOTR_STATUS_NULL_POINTER = 1,
  HOTR_STATUS_INVALID_INPUT = 2,
  HOTR_STATUS_NOT_CONVERGED = 3,
  HOTR_STATUS_NUMERICAL = 4,
  HOTR_STATUS_BUFFER_TOO_SMALL = 5,
  HOTR_STATUS_PANIC = 6,
  HOTR_STATUS_UNDEFINED = 7,
} HotrStatus;

// Values of the `kind` argument of [`hotr_model_new`].
typedef enum HotrModelKind {
  HOTR_MODEL_KIND_FULL = 0,
  HOTR_MODEL_KIND_RB = 1,
  HOTR_MODEL_KIND_SUB = 2,
} HotrModelKind;

// Values of the `method` argument of [`hotr_model_transmissibility`].
typedef enum HotrMethod {
  HOTR_METHOD_NONLINEAR = 0,
  HOTR_METHOD_SURROGATE = 1,
} HotrMethod;

// Surrogate forward model and search space for crack identification.
typedef struct HotrIdentifier HotrIdentifier;

// A cracked (or healthy) beam model.
typedef struct HotrModel HotrModel;

typedef struct HotrIdentification {
  size_t location_index;
  uint32_t depth_percent;
  // Objective at the best candidate, percent.
  double j;
  size_t generations;
  size_t evaluations;
  bool reached_threshold;
} HotrIdentification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, NUL-terminated, static.
const char *hotr_version(void);

// Copy the calling thread's last error message (NUL-terminated) into
// `buf`. `written` receives the length including the terminator.
//
// # Safety
// `buf` is valid for `cap` bytes unless `cap` is zero; `written` is valid.
enum HotrStatus hotr_last_error_message(char *buf, size_t cap, size_t *written);

// Build a model from a JSON configuration (null for defaults). The crack
// is the configured one.
//
// # Safety
// `config_json` is null or NUL-terminated; `out` is valid.
enum HotrStatus hotr_model_new(const char *config_json, int32_t kind, struct HotrModel **out);

// # Safety
// `model` is null or a handle from [`hotr_model_new`] not yet freed.
void hotr_model_free(struct HotrModel *model);

// Coordinate, gauge and contact-pair counts.
//
// # Safety
// `model` is a live handle; the output pointers are valid.
enum HotrStatus hotr_model_size(const struct HotrModel *model,
                                size_t *dofs,
                                size_t *sensors,
                                size_t *contact_pairs);

// Lowest `count` natural frequencies in Hz, crack held closed.
//
// # Safety
// `model` is a live handle; `buf` is valid for `cap` values; `written` is
// valid.
enum HotrStatus hotr_model_eigenfrequencies(const struct HotrModel *model,
                                            size_t count,
                                            double *buf,
                                            size_t cap,
                                            size_t *written);

// Harmonic-balance gauge strains at `freq_hz` with the configured AFT
// settings. Layout: gauge-major, orders 0..=h, interleaved (re, im).
//
// # Safety
// `model` is a live handle; `buf` is valid for `cap` values; `written` is
// valid.
enum HotrStatus hotr_model_solve_hbm(const struct HotrModel *model,
                                     double freq_hz,
                                     double *buf,
                                     size_t cap,
                                     size_t *written);

// Order-`order` transmissibility over the gauge pairs (m, n), m < n, in
// lexicographic order, interleaved (re, im).
//
// # Safety
// `model` is a live handle; `buf` is valid for `cap` values; `written` is
// valid.
enum HotrStatus hotr_model_transmissibility(const struct HotrModel *model,
                                            double freq_hz,
                                            size_t order,
                                            int32_t method,
                                            double *buf,
                                            size_t cap,
                                            size_t *written);

// Build the substructured forward model at the configured measurement
// frequency and the configured search space.
//
// # Safety
// `config_json` is null or NUL-terminated; `out` is valid.
enum HotrStatus hotr_identifier_new(const char *config_json, struct HotrIdentifier **out);

// # Safety
// `ident` is null or a handle from [`hotr_identifier_new`] not yet freed.
void hotr_identifier_free(struct HotrIdentifier *ident);

// Number of (re, im) values a measurement holds: one per ordered gauge
// pair (m, n), m ≠ n, lexicographic.
//
// # Safety
// `ident` is a live handle; `len` is valid.
enum HotrStatus hotr_identifier_measurement_len(const struct HotrIdentifier *ident, size_t *len);

// Second-order transmissibility of a hypothetical crack from the
// surrogate, in the measurement layout.
//
// # Safety
// `ident` is a live handle; `buf` is valid for `cap` values; `written` is
// valid.
enum HotrStatus hotr_identifier_simulate(const struct HotrIdentifier *ident,
                                         size_t location_index,
                                         uint32_t depth_percent,
                                         double *buf,
                                         size_t cap,
                                         size_t *written);

// Run the genetic search against a measured transmissibility set.
//
// # Safety
// `ident` is a live handle; `measured` is valid for `len` values; `out`
// is valid.
enum HotrStatus hotr_identifier_run(const struct HotrIdentifier *ident,
                                    const double *measured,
                                    size_t len,
                                    uint64_t seed,
                                    struct HotrIdentification *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOTR_H */
