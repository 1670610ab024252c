#ifndef FRAMELET_H
#define FRAMELET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which stored field an accessor reads.
typedef enum FrameletFieldKind {
  // Scaling function in canonical coordinates.
  FRAMELET_FIELD_KIND_PHI = 0,
  // Wavelet for the canonical matrix.
  FRAMELET_FIELD_KIND_PSI_C = 1,
  // Wavelet for the caller's matrix.
  FRAMELET_FIELD_KIND_PSI = 2,
} FrameletFieldKind;

// Result of every fallible call.
typedef enum FrameletStatus {
  FRAMELET_STATUS_OK = 0,
  FRAMELET_STATUS_INVALID_ARGUMENT = 1,
  FRAMELET_STATUS_NOT_REDUCIBLE = 2,
  FRAMELET_STATUS_SOLVER_FAILED = 3,
  FRAMELET_STATUS_IO = 4,
  FRAMELET_STATUS_FORMAT = 5,
  FRAMELET_STATUS_NULL_POINTER = 6,
  FRAMELET_STATUS_PANIC = 7,
} FrameletStatus;

// A validated low-pass filter bound to its canonical form.
typedef struct FrameletFilter FrameletFilter;

// A built or loaded wavelet system.
typedef struct FrameletSystem FrameletSystem;

// Options for [`framelet_system_build`]; start from
// [`framelet_build_params_default`].
typedef struct FrameletBuildParams {
  int64_t n0;
  uint64_t seed;
  uint32_t random_starts;
  // Depth of the truncated product.
  uint32_t depth;
  // Frequency samples per axis.
  uint32_t grid_n;
  // Frequency box half-width in multiples of π.
  double extent_pi;
} FrameletBuildParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *framelet_version(void);

// Copies the last error message of this thread into `buf` (truncated and
// NUL-terminated when `len` is too small) and returns its full length in
// bytes, without the terminator. Returns 0 when no error was recorded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t framelet_last_error_message(char *buf, size_t len);

// Finds `S` with `S·A0·S⁻¹` canonical. `s_out` and `canonical_out` take
// four entries each; any output pointer may be null.
//
// # Safety
// `a0` must point to four readable values, outputs to writable storage.
enum FrameletStatus framelet_reduce(const int64_t *a0,
                                    int64_t *s_out,
                                    int64_t *canonical_out,
                                    uint8_t *index_out);

// The Haar pair `h_0 = h_ℓ = 1/√2` for canonical form `index` (1 to 6).
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum FrameletStatus framelet_filter_haar(uint8_t index, int64_t n0, struct FrameletFilter **out);

// Solves the filter equations for the canonical form of `matrix`.
//
// # Safety
// `matrix` must point to four values and `out` to a handle slot.
enum FrameletStatus framelet_filter_solve(const int64_t *matrix,
                                          int64_t n0,
                                          uint64_t seed,
                                          uint32_t random_starts,
                                          struct FrameletFilter **out);

// Reads a filter JSON file; its matrix must be one of the canonical forms.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a handle slot.
enum FrameletStatus framelet_filter_load(const char *path, struct FrameletFilter **out);

// # Safety
// `filter` must be a live handle and `path` a NUL-terminated string.
enum FrameletStatus framelet_filter_save(const struct FrameletFilter *filter, const char *path);

// Largest absolute residual of the filter equations.
//
// # Safety
// `filter` must be a live handle and `out` writable.
enum FrameletStatus framelet_filter_residual(const struct FrameletFilter *filter, double *out);

// `m₀(t1, t2)`.
//
// # Safety
// `filter` must be a live handle; `re` and `im` writable.
enum FrameletStatus framelet_filter_eval(const struct FrameletFilter *filter,
                                         double t1,
                                         double t2,
                                         double *re,
                                         double *im);

// # Safety
// `filter` must be null or a handle not yet freed.
void framelet_filter_free(struct FrameletFilter *filter);

struct FrameletBuildParams framelet_build_params_default(void);

// Runs the pipeline for `a0`. With a non-null `filter` the solver is
// skipped; a null `params` means defaults.
//
// # Safety
// `a0` must point to four values; `filter` and `params` must be null or
// valid; `out` must be a handle slot.
enum FrameletStatus framelet_system_build(const int64_t *a0,
                                          const struct FrameletFilter *filter,
                                          const struct FrameletBuildParams *params,
                                          struct FrameletSystem **out);

// Reads a system directory written by [`framelet_system_save`] or the CLI.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a handle slot.
enum FrameletStatus framelet_system_load(const char *dir, struct FrameletSystem **out);

// # Safety
// `system` must be a live handle and `dir` a NUL-terminated string.
enum FrameletStatus framelet_system_save(const struct FrameletSystem *system, const char *dir);

// The conjugating matrix `S` and the canonical matrix, four entries each.
//
// # Safety
// `system` must be a live handle; outputs null or writable.
enum FrameletStatus framelet_system_matrices(const struct FrameletSystem *system,
                                             int64_t *s_out,
                                             int64_t *canonical_out);

// Grid of a stored field: `nx × ny` samples from `origin` with spacing `step`.
//
// # Safety
// `system` must be a live handle; `origin` takes two values; all outputs writable.
enum FrameletStatus framelet_system_field_info(const struct FrameletSystem *system,
                                               enum FrameletFieldKind kind,
                                               size_t *nx,
                                               size_t *ny,
                                               double *origin,
                                               double *step);

// Copies samples in row-major order (`x` fastest). `len` must equal
// `nx·ny`; `im` may be null.
//
// # Safety
// `re` (and `im` when non-null) must hold `len` writable values.
enum FrameletStatus framelet_system_field_values(const struct FrameletSystem *system,
                                                 enum FrameletFieldKind kind,
                                                 double *re,
                                                 double *im,
                                                 size_t len);

// Bilinear value of a stored field at `(x, y)`; zero outside its box.
//
// # Safety
// `system` must be a live handle; `re` and `im` writable.
enum FrameletStatus framelet_system_eval(const struct FrameletSystem *system,
                                         enum FrameletFieldKind kind,
                                         double x,
                                         double y,
                                         double *re,
                                         double *im);

// Runs the numerical checks and returns the report as JSON. The string
// must be released with [`framelet_string_free`]. `all_pass` may be null.
//
// # Safety
// `system` must be a live handle; `json_out` a string slot.
enum FrameletStatus framelet_system_verify(const struct FrameletSystem *system,
                                           int32_t level_lo,
                                           int32_t level_hi,
                                           uint32_t grid,
                                           char **json_out,
                                           bool *all_pass);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void framelet_string_free(char *s);

// # Safety
// `system` must be null or a handle not yet freed.
void framelet_system_free(struct FrameletSystem *system);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAMELET_H */
