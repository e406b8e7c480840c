#ifndef OBSTAKL_H
#define OBSTAKL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ObstaklStatus {
  OBSTAKL_STATUS_OK = 0,
  OBSTAKL_STATUS_NULL_POINTER = 1,
  OBSTAKL_STATUS_INVALID_ARGUMENT = 2,
  OBSTAKL_STATUS_CONFIG = 3,
  OBSTAKL_STATUS_SOLVER = 4,
  OBSTAKL_STATUS_ANALYSIS = 5,
  OBSTAKL_STATUS_IO = 6,
  OBSTAKL_STATUS_BUFFER_TOO_SMALL = 7,
  OBSTAKL_STATUS_PANIC = 8,
} ObstaklStatus;

// A validated run configuration.
typedef struct ObstaklConfig ObstaklConfig;

// A solved (or loaded) discrete solution on one refinement level.
typedef struct ObstaklSolution ObstaklSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a JSON config. Relative paths inside it resolve against the working directory.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum ObstaklStatus obstakl_config_from_json(const char *json, struct ObstaklConfig **out);

// Reads a JSON config file. Relative paths inside it resolve against its directory.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ObstaklStatus obstakl_config_from_file(const char *path, struct ObstaklConfig **out);

// Loads a built-in preset by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum ObstaklStatus obstakl_config_from_preset(const char *name, struct ObstaklConfig **out);

// # Safety
// `cfg` must come from one of the `obstakl_config_from_*` calls, or be null.
void obstakl_config_free(struct ObstaklConfig *cfg);

// Solves the configured problem on refinement level `level`.
//
// # Safety
// `cfg` must be a live config handle and `out` a valid pointer.
enum ObstaklStatus obstakl_solve(const struct ObstaklConfig *cfg,
                                 size_t level,
                                 struct ObstaklSolution **out);

// # Safety
// `sol` must come from [`obstakl_solve`], or be null.
void obstakl_solution_free(struct ObstaklSolution *sol);

// Node count, spacing and dimension of the solution grid. Any output may be null.
//
// # Safety
// `sol` must be a live solution handle.
enum ObstaklStatus obstakl_solution_shape(const struct ObstaklSolution *sol,
                                          size_t *nodes,
                                          double *h,
                                          size_t *dim);

// Copies nodal values (x fastest) into `buf`, which must hold at least `len` doubles.
//
// # Safety
// `sol` must be a live solution handle and `buf` valid for `len` writes.
enum ObstaklStatus obstakl_solution_values(const struct ObstaklSolution *sol,
                                           double *buf,
                                           size_t len);

// Final solver residual and sup-norm error against the exact solution
// (NaN when the problem has none). Either output may be null.
//
// # Safety
// `sol` must be a live solution handle.
enum ObstaklStatus obstakl_solution_errors(const struct ObstaklSolution *sol,
                                           double *residual,
                                           double *error_inf);

// Runs the configured analyses and returns the report as a JSON string,
// to be released with [`obstakl_string_free`]. Fails with
// `OBSTAKL_STATUS_ANALYSIS` only when every analysis failed; the report is
// still returned in that case.
//
// # Safety
// `cfg` and `sol` must be live handles and `out` a valid pointer.
enum ObstaklStatus obstakl_analyze(const struct ObstaklConfig *cfg,
                                   const struct ObstaklSolution *sol,
                                   char **out);

// # Safety
// `s` must come from this library, or be null.
void obstakl_string_free(char *s);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *obstakl_last_error(void);

// Library version as a static NUL-terminated string.
const char *obstakl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OBSTAKL_H */
