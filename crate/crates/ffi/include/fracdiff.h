#ifndef FRACDIFF_H
#define FRACDIFF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared by every function.
 */
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = 1,
  FD_STATUS_INVALID_ARGUMENT = 2,
  FD_STATUS_CONFIG = 3,
  FD_STATUS_NON_CONTRACTION = 4,
  FD_STATUS_NUMERICAL = 5,
  FD_STATUS_IO = 6,
  FD_STATUS_BUFFER_TOO_SMALL = 7,
  FD_STATUS_PANIC = 8,
} FdStatus;

/**
 * A configured problem: discretized operator, eigenbasis and time grid.
 */
typedef struct FdModel FdModel;

/**
 * A mild solution on the model's time grid.
 */
typedef struct FdSolution FdSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fd_last_error(char *buf, size_t len);

/**
 * `E_{α,β}(z)` for complex `z = re + i im`.
 *
 * # Safety
 * `out_re` and `out_im` must be valid for writes.
 */
enum FdStatus fd_ml_eval(double alpha,
                         double beta,
                         double re,
                         double im,
                         double *out_re,
                         double *out_im);

/**
 * Build a model from a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum FdStatus fd_model_from_file(const char *path, struct FdModel **out);

/**
 * Build a model from configuration text in the same format as the files.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` valid for writes.
 */
enum FdStatus fd_model_from_str(const char *config, struct FdModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `fd_model_from_*` not yet freed.
 */
void fd_model_free(struct FdModel *model);

/**
 * Number of retained modes.
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t fd_model_modes(const struct FdModel *model);

/**
 * Number of spatial nodes (intervals plus one).
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t fd_model_nodes(const struct FdModel *model);

/**
 * The first `fd_model_modes` eigenvalues in increasing order.
 *
 * # Safety
 * `model` must be a live handle and `out` point to `len` doubles.
 */
enum FdStatus fd_model_eigenvalues(const struct FdModel *model, double *out, size_t len);

/**
 * Mode coefficients at time `t` by Laplace inversion (constant `q` only).
 *
 * # Safety
 * `model` must be a live handle and `out` point to `len` doubles.
 */
enum FdStatus fd_laplace_coeffs(const struct FdModel *model, double t, double *out, size_t len);

/**
 * Run the windowed Picard solver with the options of the configuration.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum FdStatus fd_solve(const struct FdModel *model, struct FdSolution **out);

/**
 * # Safety
 * `sol` must be null or a handle from `fd_solve` not yet freed.
 */
void fd_solution_free(struct FdSolution *sol);

/**
 * Number of time nodes, including `t = 0`.
 *
 * # Safety
 * `sol` must be a live handle.
 */
size_t fd_solution_times_len(const struct FdSolution *sol);

/**
 * # Safety
 * `sol` must be a live handle and `out` point to `len` doubles.
 */
enum FdStatus fd_solution_times(const struct FdSolution *sol, double *out, size_t len);

/**
 * Mode coefficients at time node `k`.
 *
 * # Safety
 * `sol` must be a live handle and `out` point to `len` doubles.
 */
enum FdStatus fd_solution_coeffs(const struct FdSolution *sol, size_t k, double *out, size_t len);

/**
 * `u(x_j, t_k)` at the spatial nodes.
 *
 * # Safety
 * `sol` must be a live handle and `out` point to `len` doubles.
 */
enum FdStatus fd_solution_field(const struct FdSolution *sol, size_t k, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACDIFF_H */
