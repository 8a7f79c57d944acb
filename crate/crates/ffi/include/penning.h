#ifndef PENNING_H
#define PENNING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PENNING_STATUS_OK = 0,
  PENNING_STATUS_NULL_POINTER = 1,
  PENNING_STATUS_INVALID_ARGUMENT = 2,
  PENNING_STATUS_NUMERICAL = 3,
  /**
   * The output buffer is too small; the required length was written where available.
   */
  PENNING_STATUS_BUFFER_TOO_SMALL = 4,
  PENNING_STATUS_PANIC = 5,
} PenningStatus;

/**
 * Opaque relaxed crystal together with the trap that produced it.
 */
typedef struct PenningCrystal PenningCrystal;

/**
 * Trap parameters. Frequencies are in units of omega_z except `omega_z_hz`.
 */
typedef struct {
  size_t n_ions;
  double omega_z_hz;
  double omega_c;
  double omega_wall;
  /**
   * +1 or -1.
   */
  double wall_sign;
  /**
   * Effective in-plane frequency; used when `omega_rot` <= 0.
   */
  double omega_eff;
  /**
   * Rotating-wall frequency; takes precedence when > 0.
   */
  double omega_rot;
} PenningTrapParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *penning_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *penning_last_error(void);

/**
 * Beryllium defaults (795 kHz axial, omega_c = 9.645 omega_z).
 */
PenningTrapParams penning_trap_default(size_t n_ions, double omega_wall, double omega_eff);

/**
 * # Safety
 * `out` must be valid for one write.
 */
PenningStatus penning_deconfinement_frequency(double omega_c, double omega_wall, double *out);

/**
 * Seed and relax a crystal. `tol <= 0` selects the default threshold.
 * On success `*out` owns a handle to release with [`penning_crystal_free`].
 *
 * # Safety
 * `params` must point to a valid struct and `out` must be valid for one write.
 */
PenningStatus penning_crystal_solve(const PenningTrapParams *params,
                                    double tol,
                                    PenningCrystal **out);

/**
 * # Safety
 * `crystal` must be NULL or a handle from [`penning_crystal_solve`] not yet freed.
 */
void penning_crystal_free(PenningCrystal *crystal);

/**
 * Number of ions, 0 for NULL.
 *
 * # Safety
 * `crystal` must be NULL or a live handle.
 */
size_t penning_crystal_len(const PenningCrystal *crystal);

/**
 * Rotating-frame potential energy [m omega_z^2 l0^2].
 *
 * # Safety
 * `crystal` must be a live handle and `out` valid for one write.
 */
PenningStatus penning_crystal_energy(const PenningCrystal *crystal, double *out);

/**
 * Interleaved positions x0, y0, x1, ... in l0; needs 2 N elements.
 *
 * # Safety
 * `crystal` must be a live handle; `out` must hold `cap` doubles; `len_out` may be NULL.
 */
PenningStatus penning_crystal_positions(const PenningCrystal *crystal,
                                        double *out,
                                        size_t cap,
                                        size_t *len_out);

/**
 * Axial frequencies [omega_z], ascending by eigenvalue; imaginary modes are
 * written as negative values. Needs N elements.
 *
 * # Safety
 * As for [`penning_crystal_positions`].
 */
PenningStatus penning_axial_frequencies(const PenningCrystal *crystal,
                                        double *out,
                                        size_t cap,
                                        size_t *len_out);

/**
 * Planar frequencies [omega_z], ascending; the first N form the lower
 * branch. Needs 2 N elements.
 *
 * # Safety
 * As for [`penning_crystal_positions`].
 */
PenningStatus penning_planar_frequencies(const PenningCrystal *crystal,
                                         double *out,
                                         size_t cap,
                                         size_t *len_out);

/**
 * Axial Ising couplings for beatnote `mu` [omega_z], row-major N x N in
 * units of F^2 / (4 m omega_z^2). Needs N * N elements.
 *
 * # Safety
 * As for [`penning_crystal_positions`].
 */
PenningStatus penning_axial_couplings(const PenningCrystal *crystal,
                                      double mu,
                                      double *out,
                                      size_t cap,
                                      size_t *len_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENNING_H */
