#ifndef RWA_CONTROL_H
#define RWA_CONTROL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RwaStatus {
  RWA_STATUS_OK = 0,
  RWA_STATUS_NULL_POINTER = 1,
  RWA_STATUS_INVALID_ARGUMENT = 2,
  RWA_STATUS_INVALID_SYSTEM = 3,
  /**
   * The coupling graph is cyclic or disconnected.
   */
  RWA_STATUS_GRAPH_NOT_TREE = 4,
  /**
   * Drive assignment or residual failure.
   */
  RWA_STATUS_INVALID_DRIVES = 5,
  RWA_STATUS_UNREACHABLE = 6,
  /**
   * Integrator or optimizer failure.
   */
  RWA_STATUS_NUMERICAL = 7,
  RWA_STATUS_IO = 8,
  RWA_STATUS_BUFFER_TOO_SMALL = 9,
  RWA_STATUS_PANIC = 10,
} RwaStatus;

/**
 * An optimized transfer together with its problem.
 */
typedef struct RwaSolution RwaSolution;

/**
 * A level system with optional drive fields.
 */
typedef struct RwaSystem RwaSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *rwa_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rwa_string_free(char *s);

/**
 * Creates a system from `n` energies and `m` couplings `(k[i], j[i], re[i] + i im[i])`.
 *
 * # Safety
 * Array arguments must hold the stated number of elements.
 */
enum RwaStatus rwa_system_new(size_t n,
                              const double *energies,
                              size_t m,
                              const size_t *k,
                              const size_t *j,
                              const double *re,
                              const double *im,
                              struct RwaSystem **out);

/**
 * Creates a system from the JSON system format (drives optional).
 *
 * # Safety
 * `text` must be a nul-terminated string.
 */
enum RwaStatus rwa_system_from_json(const char *text, struct RwaSystem **out);

/**
 * # Safety
 * `sys` must be null or a live handle from this library.
 */
void rwa_system_free(struct RwaSystem *sys);

/**
 * Number of levels, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t rwa_system_dim(const struct RwaSystem *sys);

/**
 * Sets `f` drive fields, each matched to its resonant transition.
 *
 * # Safety
 * Arrays must hold `f` elements; `sys` must be a live handle.
 */
enum RwaStatus rwa_system_set_drives(struct RwaSystem *sys,
                                     size_t f,
                                     const double *re,
                                     const double *im,
                                     const double *omega);

/**
 * Sets one zero-amplitude field per coupled edge at `transition - detuning`.
 *
 * # Safety
 * `sys` must be a live handle.
 */
enum RwaStatus rwa_system_set_detuned_drives(struct RwaSystem *sys, double detuning);

/**
 * Writes the structural and RWA report as a JSON string.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum RwaStatus rwa_system_analyze(const struct RwaSystem *sys, char **out);

/**
 * Writes the rotating-frame weights (root level 0 at zero) into `gamma[0..dim]`.
 * Without drives, all detunings are taken as zero.
 *
 * # Safety
 * `gamma` must hold `len` elements.
 */
enum RwaStatus rwa_system_gamma(const struct RwaSystem *sys, double *gamma, size_t len);

/**
 * Drive magnitude, phase and duration for a two-level target with polar
 * angle `theta` and relative phase `phi`, at Rabi magnitude `amplitude`.
 *
 * # Safety
 * Output pointers must be writable.
 */
enum RwaStatus rwa_two_level_solve(double theta,
                                   double phi,
                                   double amplitude,
                                   double detuning,
                                   double *out_amplitude,
                                   double *out_phase,
                                   double *out_duration);

/**
 * Interaction-frame amplitudes of a star driven from its center for time `t`.
 * Writes `leaves + 1` entries, center first.
 *
 * # Safety
 * Inputs hold `leaves` entries, outputs `leaves + 1`.
 */
enum RwaStatus rwa_star_evolve(size_t leaves,
                               const double *re,
                               const double *im,
                               double detuning,
                               double t,
                               double *out_re,
                               double *out_im);

/**
 * Evolves a lab-frame state for `duration` under the full time-dependent
 * Hamiltonian of the system's drives and writes the lab-frame result.
 *
 * # Safety
 * State arrays must hold `rwa_system_dim(sys)` elements.
 */
enum RwaStatus rwa_propagate_exact(const struct RwaSystem *sys,
                                   const double *re,
                                   const double *im,
                                   double duration,
                                   double tol,
                                   double *out_re,
                                   double *out_im);

/**
 * Converts a lab-frame state at time `t` to the interaction frame.
 *
 * # Safety
 * State arrays must hold `rwa_system_dim(sys)` elements.
 */
enum RwaStatus rwa_to_interaction_frame(const struct RwaSystem *sys,
                                        const double *re,
                                        const double *im,
                                        double t,
                                        double *out_re,
                                        double *out_im);

/**
 * Optimizes the system's drives to take the lowest level to `goal`.
 * A non-positive `cap` selects the default magnitude bound.
 *
 * # Safety
 * Goal arrays must hold `rwa_system_dim(sys)` elements.
 */
enum RwaStatus rwa_optimize(const struct RwaSystem *sys,
                            const double *goal_re,
                            const double *goal_im,
                            double epsilon,
                            double cap,
                            uint64_t seed,
                            struct RwaSolution **out);

/**
 * # Safety
 * `sol` must be null or a live handle from this library.
 */
void rwa_solution_free(struct RwaSolution *sol);

/**
 * Duration, RWA infidelity and field count of a solution.
 *
 * # Safety
 * Output pointers may be null to skip them.
 */
enum RwaStatus rwa_solution_summary(const struct RwaSolution *sol,
                                    double *duration,
                                    double *rwa_infidelity,
                                    size_t *fields);

/**
 * Copies drive magnitudes and phases into arrays of length `len`.
 *
 * # Safety
 * Arrays must hold `len` elements.
 */
enum RwaStatus rwa_solution_parameters(const struct RwaSolution *sol,
                                       double *amplitudes,
                                       double *phases,
                                       size_t len);

/**
 * Re-simulates the solution without the RWA and writes the infidelity.
 *
 * # Safety
 * `infidelity` must be writable.
 */
enum RwaStatus rwa_solution_double_check(struct RwaSolution *sol, double tol, double *infidelity);

/**
 * Serializes the solution and its problem in the solution file format.
 *
 * # Safety
 * `out` must be writable.
 */
enum RwaStatus rwa_solution_to_json(const struct RwaSolution *sol, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RWA_CONTROL_H */
