#ifndef MUSKAT_H
#define MUSKAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MuskatStatus {
  MUSKAT_STATUS_OK = 0,
  MUSKAT_STATUS_NULL_POINTER = 1,
  MUSKAT_STATUS_INVALID_ARGUMENT = 2,
  MUSKAT_STATUS_INVALID_CONFIG = 3,
  MUSKAT_STATUS_NUMERICAL = 4,
  MUSKAT_STATUS_BLOW_UP = 5,
  MUSKAT_STATUS_INFEASIBLE = 6,
  MUSKAT_STATUS_IO = 7,
  MUSKAT_STATUS_BUFFER_TOO_SMALL = 8,
  MUSKAT_STATUS_PANIC = 9,
} MuskatStatus;

// Modulus ω together with its rescaling ρ(h) = ω(Ch).
typedef struct MuskatModulus MuskatModulus;

// Sampled interface f(x, t) on a uniform grid.
typedef struct MuskatState MuskatState;

// Slope statistics of a state.
typedef struct MuskatBounds {
  double beta;
  double slope_sup;
  double lambda;
  double big_lambda;
  double sup_fx;
  double inf_fx;
} MuskatBounds;

// Margin decomposition at one ξ.
typedef struct MuskatMargin {
  double xi;
  double m;
  double t1;
  double t2;
  double t3;
  double t4;
  double t5;
  double target;
  double total_margin;
  double quad_error;
} MuskatMargin;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *muskat_last_error(void);

// Library version as a static NUL-terminated string.
const char *muskat_version(void);

// Sample a named scenario at t = 0 on the grid x_i = x0 + i·dx.
// `params_json` is a JSON object of scenario parameters, or NULL for defaults.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum MuskatStatus muskat_state_from_scenario(const char *name,
                                             const char *params_json,
                                             size_t n,
                                             double x0,
                                             double dx,
                                             int periodic,
                                             struct MuskatState **out);

// State from explicit node values. Compact states take their far-field limits
// from the end values.
//
// # Safety
// `f` must point to `n` doubles; `out` must be writable.
enum MuskatStatus muskat_state_new(const double *f,
                                   size_t n,
                                   double x0,
                                   double dx,
                                   int periodic,
                                   double t,
                                   struct MuskatState **out);

// Read a state CSV written by the `muskat` CLI.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum MuskatStatus muskat_state_read(const char *path, struct MuskatState **out);

// # Safety
// `state` must come from this library or be NULL.
void muskat_state_free(struct MuskatState *state);

// Number of nodes, or 0 for NULL.
//
// # Safety
// `state` must be a live handle or NULL.
size_t muskat_state_len(const struct MuskatState *state);

// Time of the state, NaN for NULL.
//
// # Safety
// `state` must be a live handle or NULL.
double muskat_state_time(const struct MuskatState *state);

// Copy the node values into `out[0..n]`.
//
// # Safety
// `out` must hold `len` doubles.
enum MuskatStatus muskat_state_values(const struct MuskatState *state, double *out, size_t len);

// Slope extrema, β = sup f′·(−inf f′) and the ellipticity constants.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_state_bounds(const struct MuskatState *state, struct MuskatBounds *out);

// f_t at every node with the default quadrature.
//
// # Safety
// `out` must hold `len` doubles.
enum MuskatStatus muskat_rhs(const struct MuskatState *state, double *out, size_t len);

// Evolve to `t_end` with the default RK4 stepper at the given CFL number
// (≤ 0 selects the default) and return the final state.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_simulate(const struct MuskatState *state,
                                  double t_end,
                                  double cfl,
                                  struct MuskatState **out);

// Run `muskat simulate` on a config file; `exit_code` receives the CLI exit code.
//
// # Safety
// `config_path` must be NUL-terminated; `exit_code` must be writable.
enum MuskatStatus muskat_simulate_config(const char *config_path, int *exit_code);

// Run `muskat certify-modulus` on a config file; `exit_code` receives the CLI exit code.
//
// # Safety
// `config_path` must be NUL-terminated; `exit_code` must be writable.
enum MuskatStatus muskat_certify_config(const char *config_path, int *exit_code);

// Search (δ, γ) for the Kiselev modulus. Returns `Infeasible` when no pair passes;
// the reason is in the last error.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_modulus_search(double a,
                                        double lambda,
                                        double big_lambda,
                                        double slope_sup,
                                        struct MuskatModulus **out);

// Kiselev modulus with fixed δ and γ.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_modulus_new(double delta,
                                     double gamma,
                                     double a,
                                     double lambda,
                                     double big_lambda,
                                     double slope_sup,
                                     struct MuskatModulus **out);

// # Safety
// `m` must come from this library or be NULL.
void muskat_modulus_free(struct MuskatModulus *m);

// δ, γ and the rescaling constant C (infinite in the extreme regime).
// Any output pointer may be NULL.
//
// # Safety
// Non-null outputs must be writable.
enum MuskatStatus muskat_modulus_params(const struct MuskatModulus *m,
                                        double *delta,
                                        double *gamma,
                                        double *c);

// Name of the constraint that bounds γ, empty for fixed moduli. Owned by the
// handle.
//
// # Safety
// `m` must be a live handle. The returned pointer is valid until `m` is freed.
enum MuskatStatus muskat_modulus_binding(const struct MuskatModulus *m, const char **out);

// ω(ξ) for ξ ≥ 0.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_omega(const struct MuskatModulus *m, double xi, double *out);

// ρ(h) = ω(Ch) for h ≥ 0.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_rho(const struct MuskatModulus *m, double h, double *out);

// Margin decomposition of the modulus inequality at ξ.
//
// # Safety
// `out` must be writable.
enum MuskatStatus muskat_modulus_margin(const struct MuskatModulus *m,
                                        double xi,
                                        struct MuskatMargin *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MUSKAT_H */
