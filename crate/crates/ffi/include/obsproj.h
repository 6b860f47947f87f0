#ifndef OBSPROJ_H
#define OBSPROJ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Feedback source for [`obsproj_simulate`].
 */
typedef enum ObsprojFeedback {
  OBSPROJ_FEEDBACK_OUTPUT = 0,
  OBSPROJ_FEEDBACK_STATE = 1,
} ObsprojFeedback;

/*
 Result codes.
 */
typedef enum ObsprojStatus {
  OBSPROJ_STATUS_OK = 0,
  OBSPROJ_STATUS_NULL_POINTER = 1,
  OBSPROJ_STATUS_INVALID_ARGUMENT = 2,
  OBSPROJ_STATUS_INVALID_CONFIG = 3,
  /*
   The run stopped early; the trajectory handle holds the partial log.
   */
  OBSPROJ_STATUS_SIMULATION_FAILED = 4,
  OBSPROJ_STATUS_IO = 5,
  OBSPROJ_STATUS_NOT_HURWITZ = 6,
  OBSPROJ_STATUS_OUT_OF_RANGE = 7,
  OBSPROJ_STATUS_INTERNAL = 8,
} ObsprojStatus;

/*
 Opaque scenario handle.
 */
typedef struct ObsprojScenario ObsprojScenario;

/*
 Opaque trajectory handle.
 */
typedef struct ObsprojTrajectory ObsprojTrajectory;

/*
 Scalar summary of a trajectory. Undefined quantities are NaN.
 */
typedef struct ObsprojMetrics {
  double peak_xhat;
  double conv_time;
  double final_norm;
  double max_abs_v;
  double recovery_dev;
} ObsprojMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the most recent failure on this thread. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *obsproj_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *obsproj_version(void);

/*
 Creates a scenario from a preset name (`fig2a`, `fig2b`, `fig3`,
 `fig4`, `fig5`). `rho <= 0` selects the preset's default.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ObsprojStatus obsproj_scenario_from_preset(const char *name,
                                                double rho,
                                                struct ObsprojScenario **out);

/*
 # Safety
 `s` must come from [`obsproj_scenario_from_preset`] or be null.
 */
void obsproj_scenario_free(struct ObsprojScenario *s);

/*
 # Safety
 `s` must be a live scenario handle.
 */
enum ObsprojStatus obsproj_scenario_set_rho(struct ObsprojScenario *s, double rho);

/*
 # Safety
 `s` must be a live scenario handle.
 */
enum ObsprojStatus obsproj_scenario_set_dt(struct ObsprojScenario *s, double dt);

/*
 # Safety
 `s` must be a live scenario handle.
 */
enum ObsprojStatus obsproj_scenario_set_t_final(struct ObsprojScenario *s, double t_final);

/*
 # Safety
 `s` must be a live scenario handle.
 */
enum ObsprojStatus obsproj_scenario_set_log_stride(struct ObsprojScenario *s, size_t stride);

/*
 Disables (`enabled == 0`) or restores the preset's projection set.

 # Safety
 `s` must be a live scenario handle.
 */
enum ObsprojStatus obsproj_scenario_set_projection(struct ObsprojScenario *s, int enabled);

/*
 # Safety
 `s` must be a live scenario handle and `xhat0` must point to `len`
 doubles.
 */
enum ObsprojStatus obsproj_scenario_set_xhat0(struct ObsprojScenario *s,
                                              const double *xhat0,
                                              size_t len);

/*
 Checks the scenario without running it.

 # Safety
 `s` must be a live scenario handle.
 */
enum ObsprojStatus obsproj_scenario_validate(const struct ObsprojScenario *s);

/*
 Runs the scenario. On [`ObsprojStatus::Ok`] or
 [`ObsprojStatus::SimulationFailed`] `*out` receives a trajectory handle;
 on configuration errors it is set to null.

 # Safety
 `s` must be a live scenario handle and `out` a valid pointer.
 */
enum ObsprojStatus obsproj_simulate(const struct ObsprojScenario *s,
                                    enum ObsprojFeedback feedback,
                                    struct ObsprojTrajectory **out);

/*
 # Safety
 `t` must come from [`obsproj_simulate`] or be null.
 */
void obsproj_trajectory_free(struct ObsprojTrajectory *t);

/*
 Number of logged rows; 0 for a null handle.

 # Safety
 `t` must be a live trajectory handle or null.
 */
size_t obsproj_trajectory_rows(const struct ObsprojTrajectory *t);

/*
 Number of CSV columns; 0 for a null handle.

 # Safety
 `t` must be a live trajectory handle or null.
 */
size_t obsproj_trajectory_columns(const struct ObsprojTrajectory *t);

/*
 Column name, valid for the life of the handle; null when out of range.

 # Safety
 `t` must be a live trajectory handle or null.
 */
const char *obsproj_trajectory_column_name(const struct ObsprojTrajectory *t, size_t col);

/*
 Name of the error that stopped the run, or null if it completed.

 # Safety
 `t` must be a live trajectory handle or null.
 */
const char *obsproj_trajectory_error_name(const struct ObsprojTrajectory *t);

/*
 Reads one cell in CSV column order. An empty `V` cell reads as NaN.

 # Safety
 `t` must be a live trajectory handle and `out` a valid pointer.
 */
enum ObsprojStatus obsproj_trajectory_value(const struct ObsprojTrajectory *t,
                                            size_t row,
                                            size_t col,
                                            double *out);

/*
 Copies a whole column into `buf`, which must hold at least `rows`
 doubles.

 # Safety
 `t` must be a live trajectory handle and `buf` must point to `len`
 writable doubles.
 */
enum ObsprojStatus obsproj_trajectory_column(const struct ObsprojTrajectory *t,
                                             size_t col,
                                             double *buf,
                                             size_t len);

/*
 Writes the trajectory as CSV.

 # Safety
 `t` must be a live trajectory handle and `path` a NUL-terminated string.
 */
enum ObsprojStatus obsproj_trajectory_write_csv(const struct ObsprojTrajectory *t,
                                                const char *path);

/*
 Computes run metrics; `reference` may be null. `eps` is the
 convergence threshold for `conv_time`.

 # Safety
 `t` must be a live trajectory handle, `reference` a live handle or
 null, and `out` a valid pointer.
 */
enum ObsprojStatus obsproj_trajectory_metrics(const struct ObsprojTrajectory *t,
                                              const struct ObsprojTrajectory *reference,
                                              double eps,
                                              struct ObsprojMetrics *out);

/*
 Solves `P·A + Aᵀ·P = −I` for a row-major n×n matrix `a`, writing the
 row-major solution to `p_out`.

 # Safety
 `a` and `p_out` must each point to `n * n` doubles.
 */
enum ObsprojStatus obsproj_solve_lyapunov(const double *a, size_t n, double *p_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OBSPROJ_H */
