/*
 * C interface to the three-tank simulation and estimation library.
 *
 * All functions report failures through tt_status; a human-readable
 * message for the most recent failure on the calling thread is available
 * from tt_last_error(). Strings returned through `char** out` parameters
 * are heap-allocated and must be released with tt_string_free().
 */
#ifndef THREETANK_H
#define THREETANK_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(THREETANK_BUILDING_LIBRARY)
#    define THREETANK_API __declspec(dllexport)
#  else
#    define THREETANK_API __declspec(dllimport)
#  endif
#else
#  define THREETANK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tt_status {
  TT_OK = 0,
  TT_ERROR_CONFIG = 1,    /* invalid configuration, parameters or input file */
  TT_ERROR_NUMERIC = 2,   /* singular matrix, uncontrollable model, non-finite state */
  TT_ERROR_ARGUMENT = 3,  /* null handle or pointer, index out of range */
  TT_ERROR_INTERNAL = 4
} tt_status;

/* Number of values per row of a simulation result, in CSV column order:
 * t,h1,h2,h3,y1,y2,y3,yr1,yr2,u1,u2,zeta1,zeta2,xhat1,xhat2,xhat3,z1,z2,sat1,sat2 */
#define TT_ROW_WIDTH 20

typedef struct tt_scenario tt_scenario;
typedef struct tt_result tt_result;

typedef struct tt_plant_params {
  double tank_area;  /* m^2 */
  double pipe_area;  /* m^2 */
  double mu13;
  double mu32;
  double mu20;
  double gravity;    /* m/s^2 */
  double q_max;      /* m^3/s per pump */
  double h_max;      /* m per tank */
} tt_plant_params;

THREETANK_API const char* tt_version(void);
THREETANK_API const char* tt_last_error(void);
THREETANK_API void tt_string_free(char* s);

/* Plant ------------------------------------------------------------------ */

THREETANK_API void tt_plant_params_default(tt_plant_params* out);

/* dh/dt for levels h[3] and pump flows q[2] (clamped to [0, q_max]).
 * `params` may be NULL for the default rig. */
THREETANK_API tt_status tt_plant_derivatives(const tt_plant_params* params, const double h[3],
                                             const double q[2], double dhdt[3]);

/* Integrates with constant pump flows over `duration` seconds using RK4
 * sub-steps of at most `max_dt`. sat_out (may be NULL) receives 1 for each
 * pump channel that was clamped. */
THREETANK_API tt_status tt_plant_advance(const tt_plant_params* params, const double h[3],
                                         const double q[2], double duration, double max_dt,
                                         double h_out[3], int sat_out[2]);

/* Scenarios -------------------------------------------------------------- */

/* Default linear-tracking scenario around the benchmark operating point. */
THREETANK_API tt_status tt_scenario_default(tt_scenario** out);
THREETANK_API tt_status tt_scenario_from_json(const char* json, tt_scenario** out);
THREETANK_API tt_status tt_scenario_from_file(const char* path, tt_scenario** out);
THREETANK_API void tt_scenario_free(tt_scenario* scenario);

/* Overrides; `u0` may be NULL to use the equilibrium input of y0. */
THREETANK_API tt_status tt_scenario_set_operating_point(tt_scenario* scenario, const double y0[3],
                                                        const double u0[2]);
THREETANK_API tt_status tt_scenario_set_sample_time(tt_scenario* scenario, double t_s);
/* `imag` may be NULL for purely real poles. Clears any fixed gain. */
THREETANK_API tt_status tt_scenario_set_poles(tt_scenario* scenario, const double* real,
                                              const double* imag, size_t count);
/* Row-major 2x5 gain [K1 | K2]; bypasses pole placement. */
THREETANK_API tt_status tt_scenario_set_gain(tt_scenario* scenario, const double gain[10]);

/* JSON reports: linearized model (F, B, A_d, B_d, C) and tracking design
 * (K, closed-loop eigenvalues, stability). */
THREETANK_API tt_status tt_linearize_json(const tt_scenario* scenario, char** out);
THREETANK_API tt_status tt_design_json(const tt_scenario* scenario, char** out);

THREETANK_API tt_status tt_scenario_run(const tt_scenario* scenario, tt_result** out);

/* Results ---------------------------------------------------------------- */

THREETANK_API void tt_result_free(tt_result* result);
THREETANK_API size_t tt_result_rows(const tt_result* result);
/* Absent values are NaN; sat flags are 0.0 or 1.0. */
THREETANK_API tt_status tt_result_row(const tt_result* result, size_t index,
                                      double values[TT_ROW_WIDTH]);
THREETANK_API tt_status tt_result_csv(const tt_result* result, char** out);
THREETANK_API tt_status tt_result_write_csv(const tt_result* result, const char* path);
THREETANK_API tt_status tt_result_metrics_json(const tt_result* result, char** out);

/* Recomputes the metrics report from a CSV written by this library. */
THREETANK_API tt_status tt_metrics_from_csv(const char* csv_path, double burn_in,
                                            double settle_band, char** out);

#ifdef __cplusplus
}
#endif

#endif /* THREETANK_H */
