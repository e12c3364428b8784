#ifndef BEAMSCHED_H
#define BEAMSCHED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_INVALID_UTF8 = 2,
  BS_STATUS_CONFIG = 3,
  BS_STATUS_SEARCH_SPACE = 4,
  BS_STATUS_CONTRACT = 5,
  BS_STATUS_IO = 6,
  // Output buffer too small; the required length was written back.
  BS_STATUS_BUFFER_TOO_SMALL = 7,
  BS_STATUS_OUT_OF_RANGE = 8,
  BS_STATUS_PANIC = 9,
} BsStatus;

// Simulation configuration.
typedef struct BsConfig BsConfig;

// Result of one simulation run.
typedef struct BsRun BsRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, empty if none. The pointer is
// valid until the next failing call on the same thread.
const char *bs_last_error(void);

// Library version as a static NUL-terminated string.
const char *bs_version(void);

// Creates a configuration with every default.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum BsStatus bs_config_new(struct BsConfig **out);

// Parses a TOML configuration document.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum BsStatus bs_config_from_toml(const char *toml, struct BsConfig **out);

// Applies one `key=value` override, e.g. `K=8` or `dual.beta0=0.2`.
//
// # Safety
// `config` must come from this library; `assignment` must be NUL-terminated.
enum BsStatus bs_config_set(struct BsConfig *config, const char *assignment);

// Copies the configuration as TOML into `buf`. `len` receives the size
// needed including the NUL; `buf` may be null to query it.
//
// # Safety
// `config` must come from this library; `buf` must hold `cap` bytes.
enum BsStatus bs_config_to_toml(const struct BsConfig *config, char *buf, size_t cap, size_t *len);

// # Safety
// `config` must come from this library and not be used afterwards. Null is ignored.
void bs_config_free(struct BsConfig *config);

// Runs the simulation described by `config`.
//
// # Safety
// `config` must come from this library; `out` must be writable.
enum BsStatus bs_run(const struct BsConfig *config, struct BsRun **out);

// # Safety
// `run` must come from this library and not be used afterwards. Null is ignored.
void bs_run_free(struct BsRun *run);

// Number of simulated slots and users.
//
// # Safety
// `run` must come from this library; the outputs must be writable.
enum BsStatus bs_run_shape(const struct BsRun *run, uint64_t *slots, size_t *users);

// Mean total power and mean sum rate over all slots.
//
// # Safety
// `run` must come from this library; the outputs must be writable.
enum BsStatus bs_run_means(const struct BsRun *run, double *power, double *sum_rate);

// Mean per-user rates over all slots, written to `rates[0..users]`.
//
// # Safety
// `run` must come from this library; `rates` must hold `cap` doubles.
enum BsStatus bs_run_mean_rates(const struct BsRun *run, double *rates, size_t cap);

// Dual price, instantaneous power and sum rate of slot `n`.
//
// # Safety
// `run` must come from this library; the outputs must be writable.
enum BsStatus bs_run_slot(const struct BsRun *run,
                          uint64_t n,
                          double *lambda,
                          double *power,
                          double *sum_rate);

// Copies the JSON summary into `buf`; see [`bs_config_to_toml`] for the
// buffer protocol.
//
// # Safety
// `run` must come from this library; `buf` must hold `cap` bytes.
enum BsStatus bs_run_summary_json(const struct BsRun *run, char *buf, size_t cap, size_t *len);

// Writes `trace.csv` and `summary.json` into `dir`.
//
// # Safety
// `run` must come from this library; `dir` must be NUL-terminated.
enum BsStatus bs_run_write(const struct BsRun *run, const char *dir);

// Greedy beam/user selection on one subcarrier.
//
// `gains` is row-major `users × beams`; `assigned[q]` receives the user of
// beam `q` or -1 when the beam is off.
//
// # Safety
// `gains` must hold `users * beams` doubles, `mu` `users` doubles,
// `assigned` `beams` entries; `metric` must be writable.
enum BsStatus bs_select_beams(const double *gains,
                              size_t users,
                              size_t beams,
                              const double *mu,
                              double v,
                              int64_t *assigned,
                              double *metric);

// Water-filling powers for a given assignment (as produced by
// [`bs_select_beams`]), written to `powers[0..beams]`.
//
// # Safety
// Same buffer sizes as [`bs_select_beams`]; `powers` must hold `beams` doubles.
enum BsStatus bs_waterfill(const double *gains,
                           size_t users,
                           size_t beams,
                           const int64_t *assigned,
                           const double *mu,
                           double lambda,
                           double v,
                           double *powers);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEAMSCHED_H */
