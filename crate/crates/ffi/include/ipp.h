#ifndef IPP_H
#define IPP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IppStatus {
    IPP_STATUS_OK = 0,
    IPP_STATUS_NULL_POINTER = 1,
    IPP_STATUS_INVALID_ARGUMENT = 2,
    IPP_STATUS_CONFIG = 3,
    IPP_STATUS_NUMERICAL = 4,
    IPP_STATUS_IO = 5,
    IPP_STATUS_OUT_OF_RANGE = 6,
    IPP_STATUS_PANIC = 7,
} IppStatus;

typedef enum IppMethod {
    IPP_METHOD_RMCTS = 0,
    IPP_METHOD_MCTS = 1,
    IPP_METHOD_NCMCTS = 2,
} IppMethod;

/**
 * Finished batch of missions for one method.
 */
typedef struct IppBatch IppBatch;

/**
 * Parsed experiment configuration.
 */
typedef struct IppConfig IppConfig;

/**
 * Fitted Gaussian-process posterior.
 */
typedef struct IppGp IppGp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL.
 */
uintptr_t ipp_last_error_length(void);

/**
 * Copies the last error message into `buf` as a NUL-terminated string,
 * truncating to `len - 1` bytes. Returns the number of bytes written,
 * excluding the NUL.
 */
uintptr_t ipp_last_error_message(char *buf, uintptr_t len);

/**
 * Static NUL-terminated version string.
 */
const char *ipp_version(void);

/**
 * Loads and validates a JSON config file.
 */
enum IppStatus ipp_config_load(const char *path, struct IppConfig **out);

/**
 * Parses a JSON config from a string. Relative raster paths resolve
 * against `base_dir`, or the working directory when it is null.
 */
enum IppStatus ipp_config_parse(const char *json, const char *base_dir, struct IppConfig **out);

void ipp_config_free(struct IppConfig *config);

enum IppStatus ipp_config_set_runs(struct IppConfig *config, uintptr_t runs);

enum IppStatus ipp_config_set_base_seed(struct IppConfig *config, uint64_t seed);

enum IppStatus ipp_config_set_iterations(struct IppConfig *config, uintptr_t iterations);

enum IppStatus ipp_config_method(const struct IppConfig *config, enum IppMethod *out);

/**
 * Runs `runs` seeded missions with `method`.
 */
enum IppStatus ipp_batch_run(const struct IppConfig *config,
                             enum IppMethod method,
                             struct IppBatch **out);

void ipp_batch_free(struct IppBatch *batch);

enum IppStatus ipp_batch_mean_mse(const struct IppBatch *batch, double *out);

enum IppStatus ipp_batch_mean_remaining_budget(const struct IppBatch *batch, double *out);

enum IppStatus ipp_batch_stranded(const struct IppBatch *batch, uintptr_t *out);

enum IppStatus ipp_batch_mission_count(const struct IppBatch *batch, uintptr_t *out);

/**
 * MSE and seed of mission `index`.
 */
enum IppStatus ipp_batch_mission(const struct IppBatch *batch,
                                 uintptr_t index,
                                 double *mse,
                                 uint64_t *seed);

/**
 * Writes `metrics.json`, `timing.json` and per-mission artifacts to `outdir`.
 */
enum IppStatus ipp_batch_write_report(const struct IppBatch *batch, const char *outdir);

/**
 * Fits a GP to `n` noise-free observations at `(xs[i], ys[i])`.
 */
enum IppStatus ipp_gp_fit(const uint32_t *xs,
                          const uint32_t *ys,
                          const double *values,
                          uintptr_t n,
                          double length_scale,
                          double signal_variance,
                          double jitter,
                          struct IppGp **out);

void ipp_gp_free(struct IppGp *gp);

enum IppStatus ipp_gp_predict(const struct IppGp *gp,
                              uint32_t x,
                              uint32_t y,
                              double *mean,
                              double *variance);

enum IppStatus ipp_gp_len(const struct IppGp *gp, uintptr_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPP_H */
