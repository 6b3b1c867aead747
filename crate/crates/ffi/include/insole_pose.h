#ifndef INSOLE_POSE_H
#define INSOLE_POSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum IpStatus {
  IP_STATUS_OK = 0,
  IP_STATUS_NULL_POINTER = 1,
  IP_STATUS_INVALID_ARGUMENT = 2,
  IP_STATUS_IO = 3,
  IP_STATUS_FORMAT = 4,
  IP_STATUS_INCOMPATIBLE = 5,
  IP_STATUS_NUMERIC = 6,
  IP_STATUS_PANIC = 7,
} IpStatus;

// A loaded checkpoint.
typedef struct IpModel IpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a checkpoint file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum IpStatus ip_model_load(const char *path, struct IpModel **out);

// Releases a handle from [`ip_model_load`]. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void ip_model_free(struct IpModel *model);

// Number of feature channels per input frame.
//
// # Safety
// `model` must be a live handle and `out` valid for writes.
enum IpStatus ip_model_input_width(const struct IpModel *model, size_t *out);

// Number of values per output frame.
//
// # Safety
// `model` must be a live handle and `out` valid for writes.
enum IpStatus ip_model_output_width(const struct IpModel *model, size_t *out);

// Window length in frames; inputs must hold at least this many frames.
//
// # Safety
// `model` must be a live handle and `out` valid for writes.
enum IpStatus ip_model_window(const struct IpModel *model, size_t *out);

// Predicts skeleton frames in millimetres from `frames` normalized
// feature frames. `out_len` must equal `frames * output_width`.
//
// # Safety
// `features` must point to `frames * input_width` values and `out` to
// `out_len` writable values.
enum IpStatus ip_model_predict(const struct IpModel *model,
                               const double *features,
                               size_t frames,
                               double *out,
                               size_t out_len);

// As [`ip_model_predict`] but returns the model's normalized outputs.
//
// # Safety
// Same as [`ip_model_predict`].
enum IpStatus ip_model_predict_raw(const struct IpModel *model,
                                   const double *features,
                                   size_t frames,
                                   double *out,
                                   size_t out_len);

// Gain of the non-inverting amplifier, `1 + r2 / r1`.
//
// # Safety
// `out` must be valid for writes.
enum IpStatus ip_amplifier_gain(double r1_ohms, double r2_ohms, double *out);

// Sensor-side voltage for an ADC count.
//
// # Safety
// `out` must be valid for writes.
enum IpStatus ip_adc_to_voltage(int64_t count,
                                double r1_ohms,
                                double r2_ohms,
                                double supply_volts,
                                uint32_t adc_bits,
                                double *out);

// RMSE in millimetres of per-joint Euclidean errors between two skeleton
// sequences of `frames` rows of 63 values.
//
// # Safety
// `pred` and `truth` must each point to `frames * 63` values.
enum IpStatus ip_eval_rmse(const double *pred, const double *truth, size_t frames, double *out);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`) and returns the full message
// length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `len` writable bytes.
size_t ip_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INSOLE_POSE_H */
