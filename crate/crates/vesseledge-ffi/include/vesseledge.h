/* C interface to the VesselEdge pipeline. Generated by cbindgen; do not edit. */

#ifndef VESSELEDGE_H
#define VESSELEDGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum VeStatus {
  VE_STATUS_OK = 0,
  VE_STATUS_NULL_POINTER = 1,
  VE_STATUS_INVALID_ARGUMENT = 2,
  VE_STATUS_IO_ERROR = 3,
  VE_STATUS_FORMAT_ERROR = 4,
  // Operation needs state the handle does not have (e.g. an
  // uncalibrated model asked to flag).
  VE_STATUS_STATE_ERROR = 5,
  VE_STATUS_BUFFER_TOO_SMALL = 6,
  VE_STATUS_INTERNAL = 7,
} VeStatus;

// Opaque handle to a movement-anomaly model.
typedef struct VeModel VeModel;

// One fixed-width wire point (18 bytes on the wire).
typedef struct VeWirePoint {
  uint32_t mmsi;
  // Seconds after the window start.
  uint8_t time_offset_s;
  // Latitude in 1e-6 degree units.
  int32_t lat_e6;
  // Longitude in 1e-6 degree units.
  int32_t lon_e6;
  // Speed over ground in tenths of knots.
  uint16_t sog_dkn;
  // Course over ground in tenths of degrees.
  uint16_t cog_ddeg;
  // Bit 0: anomaly flag.
  uint8_t flags;
} VeWirePoint;

// One position report handed to the compressor.
typedef struct VeAisPoint {
  uint32_t mmsi;
  // UTC seconds since the epoch.
  int64_t timestamp;
  double lat;
  double lon;
  double sog_kn;
  double cog_deg;
  bool anomaly;
} VeAisPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent error on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *ve_last_error_message(void);

// Crate version as a static string.
const char *ve_version(void);

// Trains a model from a DMA-schema CSV. On success `*out_model` owns the
// new handle.
//
// # Safety
// `csv_path` must be a NUL-terminated string and `out_model` a valid
// pointer.
enum VeStatus ve_model_train_csv(const char *csv_path,
                                 double cell_size_deg,
                                 uint32_t max_components,
                                 uint64_t seed,
                                 struct VeModel **out_model);

// Loads a model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out_model` a valid pointer.
enum VeStatus ve_model_load(const char *path, struct VeModel **out_model);

// Writes the model file (statistical content; calibration is re-run after
// loading).
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum VeStatus ve_model_save(const struct VeModel *model, const char *path);

// Calibrates the flagging threshold to the q-th percentile of the holdout
// CSV's scores.
//
// # Safety
// `model` must be a live handle; `csv_path` a NUL-terminated string.
enum VeStatus ve_model_calibrate_csv(struct VeModel *model, const char *csv_path, double quantile);

// Log density of the movement under the model's cell prototype; very
// negative for cells the model has never seen.
//
// # Safety
// `model` must be a live handle and `out_score` a valid pointer.
enum VeStatus ve_model_score(const struct VeModel *model,
                             double lat,
                             double lon,
                             double sog_kn,
                             double cog_deg,
                             double *out_score);

// True iff the movement scores strictly below the calibrated threshold.
// Fails with `StateError` on an uncalibrated model.
//
// # Safety
// `model` must be a live handle and `out_flag` a valid pointer.
enum VeStatus ve_model_flag(const struct VeModel *model,
                            double lat,
                            double lon,
                            double sog_kn,
                            double cog_deg,
                            bool *out_flag);

// Records absorbed by the model; 0 for a null handle.
//
// # Safety
// `model` must be a live handle or null.
uint64_t ve_model_trained_count(const struct VeModel *model);

// Merges models cell-wise, weighting shared cells by `weights` (typically
// the per-model trained counts). The result is uncalibrated.
//
// # Safety
// `models` must point to `count` live handles, `weights` to `count`
// values, and `out_model` must be valid.
enum VeStatus ve_model_federate(const struct VeModel *const *models,
                                const uint64_t *weights,
                                size_t count,
                                struct VeModel **out_model);

// Frees a model handle; null is a no-op.
//
// # Safety
// `model` must be a handle produced by this library, freed at most once.
void ve_model_free(struct VeModel *model);

// Exact byte size of a packet carrying `point_count` points.
size_t ve_packet_size(size_t point_count);

// Encodes points into `out`; `*out_written` receives the packet size.
// Fails with `BufferTooSmall` when `out_capacity` is insufficient.
//
// # Safety
// `points` must reference `count` elements; `out` must have
// `out_capacity` writable bytes; `out_written` must be valid.
enum VeStatus ve_packet_encode(uint32_t window_index,
                               uint16_t edge_id,
                               const struct VeWirePoint *points,
                               size_t count,
                               uint8_t *out,
                               size_t out_capacity,
                               size_t *out_written);

// Decodes and CRC-checks a packet into `out_points`.
//
// # Safety
// `bytes` must reference `len` readable bytes; `out_points` must have
// room for `out_capacity` elements; the remaining out-pointers must be
// valid.
enum VeStatus ve_packet_decode(const uint8_t *bytes,
                               size_t len,
                               uint32_t *out_window_index,
                               uint16_t *out_edge_id,
                               struct VeWirePoint *out_points,
                               size_t out_capacity,
                               size_t *out_count);

// Budget-constrained selection over one window of points.
//
// `kept_mask[i]` is set iff input point i survives. The budget keeps
// `max(round(fraction * count), vessels * floor)` points, never more than
// the input. Vessels listed in `boosted_mmsi` (or flagged via `anomaly`)
// have their finite priorities multiplied by `boost_factor`. Points must
// lie inside the window and carry unique (mmsi, timestamp) pairs.
//
// # Safety
// `points` must reference `count` elements and `kept_mask` must have room
// for `count` booleans; `boosted_mmsi` must reference `boosted_count`
// values (it may be null when `boosted_count` is 0); `out_kept_count`
// must be valid.
enum VeStatus ve_window_compress(const struct VeAisPoint *points,
                                 size_t count,
                                 int64_t window_index,
                                 uint32_t window_seconds,
                                 double fraction,
                                 uint32_t floor,
                                 double boost_factor,
                                 const uint32_t *boosted_mmsi,
                                 size_t boosted_count,
                                 bool *kept_mask,
                                 size_t *out_kept_count);

// Great-circle distance in meters; negative when a coordinate is out of
// range.
double ve_haversine_m(double lat1, double lon1, double lat2, double lon2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VESSELEDGE_H */
