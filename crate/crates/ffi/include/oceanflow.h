#ifndef OCEANFLOW_H
#define OCEANFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  OF_STATUS_OK = 0,
  OF_STATUS_NULL_POINTER = 1,
  OF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The dataset could not be read or is malformed.
   */
  OF_STATUS_DATA = 3,
  OF_STATUS_OUT_OF_RANGE = 4,
  /**
   * The caller buffer is too small; the required length was written.
   */
  OF_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  OF_STATUS_INTERNAL = 6,
} OfStatus;

typedef enum {
  OF_AXIS_LON = 0,
  OF_AXIS_LAT = 1,
  OF_AXIS_DEPTH = 2,
  OF_AXIS_TIME = 3,
} OfAxis;

typedef enum {
  OF_ROLE_SALINITY = 0,
  OF_ROLE_TEMPERATURE = 1,
  OF_ROLE_U = 2,
  OF_ROLE_V = 3,
  OF_ROLE_W = 4,
} OfRole;

typedef enum {
  OF_FIELD_KIND_SPEED = 0,
  OF_FIELD_KIND_SPEED_HORIZONTAL = 1,
  OF_FIELD_KIND_VORTICITY_Z = 2,
  OF_FIELD_KIND_CURL_MAGNITUDE = 3,
  OF_FIELD_KIND_OKUBO_WEISS = 4,
} OfFieldKind;

typedef struct OfDataset OfDataset;

typedef struct OfEddies OfEddies;

typedef struct OfField OfField;

typedef struct OfLines OfLines;

typedef struct OfTracks OfTracks;

typedef struct {
  double lon;
  double lat;
  /**
   * Meters, positive down.
   */
  double depth;
} OfPosition;

/**
 * Streamline settings. `direction` is 0 forward, 1 backward, 2 both.
 * `max_time` is ignored unless positive.
 */
typedef struct {
  double step_length;
  size_t max_steps;
  double min_speed;
  bool include_vertical;
  int32_t direction;
  double max_time;
} OfTraceParams;

typedef struct {
  /**
   * Centre of the shallowest layer.
   */
  OfPosition centre;
  size_t level_first;
  size_t level_last;
  /**
   * +1 cyclonic, -1 anticyclonic.
   */
  int32_t rotation;
  /**
   * NaN when infinite.
   */
  double persistence;
  double vorticity;
  double radius_east;
  double radius_west;
  double radius_north;
  double radius_south;
} OfEddyInfo;

typedef struct {
  size_t t;
  size_t index;
  OfPosition centroid;
  size_t size;
} OfFrontInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on this thread.
 */
const char *of_last_error(void);

const char *of_version(void);

/**
 * Opens a NetCDF file or raw header. `map_toml` may be null for the
 * default variable names.
 *
 * # Safety
 * `path` and a non-null `map_toml` must be NUL-terminated strings; `out`
 * must be writable.
 */
OfStatus of_dataset_open(const char *path, const char *map_toml, OfDataset **out_ds);

/**
 * Builds the analytic demo ocean in memory.
 *
 * # Safety
 * `out_ds` must be writable.
 */
OfStatus of_dataset_synthetic(size_t nx, size_t ny, size_t nz, size_t nt, OfDataset **out_ds);

/**
 * # Safety
 * `ds` must be null or a handle from this library, not yet freed.
 */
void of_dataset_free(OfDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle; output pointers must be writable.
 */
OfStatus of_dataset_dims(const OfDataset *ds,
                         size_t *nlon,
                         size_t *nlat,
                         size_t *ndepth,
                         size_t *ntime);

/**
 * Copies an axis into `buf` (time in the file's units).
 *
 * # Safety
 * `ds` must be a live handle; `buf` null or valid for `cap` doubles.
 */
OfStatus of_dataset_axis(const OfDataset *ds, OfAxis axis, double *buf, size_t cap, size_t *len);

/**
 * # Safety
 * `ds` must be a live handle; `out_field` writable.
 */
OfStatus of_field_load(const OfDataset *ds, OfRole role, size_t t, OfField **out_field);

/**
 * # Safety
 * `ds` must be a live handle; `out_field` writable.
 */
OfStatus of_field_derive(const OfDataset *ds, OfFieldKind kind, size_t t, OfField **out_field);

/**
 * # Safety
 * `f` must be null or a live field handle.
 */
void of_field_free(OfField *f);

/**
 * Copies node values in `(k * nlat + j) * nlon + i` order; land and
 * invalid nodes are NaN.
 *
 * # Safety
 * `f` must be a live handle; `buf` null or valid for `cap` doubles.
 */
OfStatus of_field_values(const OfField *f, double *buf, size_t cap, size_t *len);

/**
 * Trilinear interpolation at a point.
 *
 * # Safety
 * `f` must be a live handle; `value` writable.
 */
OfStatus of_field_interpolate(const OfField *f, OfPosition p, double *value);

OfTraceParams of_trace_params_default(void);

/**
 * Integrates one streamline per seed in the velocity at timestep `t`.
 *
 * # Safety
 * `ds` must be a live handle, `seeds` valid for `n` positions, `params`
 * readable and `out_lines` writable.
 */
OfStatus of_streamlines(const OfDataset *ds,
                        size_t t,
                        const OfPosition *seeds,
                        size_t n,
                        const OfTraceParams *params,
                        OfLines **out_lines);

/**
 * # Safety
 * `lines` must be null or a live handle.
 */
void of_lines_free(OfLines *lines);

/**
 * # Safety
 * `lines` must be a live handle; `count` writable.
 */
OfStatus of_lines_count(const OfLines *lines, size_t *count);

/**
 * Vertices of line `i`.
 *
 * # Safety
 * `lines` must be a live handle; `buf` null or valid for `cap` positions.
 */
OfStatus of_line_vertices(const OfLines *lines, size_t i, OfPosition *buf, size_t cap, size_t *len);

/**
 * Termination reason of line `i`: 0 out of domain, 1 masked, 2 max steps,
 * 3 stagnation, 4 time exhausted.
 *
 * # Safety
 * `lines` must be a live handle; `reason` writable.
 */
OfStatus of_line_termination(const OfLines *lines, size_t i, int32_t *reason);

/**
 * Detects eddies at timestep `t`. Non-positive `persistence` or `r_max`
 * select the defaults.
 *
 * # Safety
 * `ds` must be a live handle; `out_eddies` writable.
 */
OfStatus of_eddies_detect(const OfDataset *ds,
                          size_t t,
                          double persistence,
                          double r_max,
                          OfEddies **out_eddies);

/**
 * # Safety
 * `e` must be null or a live handle.
 */
void of_eddies_free(OfEddies *e);

/**
 * # Safety
 * `e` must be a live handle; `count` writable.
 */
OfStatus of_eddies_count(const OfEddies *e, size_t *count);

/**
 * # Safety
 * `e` must be a live handle; `info` writable.
 */
OfStatus of_eddy_get(const OfEddies *e, size_t i, OfEddyInfo *info);

/**
 * Tracks surface fronts of `lo <= role <= hi` over timesteps
 * `t_first..=t_last`. A negative `min_jaccard` keeps every overlap link.
 *
 * # Safety
 * `ds` must be a live handle; `out_tracks` writable.
 */
OfStatus of_fronts_track(const OfDataset *ds,
                         OfRole role,
                         double lo,
                         double hi,
                         size_t t_first,
                         size_t t_last,
                         size_t min_length,
                         double min_jaccard,
                         OfTracks **out_tracks);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
void of_tracks_free(OfTracks *t);

/**
 * Number of tracks, and of fronts and links in the underlying graph.
 *
 * # Safety
 * `t` must be a live handle; non-null outputs writable.
 */
OfStatus of_tracks_count(const OfTracks *t, size_t *tracks, size_t *fronts, size_t *links);

/**
 * Fronts along track `i`, in time order.
 *
 * # Safety
 * `t` must be a live handle; `buf` null or valid for `cap` entries.
 */
OfStatus of_track_fronts(const OfTracks *t, size_t i, OfFrontInfo *buf, size_t cap, size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCEANFLOW_H */
