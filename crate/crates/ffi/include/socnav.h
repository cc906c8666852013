#ifndef SOCNAV_H
#define SOCNAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_ARGUMENT = 1,
  SN_STATUS_INVALID_UTF8 = 2,
  SN_STATUS_IO = 3,
  SN_STATUS_PARSE = 4,
  SN_STATUS_VALIDATION = 5,
  SN_STATUS_OUT_OF_BOUNDS = 6,
  SN_STATUS_NO_PATH = 7,
  SN_STATUS_TIMEOUT = 8,
  SN_STATUS_TRANSPORT = 9,
  SN_STATUS_LOG = 10,
  SN_STATUS_BUFFER_TOO_SMALL = 11,
  SN_STATUS_PANIC = 99,
} SnStatus;

/**
 * A layered costmap.
 */
typedef struct SnCostmap SnCostmap;

/**
 * A finished episode.
 */
typedef struct SnReport SnReport;

/**
 * A validated scenario.
 */
typedef struct SnScenario SnScenario;

typedef struct SnMetrics {
  bool success;
  bool collided;
  double curvature;
  double smoothness_score;
  double subject_score;
  double region_score;
  double band_fraction;
} SnMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sn_last_error(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SnStatus sn_scenario_load(const char *path, struct SnScenario **out);

/**
 * # Safety
 * `s` must come from [`sn_scenario_load`] and not be used afterwards.
 */
void sn_scenario_free(struct SnScenario *s);

/**
 * # Safety
 * `s` must be a live scenario handle.
 */
size_t sn_scenario_pedestrian_count(const struct SnScenario *s);

/**
 * Runs one episode with the bundled scripted rules.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` writable.
 */
enum SnStatus sn_run_episode(const struct SnScenario *s,
                             uint64_t seed,
                             double latency_s,
                             struct SnReport **out);

/**
 * # Safety
 * `r` must come from [`sn_run_episode`] and not be used afterwards.
 */
void sn_report_free(struct SnReport *r);

/**
 * # Safety
 * `r` must be a live report handle.
 */
size_t sn_report_ticks(const struct SnReport *r);

/**
 * # Safety
 * `r` must be a live report handle and `out` writable.
 */
enum SnStatus sn_report_metrics(const struct SnReport *r, struct SnMetrics *out);

/**
 * The report as JSON. Release with [`sn_string_free`].
 *
 * # Safety
 * `r` must be a live report handle and `out` writable.
 */
enum SnStatus sn_report_json(const struct SnReport *r, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void sn_string_free(char *s);

/**
 * An empty costmap with its origin at (0, 0), or null on invalid sizes.
 */
struct SnCostmap *sn_costmap_new(size_t width, size_t height, double resolution);

/**
 * # Safety
 * `c` must come from [`sn_costmap_new`] and not be used afterwards.
 */
void sn_costmap_free(struct SnCostmap *c);

/**
 * Marks a cell lethal in the static layer.
 *
 * # Safety
 * `c` must be a live costmap handle.
 */
enum SnStatus sn_costmap_set_obstacle(struct SnCostmap *c, double x, double y);

/**
 * Replaces the social layer with one decaying marker per entry of the
 * parallel arrays, then merges the layers.
 *
 * # Safety
 * `c` must be a live costmap handle; each array holds `n` values.
 */
enum SnStatus sn_costmap_set_markers(struct SnCostmap *c,
                                     const double *xs,
                                     const double *ys,
                                     const double *costs,
                                     const double *radii,
                                     const double *decays,
                                     size_t n);

/**
 * Merged cost at a world point.
 *
 * # Safety
 * `c` must be a live costmap handle and `out` writable.
 */
enum SnStatus sn_costmap_cost_at(const struct SnCostmap *c, double x, double y, uint8_t *out);

/**
 * Plans over the merged grid and writes waypoints as `x0, y0, x1, y1, ...`
 * into `xy`, which holds `capacity` points. `len` receives the point count;
 * if it exceeds `capacity` nothing is written and
 * [`SnStatus::BufferTooSmall`] is returned.
 *
 * # Safety
 * `c` must be a live costmap handle; `xy` holds `2 * capacity` doubles.
 */
enum SnStatus sn_costmap_plan(const struct SnCostmap *c,
                              double sx,
                              double sy,
                              double gx,
                              double gy,
                              double *xy,
                              size_t capacity,
                              size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOCNAV_H */
