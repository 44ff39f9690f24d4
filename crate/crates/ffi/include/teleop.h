#ifndef TELEOP_H
#define TELEOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Bytes in an encoded CommandFrame.
 */
#define TELEOP_COMMAND_FRAME_LEN 71

typedef enum TeleopStatus {
  TELEOP_STATUS_OK = 0,
  TELEOP_STATUS_NULL_POINTER = 1,
  TELEOP_STATUS_INVALID_ARGUMENT = 2,
  TELEOP_STATUS_INVALID_CONFIG = 3,
  /**
   * Input bytes are not a valid frame.
   */
  TELEOP_STATUS_DECODE_FAILED = 4,
  /**
   * The point lies behind the camera plane.
   */
  TELEOP_STATUS_BEHIND_CAMERA = 5,
  /**
   * No anchor batch has been emitted yet.
   */
  TELEOP_STATUS_NOT_READY = 6,
  TELEOP_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  TELEOP_STATUS_INTERNAL = 8,
} TeleopStatus;

/**
 * Opaque engine handle.
 */
typedef struct TeleopEngine TeleopEngine;

typedef struct TeleopCommand {
  /**
   * 0 left, 1 right.
   */
  uint8_t side;
  double position[3];
  /**
   * `(w, x, y, z)`
   */
  double orientation[4];
  bool grip_close;
  bool clamped;
  uint64_t timestamp_us;
} TeleopCommand;

typedef struct TeleopAnchor {
  uint64_t time_us;
  uint8_t arm;
  uint8_t eye;
  double anchor[3];
  double panel_center[3];
  double panel_scale;
  bool visible;
  bool behind_camera;
} TeleopAnchor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an engine with the default configuration.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum TeleopStatus teleop_engine_new_default(struct TeleopEngine **out);

/**
 * Creates an engine from a NUL-terminated TOML config.
 *
 * # Safety
 * `toml` must be null or a valid C string; `out` must be null or valid for writes.
 */
enum TeleopStatus teleop_engine_new_from_toml(const char *toml, struct TeleopEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must be null or a handle from `teleop_engine_new_*` not yet freed.
 */
void teleop_engine_free(struct TeleopEngine *engine);

/**
 * Queues one encoded PoseFrame or ControllerFrame arriving at `arrival_us`.
 *
 * # Safety
 * `engine` must be a live handle; `bytes` must be valid for `len` reads.
 */
enum TeleopStatus teleop_engine_push_frame(struct TeleopEngine *engine,
                                           uint64_t arrival_us,
                                           const uint8_t *bytes,
                                           size_t len);

/**
 * Runs every tick scheduled at or before `t_us`. `ticks_run`, when not
 * null, receives the number of ticks executed by this call.
 *
 * # Safety
 * `engine` must be a live handle; `ticks_run` must be null or valid for writes.
 */
enum TeleopStatus teleop_engine_advance_to(struct TeleopEngine *engine,
                                           uint64_t t_us,
                                           uint64_t *ticks_run);

/**
 * Time of the next tick, microseconds.
 *
 * # Safety
 * `engine` must be a live handle; `out` must be valid for writes.
 */
enum TeleopStatus teleop_engine_next_tick_time_us(const struct TeleopEngine *engine, uint64_t *out);

/**
 * Most recent command for arm `side` (0 left, 1 right).
 *
 * # Safety
 * `engine` must be a live handle; `out` must be valid for writes.
 */
enum TeleopStatus teleop_engine_latest_command(const struct TeleopEngine *engine,
                                               uint8_t side,
                                               struct TeleopCommand *out);

/**
 * The (arm, eye) record of the most recent anchor emission.
 *
 * # Safety
 * `engine` must be a live handle; `out` must be valid for writes.
 */
enum TeleopStatus teleop_engine_latest_anchor(const struct TeleopEngine *engine,
                                              uint8_t arm_side,
                                              uint8_t eye_side,
                                              struct TeleopAnchor *out);

/**
 * Projects a point in the virtual camera frame onto the engine's
 * `z = f_w` plane.
 *
 * # Safety
 * `engine` must be a live handle; `point` must be valid for 3 reads and
 * `out` for 3 writes.
 */
enum TeleopStatus teleop_engine_anchor_project(const struct TeleopEngine *engine,
                                               const double *point,
                                               double *out);

/**
 * Per-axis workspace scaling for the given calibration, written to `out[0..3]`.
 *
 * # Safety
 * `out` must be valid for 3 writes.
 */
enum TeleopStatus teleop_compute_scaling(double r_h,
                                         double d_h,
                                         double r_c,
                                         double d_c,
                                         double *out);

/**
 * Encodes `cmd` as a CommandFrame into `buf`, which must hold
 * `TELEOP_COMMAND_FRAME_LEN` bytes.
 *
 * # Safety
 * `cmd` must be valid for reads; `buf` must be valid for `len` writes.
 */
enum TeleopStatus teleop_encode_command(const struct TeleopCommand *cmd, uint8_t *buf, size_t len);

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to fit. Returns the full message length
 * without the terminator, so a caller can size a buffer by passing `len = 0`.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t teleop_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *teleop_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TELEOP_H */
