//! C ABI over [`teleop_core`].
//!
//! The engine is an opaque handle created by `teleop_engine_new_*` and
//! released by `teleop_engine_free`. Every fallible call returns a
//! [`TeleopStatus`]; the message for the most recent failure on the calling
//! thread is available from `teleop_last_error_message`. A handle must not be
//! used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use teleop_core::config::EngineConfig;
use teleop_core::engine::{AnchorBatch, Engine};
use teleop_core::geometry::{UnitQuat, Vec3};
use teleop_core::perception::{anchor_project, EyeSide};
use teleop_core::retarget::{ArmSide, EndEffectorCommand};
use teleop_core::transport::codec::{CommandFrame, InputFrame, COMMAND_FRAME_LEN};
use teleop_core::workspace::compute_scaling;

/// Bytes in an encoded CommandFrame.
pub const TELEOP_COMMAND_FRAME_LEN: usize = 71;
const _: () = assert!(TELEOP_COMMAND_FRAME_LEN == COMMAND_FRAME_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeleopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    /// Input bytes are not a valid frame.
    DecodeFailed = 4,
    /// The point lies behind the camera plane.
    BehindCamera = 5,
    /// No anchor batch has been emitted yet.
    NotReady = 6,
    BufferTooSmall = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Opaque engine handle.
pub struct TeleopEngine {
    engine: Engine,
    anchors: Option<AnchorBatch>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopCommand {
    /// 0 left, 1 right.
    pub side: u8,
    pub position: [f64; 3],
    /// `(w, x, y, z)`
    pub orientation: [f64; 4],
    pub grip_close: bool,
    pub clamped: bool,
    pub timestamp_us: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopAnchor {
    pub time_us: u64,
    pub arm: u8,
    pub eye: u8,
    pub anchor: [f64; 3],
    pub panel_center: [f64; 3],
    pub panel_scale: f64,
    pub visible: bool,
    pub behind_camera: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: TeleopStatus, message: impl Into<String>) -> TeleopStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

/// Runs `f`, mapping panics to `Internal`.
fn guard(f: impl FnOnce() -> TeleopStatus) -> TeleopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(TeleopStatus::Internal, msg)
        }
    }
}

fn arm(side: u8) -> Result<ArmSide, TeleopStatus> {
    ArmSide::from_index(side)
        .ok_or_else(|| fail(TeleopStatus::InvalidArgument, format!("arm side {side} is not 0 or 1")))
}

fn eye(side: u8) -> Result<EyeSide, TeleopStatus> {
    match side {
        0 => Ok(EyeSide::Left),
        1 => Ok(EyeSide::Right),
        _ => Err(fail(TeleopStatus::InvalidArgument, format!("eye side {side} is not 0 or 1"))),
    }
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(TeleopStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

macro_rules! deref_ref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(TeleopStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

fn install(config: EngineConfig, out: &mut *mut TeleopEngine) -> TeleopStatus {
    match Engine::new(config) {
        Ok(engine) => {
            *out = Box::into_raw(Box::new(TeleopEngine {
                engine,
                anchors: None,
            }));
            TeleopStatus::Ok
        }
        Err(e) => fail(TeleopStatus::InvalidConfig, e.to_string()),
    }
}

/// Creates an engine with the default configuration.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_new_default(out: *mut *mut TeleopEngine) -> TeleopStatus {
    guard(|| {
        let out = deref!(out);
        install(EngineConfig::default(), out)
    })
}

/// Creates an engine from a NUL-terminated TOML config.
///
/// # Safety
/// `toml` must be null or a valid C string; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_new_from_toml(
    toml: *const c_char,
    out: *mut *mut TeleopEngine,
) -> TeleopStatus {
    guard(|| {
        let out = deref!(out);
        if toml.is_null() {
            return fail(TeleopStatus::NullPointer, "toml is null");
        }
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(TeleopStatus::InvalidConfig, "config is not UTF-8");
        };
        match EngineConfig::from_toml_str(text) {
            Ok(cfg) => install(cfg, out),
            Err(e) => fail(TeleopStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or a handle from `teleop_engine_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_free(engine: *mut TeleopEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Queues one encoded PoseFrame or ControllerFrame arriving at `arrival_us`.
///
/// # Safety
/// `engine` must be a live handle; `bytes` must be valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_push_frame(
    engine: *mut TeleopEngine,
    arrival_us: u64,
    bytes: *const u8,
    len: usize,
) -> TeleopStatus {
    guard(|| {
        let e = deref!(engine);
        if bytes.is_null() {
            return fail(TeleopStatus::NullPointer, "bytes is null");
        }
        match InputFrame::decode(std::slice::from_raw_parts(bytes, len)) {
            Ok(frame) => {
                e.engine.push_input(arrival_us, frame);
                TeleopStatus::Ok
            }
            Err(err) => fail(TeleopStatus::DecodeFailed, err.to_string()),
        }
    })
}

/// Runs every tick scheduled at or before `t_us`. `ticks_run`, when not
/// null, receives the number of ticks executed by this call.
///
/// # Safety
/// `engine` must be a live handle; `ticks_run` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_advance_to(
    engine: *mut TeleopEngine,
    t_us: u64,
    ticks_run: *mut u64,
) -> TeleopStatus {
    guard(|| {
        let e = deref!(engine);
        let mut latest = None;
        let n = e.engine.advance_to(t_us, |out| {
            if out.anchors.is_some() {
                latest = out.anchors;
            }
        });
        if latest.is_some() {
            e.anchors = latest;
        }
        if let Some(out) = ticks_run.as_mut() {
            *out = n;
        }
        TeleopStatus::Ok
    })
}

/// Time of the next tick, microseconds.
///
/// # Safety
/// `engine` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_next_tick_time_us(
    engine: *const TeleopEngine,
    out: *mut u64,
) -> TeleopStatus {
    guard(|| {
        let e = deref_ref!(engine);
        *deref!(out) = e.engine.next_tick_time_us();
        TeleopStatus::Ok
    })
}

fn to_c(cmd: &EndEffectorCommand) -> TeleopCommand {
    TeleopCommand {
        side: cmd.side.index() as u8,
        position: cmd.position.into(),
        orientation: cmd.orientation.to_array(),
        grip_close: cmd.grip_close,
        clamped: cmd.clamped,
        timestamp_us: cmd.timestamp_us,
    }
}

/// Most recent command for arm `side` (0 left, 1 right).
///
/// # Safety
/// `engine` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_latest_command(
    engine: *const TeleopEngine,
    side: u8,
    out: *mut TeleopCommand,
) -> TeleopStatus {
    guard(|| {
        let e = deref_ref!(engine);
        let side = try_status!(arm(side));
        *deref!(out) = to_c(e.engine.latest_command(side));
        TeleopStatus::Ok
    })
}

/// The (arm, eye) record of the most recent anchor emission.
///
/// # Safety
/// `engine` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_latest_anchor(
    engine: *const TeleopEngine,
    arm_side: u8,
    eye_side: u8,
    out: *mut TeleopAnchor,
) -> TeleopStatus {
    guard(|| {
        let e = deref_ref!(engine);
        let (a, y) = (try_status!(arm(arm_side)), try_status!(eye(eye_side)));
        let Some(batch) = &e.anchors else {
            return fail(TeleopStatus::NotReady, "no anchors emitted yet");
        };
        let p = batch
            .placements
            .iter()
            .find(|p| p.arm == a && p.eye == y)
            .expect("each batch covers every arm and eye");
        *deref!(out) = TeleopAnchor {
            time_us: batch.time_us,
            arm: arm_side,
            eye: eye_side,
            anchor: p.anchor.into(),
            panel_center: p.panel_center.into(),
            panel_scale: p.panel_scale,
            visible: p.visible,
            behind_camera: p.behind_camera,
        };
        TeleopStatus::Ok
    })
}

/// Projects a point in the virtual camera frame onto the engine's
/// `z = f_w` plane.
///
/// # Safety
/// `engine` must be a live handle; `point` must be valid for 3 reads and
/// `out` for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_engine_anchor_project(
    engine: *const TeleopEngine,
    point: *const f64,
    out: *mut f64,
) -> TeleopStatus {
    guard(|| {
        let e = deref_ref!(engine);
        if point.is_null() || out.is_null() {
            return fail(TeleopStatus::NullPointer, "point or out is null");
        }
        let p = std::slice::from_raw_parts(point, 3);
        match anchor_project(&Vec3::new(p[0], p[1], p[2]), &e.engine.config().perception) {
            Ok(a) => {
                std::slice::from_raw_parts_mut(out, 3).copy_from_slice(a.as_slice());
                TeleopStatus::Ok
            }
            Err(err) => fail(TeleopStatus::BehindCamera, err.to_string()),
        }
    })
}

/// Per-axis workspace scaling for the given calibration, written to `out[0..3]`.
///
/// # Safety
/// `out` must be valid for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_compute_scaling(
    r_h: f64,
    d_h: f64,
    r_c: f64,
    d_c: f64,
    out: *mut f64,
) -> TeleopStatus {
    guard(|| {
        if out.is_null() {
            return fail(TeleopStatus::NullPointer, "out is null");
        }
        match compute_scaling(r_h, d_h, r_c, d_c) {
            Ok(s) => {
                std::slice::from_raw_parts_mut(out, 3).copy_from_slice(s.as_slice());
                TeleopStatus::Ok
            }
            Err(e) => fail(TeleopStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Encodes `cmd` as a CommandFrame into `buf`, which must hold
/// `TELEOP_COMMAND_FRAME_LEN` bytes.
///
/// # Safety
/// `cmd` must be valid for reads; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_encode_command(
    cmd: *const TeleopCommand,
    buf: *mut u8,
    len: usize,
) -> TeleopStatus {
    guard(|| {
        let c = deref_ref!(cmd);
        if buf.is_null() {
            return fail(TeleopStatus::NullPointer, "buf is null");
        }
        if len < COMMAND_FRAME_LEN {
            return fail(
                TeleopStatus::BufferTooSmall,
                format!("need {COMMAND_FRAME_LEN} bytes, got {len}"),
            );
        }
        let side = try_status!(arm(c.side));
        let orientation = match UnitQuat::from_array(c.orientation) {
            Ok(q) => q,
            Err(e) => return fail(TeleopStatus::InvalidArgument, e.to_string()),
        };
        let frame = CommandFrame::from_command(&EndEffectorCommand {
            side,
            position: Vec3::from(c.position),
            orientation,
            grip_close: c.grip_close,
            clamped: c.clamped,
            timestamp_us: c.timestamp_us,
        });
        let bytes = frame.encode();
        // a frame the decoder rejects must not leave the boundary
        if let Err(e) = CommandFrame::decode(&bytes) {
            return fail(TeleopStatus::InvalidArgument, e.to_string());
        }
        std::slice::from_raw_parts_mut(buf, len)[..COMMAND_FRAME_LEN].copy_from_slice(&bytes);
        TeleopStatus::Ok
    })
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to fit. Returns the full message length
/// without the terminator, so a caller can size a buffer by passing `len = 0`.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn teleop_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            let out = std::slice::from_raw_parts_mut(buf as *mut u8, len);
            out[..n].copy_from_slice(&msg.as_bytes()[..n]);
            out[n] = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn teleop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
