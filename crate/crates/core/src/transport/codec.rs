//! Fixed-width little-endian frame codecs.
//!
//! ```text
//! PoseFrame        "CFP1" side:u8 ts:u64 pos:3xf64 quat(w,x,y,z):4xf64         69 bytes
//! ControllerFrame  "CFC1" side:u8 ts:u64 buttons:u8 u1:f32 u2:f32              22 bytes
//! CommandFrame     "CFO1" side:u8 ts:u64 pos:3xf64 quat:4xf64 grip:u8 clamp:u8 71 bytes
//! ```
//!
//! Frames keep their floats exactly as decoded so that `decode(encode(x))`
//! is bit-identical.

use thiserror::Error;

use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::retarget::{ArmSide, ControllerState, EndEffectorCommand, HandPoseSample};

pub const POSE_MAGIC: [u8; 4] = *b"CFP1";
pub const CONTROLLER_MAGIC: [u8; 4] = *b"CFC1";
pub const COMMAND_MAGIC: [u8; 4] = *b"CFO1";

pub const POSE_FRAME_LEN: usize = 69;
pub const CONTROLLER_FRAME_LEN: usize = 22;
pub const COMMAND_FRAME_LEN: usize = 71;

pub const BUTTON_MODE_HOLD: u8 = 1 << 0;
pub const BUTTON_VIS_TOGGLE: u8 = 1 << 1;
pub const BUTTON_GRIP: u8 = 1 << 2;

/// Accepted deviation of a decoded quaternion norm from one.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("short frame: need {expected} bytes, got {got}")]
    ShortFrame { expected: usize, got: usize },
    #[error("frame has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("unknown magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("invalid side byte {0}")]
    BadSide(u8),
    #[error("non-finite value in field {0}")]
    NonFinite(&'static str),
    #[error("quaternion norm {0} outside tolerance")]
    BadQuaternion(f64),
    #[error("reserved button bits set: {0:#04x}")]
    ReservedBits(u8),
    #[error("flag byte {field} must be 0 or 1, got {value}")]
    BadFlag { field: &'static str, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFrame {
    pub side: ArmSide,
    pub timestamp_us: u64,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerFrame {
    pub side: ArmSide,
    pub timestamp_us: u64,
    pub buttons: u8,
    pub u1: f32,
    pub u2: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandFrame {
    pub side: ArmSide,
    pub timestamp_us: u64,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub grip: bool,
    pub clamped: bool,
}

/// Either input frame, as it arrives on the wire or in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputFrame {
    Pose(PoseFrame),
    Controller(ControllerFrame),
}

impl InputFrame {
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        match magic_of(bytes)? {
            POSE_MAGIC => PoseFrame::decode(bytes).map(InputFrame::Pose),
            CONTROLLER_MAGIC => ControllerFrame::decode(bytes).map(InputFrame::Controller),
            other => Err(DecodeError::BadMagic(other)),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            InputFrame::Pose(f) => f.encode().to_vec(),
            InputFrame::Controller(f) => f.encode().to_vec(),
        }
    }

    pub fn side(&self) -> ArmSide {
        match self {
            InputFrame::Pose(f) => f.side,
            InputFrame::Controller(f) => f.side,
        }
    }

    pub fn timestamp_us(&self) -> u64 {
        match self {
            InputFrame::Pose(f) => f.timestamp_us,
            InputFrame::Controller(f) => f.timestamp_us,
        }
    }
}

fn magic_of(bytes: &[u8]) -> Result<[u8; 4], DecodeError> {
    bytes
        .get(..4)
        .map(|m| [m[0], m[1], m[2], m[3]])
        .ok_or(DecodeError::ShortFrame {
            expected: 4,
            got: bytes.len(),
        })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], magic: [u8; 4], len: usize) -> Result<Self, DecodeError> {
        let found = magic_of(buf)?;
        if found != magic {
            return Err(DecodeError::BadMagic(found));
        }
        if buf.len() < len {
            return Err(DecodeError::ShortFrame {
                expected: len,
                got: buf.len(),
            });
        }
        if buf.len() > len {
            return Err(DecodeError::TrailingBytes {
                extra: buf.len() - len,
            });
        }
        Ok(Reader { buf, pos: 4 })
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self, field: &'static str) -> Result<f64, DecodeError> {
        let v = f64::from_le_bytes(self.take());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DecodeError::NonFinite(field))
        }
    }

    fn f32(&mut self, field: &'static str) -> Result<f32, DecodeError> {
        let v = f32::from_le_bytes(self.take());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DecodeError::NonFinite(field))
        }
    }

    fn side(&mut self) -> Result<ArmSide, DecodeError> {
        let b = self.u8();
        ArmSide::from_index(b).ok_or(DecodeError::BadSide(b))
    }

    fn flag(&mut self, field: &'static str) -> Result<bool, DecodeError> {
        match self.u8() {
            0 => Ok(false),
            1 => Ok(true),
            value => Err(DecodeError::BadFlag { field, value }),
        }
    }

    fn position(&mut self) -> Result<[f64; 3], DecodeError> {
        Ok([self.f64("position.x")?, self.f64("position.y")?, self.f64("position.z")?])
    }

    fn quaternion(&mut self) -> Result<[f64; 4], DecodeError> {
        let q = [
            self.f64("orientation.w")?,
            self.f64("orientation.x")?,
            self.f64("orientation.y")?,
            self.f64("orientation.z")?,
        ];
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(DecodeError::BadQuaternion(norm));
        }
        Ok(q)
    }
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn side_byte(side: ArmSide) -> u8 {
    side.index() as u8
}

impl PoseFrame {
    pub fn encode(&self) -> [u8; POSE_FRAME_LEN] {
        let mut out = Vec::with_capacity(POSE_FRAME_LEN);
        out.extend_from_slice(&POSE_MAGIC);
        out.push(side_byte(self.side));
        out.extend_from_slice(&self.timestamp_us.to_le_bytes());
        put_f64s(&mut out, &self.position);
        put_f64s(&mut out, &self.orientation);
        out.try_into().expect("pose frame length")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes, POSE_MAGIC, POSE_FRAME_LEN)?;
        Ok(PoseFrame {
            side: r.side()?,
            timestamp_us: r.u64(),
            position: r.position()?,
            orientation: r.quaternion()?,
        })
    }

    pub fn from_sample(sample: &HandPoseSample) -> Self {
        let p = sample.pose.position;
        PoseFrame {
            side: sample.side,
            timestamp_us: sample.timestamp_us,
            position: [p.x, p.y, p.z],
            orientation: sample.pose.orientation.to_array(),
        }
    }

    pub fn to_sample(&self) -> HandPoseSample {
        let orientation = UnitQuat::from_array(self.orientation)
            .expect("decoded quaternions are within tolerance");
        HandPoseSample {
            side: self.side,
            pose: Pose::new(Vec3::from(self.position), orientation),
            timestamp_us: self.timestamp_us,
        }
    }
}

impl ControllerFrame {
    pub fn encode(&self) -> [u8; CONTROLLER_FRAME_LEN] {
        let mut out = [0u8; CONTROLLER_FRAME_LEN];
        out[..4].copy_from_slice(&CONTROLLER_MAGIC);
        out[4] = side_byte(self.side);
        out[5..13].copy_from_slice(&self.timestamp_us.to_le_bytes());
        out[13] = self.buttons;
        out[14..18].copy_from_slice(&self.u1.to_le_bytes());
        out[18..22].copy_from_slice(&self.u2.to_le_bytes());
        out
    }

    /// Deflections outside `[-1, 1]` are clamped.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes, CONTROLLER_MAGIC, CONTROLLER_FRAME_LEN)?;
        let side = r.side()?;
        let timestamp_us = r.u64();
        let buttons = r.u8();
        if buttons & !(BUTTON_MODE_HOLD | BUTTON_VIS_TOGGLE | BUTTON_GRIP) != 0 {
            return Err(DecodeError::ReservedBits(buttons));
        }
        Ok(ControllerFrame {
            side,
            timestamp_us,
            buttons,
            u1: r.f32("u1")?.clamp(-1.0, 1.0),
            u2: r.f32("u2")?.clamp(-1.0, 1.0),
        })
    }

    pub fn from_state(state: &ControllerState) -> Self {
        let mut buttons = 0;
        if state.mode_hold {
            buttons |= BUTTON_MODE_HOLD;
        }
        if state.vis_toggle {
            buttons |= BUTTON_VIS_TOGGLE;
        }
        if state.grip_close {
            buttons |= BUTTON_GRIP;
        }
        ControllerFrame {
            side: state.side,
            timestamp_us: state.timestamp_us,
            buttons,
            u1: state.u1 as f32,
            u2: state.u2 as f32,
        }
    }

    pub fn to_state(&self) -> ControllerState {
        ControllerState {
            side: self.side,
            mode_hold: self.buttons & BUTTON_MODE_HOLD != 0,
            vis_toggle: self.buttons & BUTTON_VIS_TOGGLE != 0,
            u1: self.u1 as f64,
            u2: self.u2 as f64,
            grip_close: self.buttons & BUTTON_GRIP != 0,
            timestamp_us: self.timestamp_us,
        }
        .clamped()
    }
}

impl CommandFrame {
    pub fn encode(&self) -> [u8; COMMAND_FRAME_LEN] {
        let mut out = Vec::with_capacity(COMMAND_FRAME_LEN);
        out.extend_from_slice(&COMMAND_MAGIC);
        out.push(side_byte(self.side));
        out.extend_from_slice(&self.timestamp_us.to_le_bytes());
        put_f64s(&mut out, &self.position);
        put_f64s(&mut out, &self.orientation);
        out.push(self.grip as u8);
        out.push(self.clamped as u8);
        out.try_into().expect("command frame length")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes, COMMAND_MAGIC, COMMAND_FRAME_LEN)?;
        Ok(CommandFrame {
            side: r.side()?,
            timestamp_us: r.u64(),
            position: r.position()?,
            orientation: r.quaternion()?,
            grip: r.flag("grip")?,
            clamped: r.flag("clamped")?,
        })
    }

    pub fn from_command(cmd: &EndEffectorCommand) -> Self {
        let p = cmd.position;
        CommandFrame {
            side: cmd.side,
            timestamp_us: cmd.timestamp_us,
            position: [p.x, p.y, p.z],
            orientation: cmd.orientation.to_array(),
            grip: cmd.grip_close,
            clamped: cmd.clamped,
        }
    }
}
