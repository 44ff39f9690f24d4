//! Gripper-anchored placement of wrist-camera panels.
//!
//! Each gripper position is carried into each eye-camera frame, converted into
//! the left-handed virtual scene frame and projected onto the wrist-view
//! imaging plane at focal length `f_w`. Panels sit at a fixed in-plane
//! offset from that anchor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{delta_r_pitch, FrameChange, RotMat, Vec3};
use crate::retarget::{ArmSide, ControllerState, EndEffectorCommand, RigConfig, Sided};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeSide {
    Left,
    Right,
}

impl EyeSide {
    pub const ALL: [EyeSide; 2] = [EyeSide::Left, EyeSide::Right];
}

impl<T> std::ops::Index<EyeSide> for Sided<T> {
    type Output = T;
    fn index(&self, side: EyeSide) -> &T {
        match side {
            EyeSide::Left => &self.left,
            EyeSide::Right => &self.right,
        }
    }
}

impl<T> std::ops::IndexMut<EyeSide> for Sided<T> {
    fn index_mut(&mut self, side: EyeSide) -> &mut T {
        match side {
            EyeSide::Left => &mut self.left,
            EyeSide::Right => &mut self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutMode {
    /// Panels anchored next to the projected gripper, shown on demand.
    #[default]
    Situated,
    /// Panels at fixed screen positions, always shown.
    Static,
    /// No wrist views.
    None,
}

impl std::str::FromStr for LayoutMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "situated" => Ok(LayoutMode::Situated),
            "static" => Ok(LayoutMode::Static),
            "none" => Ok(LayoutMode::None),
            other => Err(format!(
                "unknown layout {other:?} (expected situated, static or none)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Rotation from the neck base frame to the neck end (eye camera) frame.
    pub neck_rotation: RotMat,
    /// Per-arm translation into the neck base frame.
    pub arm_to_neck: Sided<Vec3>,
    /// Per-eye translation into the eye frame.
    pub eye_offset: Sided<Vec3>,
    /// Right-handed camera frame to left-handed virtual frame.
    pub camera_to_virtual: FrameChange,
    /// Primary (eye) imaging plane focal length.
    pub f_e: f64,
    /// Wrist-view imaging plane focal length, `0 < f_w < f_e`.
    pub f_w: f64,
    pub panel_offset: [f64; 2],
    pub panel_scale: f64,
    /// Per-arm panel positions used by the static layout, on the `f_w` plane.
    pub static_positions: Sided<[f64; 2]>,
    /// Anchors closer than this to the virtual camera plane are rejected.
    pub behind_camera_epsilon: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        // forward-left-up neck base to right-down-forward camera, pitched 30° down
        let axes = RotMat::from_rows([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
            .expect("axis permutation is a rotation");
        let neck_rotation = axes * delta_r_pitch(-30f64.to_radians());
        let f_w = 0.5;
        PerceptionConfig {
            neck_rotation,
            arm_to_neck: Sided::new(Vec3::new(0.0, 0.25, -0.30), Vec3::new(0.0, -0.25, -0.30)),
            eye_offset: Sided::new(Vec3::new(0.06, 0.0, 0.0), Vec3::new(-0.06, 0.0, 0.0)),
            camera_to_virtual: FrameChange::from_rows([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
                .expect("axis negation is orthonormal"),
            f_e: 1.0,
            f_w,
            panel_offset: [0.06 * f_w, 0.04 * f_w],
            panel_scale: 0.35,
            static_positions: Sided::new([-0.25, -0.18], [0.25, -0.18]),
            behind_camera_epsilon: 1e-4,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.f_w > 0.0 && self.f_w < self.f_e) {
            return Err(format!(
                "perception focal lengths must satisfy 0 < f_w < f_e, got f_w={} f_e={}",
                self.f_w, self.f_e
            ));
        }
        if !(self.panel_scale > 0.0) {
            return Err(format!("perception.panel_scale must be positive, got {}", self.panel_scale));
        }
        if !(self.behind_camera_epsilon > 0.0) {
            return Err("perception.behind_camera_epsilon must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("point at depth {z} is behind the virtual camera")]
pub struct BehindCamera {
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPlacement {
    pub arm: ArmSide,
    pub eye: EyeSide,
    /// Projected gripper position on the `z = f_w` plane.
    pub anchor: Vec3,
    pub panel_center: Vec3,
    pub panel_scale: f64,
    pub visible: bool,
    /// The gripper projected behind the camera; `anchor` is the last valid one.
    pub behind_camera: bool,
}

/// Gripper position expressed in one eye-camera frame.
pub fn gripper_in_eye(
    cmd_position: &Vec3,
    arm: ArmSide,
    eye: EyeSide,
    rig: &RigConfig,
    pc: &PerceptionConfig,
) -> Vec3 {
    let in_world = &rig.arms[arm].base_rotation.transpose() * cmd_position;
    pc.neck_rotation * (in_world + pc.arm_to_neck[arm]) + pc.eye_offset[eye]
}

pub fn to_virtual_frame(p_eye: &Vec3, pc: &PerceptionConfig) -> Vec3 {
    &pc.camera_to_virtual * p_eye
}

/// Perspective projection onto the wrist-view plane.
pub fn anchor_project(p_u: &Vec3, pc: &PerceptionConfig) -> Result<Vec3, BehindCamera> {
    if !(p_u.z > pc.behind_camera_epsilon) {
        return Err(BehindCamera { z: p_u.z });
    }
    Ok(Vec3::new(
        p_u.x * pc.f_w / p_u.z,
        p_u.y * pc.f_w / p_u.z,
        pc.f_w,
    ))
}

/// Per-arm wrist-view visibility, flipped on button rising edges.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VisibilityState {
    pub visible: Sided<bool>,
    #[serde(skip)]
    prev_button: Sided<bool>,
}

impl VisibilityState {
    /// Returns whether the arm's flag flipped.
    pub fn toggle_visibility(&mut self, ctrl: &ControllerState) -> bool {
        let side = ctrl.side;
        let rising = ctrl.vis_toggle && !self.prev_button[side];
        self.prev_button[side] = ctrl.vis_toggle;
        if rising {
            self.visible[side] = !self.visible[side];
        }
        rising
    }
}

/// Computes the four (arm, eye) placements, remembering the last valid anchor
/// per pair for the behind-camera fallback.
#[derive(Debug, Clone, Default)]
pub struct PanelPlacer {
    last_valid: [[Option<Vec3>; 2]; 2],
}

impl PanelPlacer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Placements in arm-major order: (L,L), (L,R), (R,L), (R,R).
    pub fn place_panels(
        &mut self,
        commands: &Sided<EndEffectorCommand>,
        vis: &VisibilityState,
        rig: &RigConfig,
        pc: &PerceptionConfig,
        layout: LayoutMode,
    ) -> [AnchorPlacement; 4] {
        let offset = Vec3::new(pc.panel_offset[0], pc.panel_offset[1], 0.0);
        let mut out = [AnchorPlacement {
            arm: ArmSide::Left,
            eye: EyeSide::Left,
            anchor: Vec3::new(0.0, 0.0, pc.f_w),
            panel_center: Vec3::new(0.0, 0.0, pc.f_w) + offset,
            panel_scale: pc.panel_scale,
            visible: false,
            behind_camera: false,
        }; 4];
        for (ai, arm) in ArmSide::ALL.into_iter().enumerate() {
            for (ei, eye) in EyeSide::ALL.into_iter().enumerate() {
                let slot = &mut out[ai * 2 + ei];
                slot.arm = arm;
                slot.eye = eye;
                match layout {
                    LayoutMode::None => {}
                    LayoutMode::Static => {
                        let [x, y] = pc.static_positions[arm];
                        slot.anchor = Vec3::new(x, y, pc.f_w);
                        slot.panel_center = slot.anchor;
                        slot.visible = true;
                    }
                    LayoutMode::Situated => {
                        let p_eye = gripper_in_eye(&commands[arm].position, arm, eye, rig, pc);
                        let p_u = to_virtual_frame(&p_eye, pc);
                        let last = &mut self.last_valid[ai][ei];
                        match anchor_project(&p_u, pc) {
                            Ok(anchor) => {
                                *last = Some(anchor);
                                slot.anchor = anchor;
                            }
                            Err(_) => {
                                slot.behind_camera = true;
                                slot.anchor = last.unwrap_or(slot.anchor);
                            }
                        }
                        slot.panel_center = slot.anchor + offset;
                        slot.visible = vis.visible[arm];
                    }
                }
            }
        }
        out
    }
}
