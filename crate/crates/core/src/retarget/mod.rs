//! Hand-pose to end-effector retargeting.
//!
//! Natural mode scales the shoulder-relative hand position and aligns the hand
//! orientation. Holding the mode button freezes the orientation and lets the
//! thumbstick apply in-plane and pitch increments; on release the gripper
//! rotates back toward the live hand orientation at a constant rate.

mod machine;

pub use machine::{ArmInput, ArmState, ArmTick, RetargetMode, RetargetState, Retargeter};

use serde::{Deserialize, Serialize};

use crate::geometry::{
    delta_r_inplane, delta_r_pitch, geodesic_distance, hadamard_scale, slerp_step, Pose, RotMat,
    UnitQuat, Vec3,
};
use crate::workspace::{WorkspaceModel, WorkspaceSphere};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    pub const ALL: [ArmSide; 2] = [ArmSide::Left, ArmSide::Right];

    pub fn index(self) -> usize {
        match self {
            ArmSide::Left => 0,
            ArmSide::Right => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<ArmSide> {
        match i {
            0 => Some(ArmSide::Left),
            1 => Some(ArmSide::Right),
            _ => None,
        }
    }
}

/// A left/right pair. Indexable by [`ArmSide`] and by
/// [`EyeSide`](crate::perception::EyeSide).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sided<T> {
    pub left: T,
    pub right: T,
}

impl<T> Sided<T> {
    pub fn new(left: T, right: T) -> Self {
        Sided { left, right }
    }

    pub fn from_fn(mut f: impl FnMut(ArmSide) -> T) -> Self {
        Sided {
            left: f(ArmSide::Left),
            right: f(ArmSide::Right),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Sided<U> {
        Sided {
            left: f(&self.left),
            right: f(&self.right),
        }
    }
}

impl<T> std::ops::Index<ArmSide> for Sided<T> {
    type Output = T;
    fn index(&self, side: ArmSide) -> &T {
        match side {
            ArmSide::Left => &self.left,
            ArmSide::Right => &self.right,
        }
    }
}

impl<T> std::ops::IndexMut<ArmSide> for Sided<T> {
    fn index_mut(&mut self, side: ArmSide) -> &mut T {
        match side {
            ArmSide::Left => &mut self.left,
            ArmSide::Right => &mut self.right,
        }
    }
}

/// Hand pose relative to the operator's shoulder frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandPoseSample {
    pub side: ArmSide,
    pub pose: Pose,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub side: ArmSide,
    pub mode_hold: bool,
    pub vis_toggle: bool,
    pub u1: f64,
    pub u2: f64,
    pub grip_close: bool,
    pub timestamp_us: u64,
}

impl ControllerState {
    /// Released buttons and a centered stick.
    pub fn idle(side: ArmSide) -> Self {
        ControllerState {
            side,
            mode_hold: false,
            vis_toggle: false,
            u1: 0.0,
            u2: 0.0,
            grip_close: false,
            timestamp_us: 0,
        }
    }

    /// Returns the state with both deflections clamped to `[-1, 1]`.
    /// Non-finite deflections become zero.
    pub fn clamped(mut self) -> Self {
        let clamp = |u: f64| if u.is_finite() { u.clamp(-1.0, 1.0) } else { 0.0 };
        self.u1 = clamp(self.u1);
        self.u2 = clamp(self.u2);
        self
    }
}

/// Mounting of one robot arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmMount {
    /// Rotation from the shoulder-aligned frame into the tilted arm base frame.
    pub base_rotation: RotMat,
    /// Translation of the arm base transform.
    pub base_translation: Vec3,
    /// Position commanded before the first hand sample arrives.
    pub home_position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub arms: Sided<ArmMount>,
    /// Constant alignment from hand frame to gripper frame.
    pub hand_to_ee: RotMat,
    /// In-plane rate at full horizontal deflection, rad/s.
    pub s1: f64,
    /// Pitch rate at full vertical deflection, rad/s.
    pub s2: f64,
    /// Recovery angular velocity, rad/s.
    pub omega_rec: f64,
    /// Recovery ends once the remaining rotation is below this angle, rad.
    pub theta_term: f64,
    pub deadzone: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        let mount = ArmMount {
            base_rotation: RotMat::IDENTITY,
            base_translation: Vec3::zeros(),
            home_position: Vec3::new(0.45, 0.0, -0.20),
        };
        RigConfig {
            arms: Sided::new(mount, mount),
            // gripper approach (z) along the hand's forward (x) axis
            hand_to_ee: delta_r_pitch(std::f64::consts::FRAC_PI_2),
            s1: 1.0,
            s2: 1.0,
            omega_rec: std::f64::consts::FRAC_PI_2,
            theta_term: 0.02,
            deadzone: 0.08,
        }
    }
}

impl RigConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [("s1", self.s1), ("s2", self.s2), ("omega_rec", self.omega_rec)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("rig.{name} must be positive, got {v}"));
            }
        }
        if !(self.theta_term > 0.0 && self.theta_term < std::f64::consts::PI) {
            return Err(format!("rig.theta_term must be in (0, π), got {}", self.theta_term));
        }
        if !(0.0..1.0).contains(&self.deadzone) {
            return Err(format!("rig.deadzone must be in [0, 1), got {}", self.deadzone));
        }
        Ok(())
    }

    /// Reachable sphere of one arm, in that arm's base frame.
    pub fn robot_sphere(&self, side: ArmSide, ws: &WorkspaceModel) -> WorkspaceSphere {
        WorkspaceSphere {
            origin: self.arms[side].base_translation,
            radius: ws.robot_radius(),
        }
    }

    pub fn home_command(&self, side: ArmSide) -> EndEffectorCommand {
        let orientation =
            UnitQuat::from_rotation(&(self.arms[side].base_rotation * self.hand_to_ee));
        EndEffectorCommand {
            side,
            position: self.arms[side].home_position,
            orientation,
            grip_close: false,
            clamped: false,
            timestamp_us: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmMode {
    Natural,
    JoystickAssisted,
    Recovering,
    /// Relative baseline: commands follow hand deltas from the engage pose.
    Engaged,
    /// Relative baseline: commands are frozen.
    Disengaged,
}

/// Position, orientation and gripper command for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorCommand {
    pub side: ArmSide,
    pub position: Vec3,
    pub orientation: UnitQuat,
    pub grip_close: bool,
    pub clamped: bool,
    pub timestamp_us: u64,
}

/// Scale in the shoulder frame, then move into the arm base frame.
pub fn natural_position(hand: &HandPoseSample, ws: &WorkspaceModel, rig: &RigConfig) -> Vec3 {
    let mount = &rig.arms[hand.side];
    let scaled = hadamard_scale(&ws.scaling(), &hand.pose.position);
    mount.base_rotation * scaled + mount.base_translation
}

/// `R_base · R_hand · R_hand_to_ee`.
pub fn natural_orientation(hand: &HandPoseSample, rig: &RigConfig) -> UnitQuat {
    let m = rig.arms[hand.side].base_rotation * hand.pose.orientation.to_rotation() * rig.hand_to_ee;
    UnitQuat::from_rotation(&m)
}

/// Dead-zone with rescaling so the output still spans `[-1, 1]`.
pub fn apply_deadzone(u: f64, deadzone: f64) -> f64 {
    let mag = u.abs();
    if mag <= deadzone {
        0.0
    } else {
        u.signum() * ((mag - deadzone) / (1.0 - deadzone)).min(1.0)
    }
}

/// One thumbstick increment: `held · ΔR_pitch(θ2) · ΔR_inplane(θ1)`.
pub fn joystick_update(
    held: &UnitQuat,
    ctrl: &ControllerState,
    rig: &RigConfig,
    dt: f64,
) -> UnitQuat {
    let theta1 = rig.s1 * apply_deadzone(ctrl.u1, rig.deadzone) * dt;
    let theta2 = rig.s2 * apply_deadzone(ctrl.u2, rig.deadzone) * dt;
    if theta1 == 0.0 && theta2 == 0.0 {
        return *held;
    }
    let pitch = UnitQuat::from_rotation(&delta_r_pitch(theta2));
    let inplane = UnitQuat::from_rotation(&delta_r_inplane(theta1));
    *held * pitch * inplane
}

/// One recovery tick toward the live hand-derived orientation.
///
/// Returns the next orientation and whether the remaining rotation has
/// dropped below `theta_term`.
pub fn recovery_step(
    held: &UnitQuat,
    hand: &HandPoseSample,
    rig: &RigConfig,
    dt: f64,
) -> (UnitQuat, bool) {
    let target = natural_orientation(hand, rig);
    if geodesic_distance(held, &target) < rig.theta_term {
        return (*held, true);
    }
    let (next, reached) = slerp_step(held, &target, rig.omega_rec, dt);
    let done = reached || geodesic_distance(&next, &target) < rig.theta_term;
    (next, done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Matrix4};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn quat() -> impl Strategy<Value = UnitQuat> {
        (prop::array::uniform3(-1.0f64..1.0), -PI..PI)
            .prop_filter("axis", |(a, _)| Vec3::from(*a).norm() > 1e-3)
            .prop_map(|(a, t)| UnitQuat::from_axis_angle(&Vec3::from(a), t))
    }

    fn hand(side: ArmSide, p: Vec3, q: UnitQuat) -> HandPoseSample {
        HandPoseSample {
            side,
            pose: Pose::new(p, q),
            timestamp_us: 0,
        }
    }

    fn identity_rig() -> RigConfig {
        let mut rig = RigConfig {
            hand_to_ee: RotMat::IDENTITY,
            deadzone: 0.0,
            ..RigConfig::default()
        };
        for side in ArmSide::ALL {
            rig.arms[side].base_rotation = RotMat::IDENTITY;
            rig.arms[side].base_translation = Vec3::zeros();
        }
        rig
    }

    #[test]
    fn natural_position_examples() {
        let rig = identity_rig();
        let unit = WorkspaceModel::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let p = Vec3::new(0.3, 0.2, 0.1);
        let h = hand(ArmSide::Left, p, UnitQuat::IDENTITY);
        assert_eq!(natural_position(&h, &unit, &rig), p);

        let ws = WorkspaceModel::new(1.0, 0.4, 0.8, 0.4).unwrap();
        let h = hand(ArmSide::Right, Vec3::new(1.0, 1.0, 1.0), UnitQuat::IDENTITY);
        let out = natural_position(&h, &ws, &rig);
        assert!((out - Vec3::new(0.8, 1.0, 0.8)).amax() < 1e-15);
    }

    #[test]
    fn natural_orientation_examples() {
        let rig = identity_rig();
        let h = hand(ArmSide::Left, Vec3::zeros(), UnitQuat::IDENTITY);
        assert_eq!(natural_orientation(&h, &rig), UnitQuat::IDENTITY);
        let z90 = UnitQuat::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        let h = hand(ArmSide::Left, Vec3::zeros(), z90);
        assert!(geodesic_distance(&natural_orientation(&h, &rig), &z90) < 1e-12);
    }

    #[test]
    fn deadzone_rescales() {
        assert_eq!(apply_deadzone(0.05, 0.08), 0.0);
        assert_eq!(apply_deadzone(1.0, 0.08), 1.0);
        assert_eq!(apply_deadzone(-1.0, 0.08), -1.0);
        assert!((apply_deadzone(0.54, 0.08) - 0.5).abs() < 1e-15);
        assert_eq!(apply_deadzone(0.3, 0.0), 0.3);
    }

    #[test]
    fn joystick_examples() {
        let rig = RigConfig {
            s1: 1.0,
            ..identity_rig()
        };
        let held = UnitQuat::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.4);
        let mut c = ControllerState::idle(ArmSide::Left);
        assert_eq!(joystick_update(&held, &c, &rig, 0.1), held);
        c.u1 = 1.0;
        let out = joystick_update(&held, &c, &rig, 0.1).to_rotation();
        let expect = held.to_rotation() * delta_r_inplane(0.1);
        assert!((out.matrix() - expect.matrix()).amax() < 1e-12);
    }

    #[test]
    fn joystick_fold_matches_matrix_product() {
        let rig = RigConfig {
            s1: 0.7,
            s2: 1.3,
            ..identity_rig()
        };
        let mut seed = 0x2545_f491_4f6c_dd1du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..50 {
            let mut q = UnitQuat::from_axis_angle(&Vec3::new(next(), next(), next() + 2.0), next() * 3.0);
            let mut m: Matrix3<f64> = *q.to_rotation().matrix();
            let dt = 1.0 / 60.0;
            for _ in 0..120 {
                let mut c = ControllerState::idle(ArmSide::Right);
                c.u1 = next();
                c.u2 = next();
                q = joystick_update(&q, &c, &rig, dt);
                let t1 = rig.s1 * c.u1 * dt;
                let t2 = rig.s2 * c.u2 * dt;
                let ry = Matrix3::new(t2.cos(), 0.0, t2.sin(), 0.0, 1.0, 0.0, -t2.sin(), 0.0, t2.cos());
                let rz = Matrix3::new(t1.cos(), -t1.sin(), 0.0, t1.sin(), t1.cos(), 0.0, 0.0, 0.0, 1.0);
                m = m * ry * rz;
            }
            assert!((q.to_rotation().matrix() - m).amax() < 1e-10);
        }
    }

    #[test]
    fn recovery_within_threshold_is_immediate() {
        let rig = identity_rig();
        let target = UnitQuat::from_axis_angle(&Vec3::x(), 0.5);
        let held = target * UnitQuat::from_axis_angle(&Vec3::y(), rig.theta_term * 0.5);
        let h = hand(ArmSide::Left, Vec3::zeros(), target);
        let (_, done) = recovery_step(&held, &h, &rig, 1.0 / 60.0);
        assert!(done);
    }

    #[test]
    fn recovery_static_quarter_turn() {
        let rig = RigConfig {
            omega_rec: PI / 36.0,
            ..identity_rig()
        };
        let h = hand(ArmSide::Left, Vec3::zeros(), UnitQuat::from_axis_angle(&Vec3::z(), FRAC_PI_2));
        let mut q = UnitQuat::IDENTITY;
        let mut ticks = 0;
        loop {
            ticks += 1;
            let (next, done) = recovery_step(&q, &h, &rig, 1.0);
            assert!(geodesic_distance(&q, &next) <= PI / 36.0 + 1e-9);
            q = next;
            if done {
                break;
            }
        }
        assert!(ticks <= 18, "{ticks}");
    }

    #[test]
    fn recovery_chasing_moving_target_is_rate_limited() {
        let rig = identity_rig();
        let dt = 1.0 / 60.0;
        let mut q = UnitQuat::IDENTITY;
        for k in 0..300 {
            let t = k as f64 * dt;
            let h = hand(ArmSide::Left, Vec3::zeros(), UnitQuat::from_axis_angle(&Vec3::new(0.3, 1.0, 0.2), 2.5 * (3.0 * t).sin() + 1.0));
            let (next, _) = recovery_step(&q, &h, &rig, dt);
            assert!(geodesic_distance(&q, &next) <= rig.omega_rec * dt + 1e-9);
            q = next;
        }
    }

    proptest! {
        #[test]
        fn natural_position_matches_homogeneous(
            s in prop::array::uniform4(0.1f64..3.0),
            p in prop::array::uniform3(-1.0f64..1.0),
            t in prop::array::uniform3(-1.0f64..1.0),
            q in quat(),
        ) {
            let ws = WorkspaceModel::new(1.0, 1.0, s[0], s[1]).unwrap();
            let mut rig = identity_rig();
            rig.arms.left.base_rotation = q.to_rotation();
            rig.arms.left.base_translation = Vec3::from(t);
            let h = hand(ArmSide::Left, Vec3::from(p), UnitQuat::IDENTITY);
            let out = natural_position(&h, &ws, &rig);

            let r = q.to_rotation();
            let mut tf = Matrix4::identity();
            tf.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
            tf.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vec3::from(t));
            let sv = ws.scaling();
            let ph = nalgebra::Vector4::new(sv.x * p[0], sv.y * p[1], sv.z * p[2], 1.0);
            let oracle = tf * ph;
            prop_assert!((out - oracle.xyz()).amax() < 1e-12);
        }

        #[test]
        fn natural_orientation_matches_matrix_product(a in quat(), b in quat(), c in quat()) {
            let mut rig = identity_rig();
            rig.arms.right.base_rotation = a.to_rotation();
            rig.hand_to_ee = c.to_rotation();
            let h = hand(ArmSide::Right, Vec3::zeros(), b);
            let out = natural_orientation(&h, &rig).to_rotation();
            let oracle = a.to_rotation().matrix() * b.to_rotation().matrix() * c.to_rotation().matrix();
            prop_assert!((out.matrix() - oracle).amax() < 1e-12);
        }

        #[test]
        fn inplane_only_preserves_approach_axis(q in quat(), u in -1.0f64..1.0) {
            let rig = identity_rig();
            let mut c = ControllerState::idle(ArmSide::Left);
            c.u1 = u;
            let next = joystick_update(&q, &c, &rig, 0.1);
            let before = q.to_rotation().column(2);
            let after = next.to_rotation().column(2);
            prop_assert!((before - after).amax() < 1e-10);
        }
    }
}
