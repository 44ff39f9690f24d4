use serde::{Deserialize, Serialize};

use super::{
    joystick_update, natural_orientation, natural_position, recovery_step, ArmMode, ArmSide,
    ControllerState, EndEffectorCommand, HandPoseSample, RigConfig, Sided,
};
use crate::geometry::{hadamard_scale, Pose, UnitQuat};
use crate::workspace::{clamp_to_sphere, WorkspaceModel};

/// Which retargeting scheme drives the arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetargetMode {
    /// Natural mapping with joystick-assisted fine adjustment and recovery.
    #[default]
    CoarseToFine,
    /// Natural mapping only; mode buttons and thumbsticks are ignored.
    NaturalOnly,
    /// Button-gated relative mapping from the pose at engagement.
    Relative,
}

impl std::str::FromStr for RetargetMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "coarse-to-fine" => Ok(RetargetMode::CoarseToFine),
            "natural-only" => Ok(RetargetMode::NaturalOnly),
            "relative" => Ok(RetargetMode::Relative),
            other => Err(format!(
                "unknown retarget mode {other:?} (expected coarse-to-fine, natural-only or relative)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RelativeAnchor {
    ee: Pose,
    hand: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub mode: ArmMode,
    /// Orientation maintained while the thumbstick or recovery owns it.
    pub held_orientation: UnitQuat,
    pub engage_timestamp_us: u64,
    last_command: EndEffectorCommand,
    prev_mode_hold: bool,
    anchor: Option<RelativeAnchor>,
}

impl ArmState {
    fn new(initial: EndEffectorCommand, mode: ArmMode) -> Self {
        ArmState {
            mode,
            held_orientation: initial.orientation,
            engage_timestamp_us: 0,
            last_command: initial,
            prev_mode_hold: false,
            anchor: None,
        }
    }

    pub fn last_command(&self) -> &EndEffectorCommand {
        &self.last_command
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetState {
    pub arms: Sided<ArmState>,
}

/// Latest inputs for one arm. `hand` is `None` when the hand stream is
/// missing or stale.
#[derive(Debug, Clone, Copy)]
pub struct ArmInput<'a> {
    pub hand: Option<&'a HandPoseSample>,
    pub controller: &'a ControllerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmTick {
    pub command: EndEffectorCommand,
    pub mode: ArmMode,
    pub stale: bool,
    /// A mode-hold rising edge took effect on this tick.
    pub engaged: bool,
}

/// Advances both arms' mode automata once per tick.
#[derive(Debug, Clone)]
pub struct Retargeter {
    mode: RetargetMode,
    state: RetargetState,
}

impl Retargeter {
    pub fn new(mode: RetargetMode, rig: &RigConfig) -> Self {
        let initial = match mode {
            RetargetMode::Relative => ArmMode::Disengaged,
            _ => ArmMode::Natural,
        };
        Retargeter {
            mode,
            state: RetargetState {
                arms: Sided::from_fn(|side| ArmState::new(rig.home_command(side), initial)),
            },
        }
    }

    pub fn mode(&self) -> RetargetMode {
        self.mode
    }

    pub fn state(&self) -> &RetargetState {
        &self.state
    }

    /// Produces exactly one command per arm. Arms are independent.
    pub fn tick(
        &mut self,
        inputs: Sided<ArmInput<'_>>,
        ws: &WorkspaceModel,
        rig: &RigConfig,
        dt: f64,
        now_us: u64,
    ) -> Sided<ArmTick> {
        let mode = self.mode;
        Sided::from_fn(|side| {
            let arm = &mut self.state.arms[side];
            let input = inputs[side];
            let Some(hand) = input.hand else {
                let mut command = arm.last_command;
                command.timestamp_us = now_us;
                return ArmTick {
                    command,
                    mode: arm.mode,
                    stale: true,
                    engaged: false,
                };
            };
            let ctrl = input.controller;
            let engaged = match mode {
                RetargetMode::CoarseToFine => coarse_to_fine(arm, hand, ctrl, rig, dt, now_us),
                RetargetMode::NaturalOnly => {
                    arm.held_orientation = natural_orientation(hand, rig);
                    false
                }
                RetargetMode::Relative => relative(arm, hand, ctrl, now_us),
            };
            let command = match mode {
                RetargetMode::Relative => {
                    let mut c = arm.last_command;
                    if arm.mode == ArmMode::Engaged {
                        let anchor = arm.anchor.expect("engaged arm has an anchor");
                        c = relative_command(side, &anchor, hand, ws, rig);
                    }
                    c
                }
                _ => {
                    let (position, clamped) = clamp_to_sphere(
                        &natural_position(hand, ws, rig),
                        &rig.robot_sphere(side, ws),
                    );
                    EndEffectorCommand {
                        side,
                        position,
                        orientation: arm.held_orientation,
                        grip_close: false,
                        clamped,
                        timestamp_us: 0,
                    }
                }
            };
            // a disengaged clutch ignores the operator entirely, gripper included
            let grip_close = if arm.mode == ArmMode::Disengaged {
                command.grip_close
            } else {
                ctrl.grip_close
            };
            let command = EndEffectorCommand {
                grip_close,
                timestamp_us: now_us,
                ..command
            };
            arm.last_command = command;
            ArmTick {
                command,
                mode: arm.mode,
                stale: false,
                engaged,
            }
        })
    }
}

/// Updates `arm.mode` and `arm.held_orientation`; the latter is the
/// orientation command for this tick.
fn coarse_to_fine(
    arm: &mut ArmState,
    hand: &HandPoseSample,
    ctrl: &ControllerState,
    rig: &RigConfig,
    dt: f64,
    now_us: u64,
) -> bool {
    let hold = ctrl.mode_hold;
    let rising = hold && !arm.prev_mode_hold;
    arm.prev_mode_hold = hold;
    let mut engaged = false;
    match arm.mode {
        ArmMode::Natural | ArmMode::Recovering if rising => {
            // orientation is captured from the previous command, so the
            // boundary tick repeats it exactly
            arm.held_orientation = arm.last_command.orientation;
            arm.mode = ArmMode::JoystickAssisted;
            arm.engage_timestamp_us = now_us;
            engaged = true;
        }
        ArmMode::Natural => {
            arm.held_orientation = natural_orientation(hand, rig);
        }
        ArmMode::JoystickAssisted if hold => {
            arm.held_orientation = joystick_update(&arm.held_orientation, ctrl, rig, dt);
        }
        ArmMode::JoystickAssisted | ArmMode::Recovering => {
            let (next, done) = recovery_step(&arm.held_orientation, hand, rig, dt);
            arm.held_orientation = next;
            arm.mode = if done { ArmMode::Natural } else { ArmMode::Recovering };
        }
        ArmMode::Engaged | ArmMode::Disengaged => {
            unreachable!("relative modes are not used by coarse-to-fine")
        }
    }
    engaged
}

fn relative(
    arm: &mut ArmState,
    hand: &HandPoseSample,
    ctrl: &ControllerState,
    now_us: u64,
) -> bool {
    let hold = ctrl.mode_hold;
    let rising = hold && !arm.prev_mode_hold;
    arm.prev_mode_hold = hold;
    if rising {
        arm.anchor = Some(RelativeAnchor {
            ee: Pose::new(arm.last_command.position, arm.last_command.orientation),
            hand: hand.pose,
        });
        arm.mode = ArmMode::Engaged;
        arm.engage_timestamp_us = now_us;
    } else if !hold {
        arm.mode = ArmMode::Disengaged;
    }
    rising
}

fn relative_command(
    side: ArmSide,
    anchor: &RelativeAnchor,
    hand: &HandPoseSample,
    ws: &WorkspaceModel,
    rig: &RigConfig,
) -> EndEffectorCommand {
    let delta = hand.pose.position - anchor.hand.position;
    let moved = anchor.ee.position
        + rig.arms[side].base_rotation * hadamard_scale(&ws.scaling(), &delta);
    let (position, clamped) = clamp_to_sphere(&moved, &rig.robot_sphere(side, ws));
    let orientation =
        anchor.ee.orientation * anchor.hand.orientation.conjugate() * hand.pose.orientation;
    EndEffectorCommand {
        side,
        position,
        orientation,
        grip_close: false,
        clamped,
        timestamp_us: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_distance, RotMat, Vec3};

    const DT: f64 = 1.0 / 60.0;

    fn rig() -> RigConfig {
        RigConfig {
            deadzone: 0.0,
            ..RigConfig::default()
        }
    }

    fn hand(side: ArmSide, p: Vec3, q: UnitQuat) -> HandPoseSample {
        HandPoseSample {
            side,
            pose: Pose::new(p, q),
            timestamp_us: 0,
        }
    }

    fn step(
        rt: &mut Retargeter,
        hands: &Sided<HandPoseSample>,
        ctrls: &Sided<ControllerState>,
        k: u64,
    ) -> Sided<ArmTick> {
        let ws = WorkspaceModel::default();
        let inputs = Sided::from_fn(|s| ArmInput {
            hand: Some(&hands[s]),
            controller: &ctrls[s],
        });
        rt.tick(inputs, &ws, &rig(), DT, k)
    }

    #[test]
    fn natural_only_path_matches_pure_mapping() {
        let mut rig = rig();
        rig.hand_to_ee = RotMat::IDENTITY;
        let ws = WorkspaceModel::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let mut rt = Retargeter::new(RetargetMode::CoarseToFine, &rig);
        let h = hand(ArmSide::Left, Vec3::new(0.3, 0.2, 0.1), UnitQuat::from_axis_angle(&Vec3::x(), 0.3));
        let hands = Sided::new(h, HandPoseSample { side: ArmSide::Right, ..h });
        let ctrls = Sided::from_fn(ControllerState::idle);
        let inputs = Sided::from_fn(|s| ArmInput {
            hand: Some(&hands[s]),
            controller: &ctrls[s],
        });
        let out = rt.tick(inputs, &ws, &rig, DT, 0);
        assert_eq!(out.left.command.position, h.pose.position);
        assert!(geodesic_distance(&out.left.command.orientation, &h.pose.orientation) < 1e-12);
        assert_eq!(out.left.mode, ArmMode::Natural);
    }

    #[test]
    fn press_and_release_is_continuous() {
        let mut rt = Retargeter::new(RetargetMode::CoarseToFine, &rig());
        let q0 = UnitQuat::from_axis_angle(&Vec3::new(0.0, 1.0, 0.3), 0.4);
        let q1 = UnitQuat::from_axis_angle(&Vec3::new(1.0, 0.2, 0.0), -1.1);
        let mut hands = Sided::from_fn(|s| hand(s, Vec3::new(0.3, 0.0, -0.1), q0));
        let mut ctrls = Sided::from_fn(ControllerState::idle);
        let mut prev = step(&mut rt, &hands, &ctrls, 0).left.command.orientation;
        let mut modes = Vec::new();
        for k in 1..400u64 {
            ctrls.left.mode_hold = (20..60).contains(&k);
            if k >= 30 {
                hands.left.pose.orientation = q1;
            }
            let out = step(&mut rt, &hands, &ctrls, k).left;
            let jump = geodesic_distance(&prev, &out.command.orientation);
            if k == 20 {
                assert_eq!(out.mode, ArmMode::JoystickAssisted);
                assert_eq!(out.command.orientation, prev);
            }
            if (20..60).contains(&k) {
                assert_eq!(out.command.orientation, prev, "zero stick must hold at {k}");
            } else if k >= 60 && out.mode == ArmMode::Recovering {
                assert!(jump <= rig().omega_rec * DT + 1e-9);
            }
            modes.push(out.mode);
            prev = out.command.orientation;
        }
        assert!(modes.contains(&ArmMode::Recovering));
        assert_eq!(*modes.last().unwrap(), ArmMode::Natural);
        // natural alignment restored
        assert!(geodesic_distance(&prev, &natural_orientation(&hands.left, &rig())) < 1e-12);
    }

    #[test]
    fn arms_are_independent() {
        let mut a = Retargeter::new(RetargetMode::CoarseToFine, &rig());
        let mut b = Retargeter::new(RetargetMode::CoarseToFine, &rig());
        let hands = Sided::from_fn(|s| hand(s, Vec3::new(0.2, 0.1, 0.0), UnitQuat::IDENTITY));
        let idle = Sided::from_fn(ControllerState::idle);
        let mut busy = idle;
        busy.left.mode_hold = true;
        busy.left.u1 = 0.9;
        busy.left.u2 = -0.4;
        for k in 0..100 {
            let oa = step(&mut a, &hands, &idle, k);
            let ob = step(&mut b, &hands, &busy, k);
            assert_eq!(oa.right.command, ob.right.command);
        }
        assert_eq!(b.state().arms.left.mode, ArmMode::JoystickAssisted);
    }

    #[test]
    fn hold_during_recovery_reenters_joystick() {
        let mut rt = Retargeter::new(RetargetMode::CoarseToFine, &rig());
        let mut hands = Sided::from_fn(|s| hand(s, Vec3::new(0.3, 0.0, 0.0), UnitQuat::IDENTITY));
        let mut ctrls = Sided::from_fn(ControllerState::idle);
        step(&mut rt, &hands, &ctrls, 0);
        ctrls.right.mode_hold = true;
        step(&mut rt, &hands, &ctrls, 1);
        ctrls.right.mode_hold = false;
        hands.right.pose.orientation = UnitQuat::from_axis_angle(&Vec3::z(), 2.0);
        let rec = step(&mut rt, &hands, &ctrls, 2).right;
        assert_eq!(rec.mode, ArmMode::Recovering);
        ctrls.right.mode_hold = true;
        let again = step(&mut rt, &hands, &ctrls, 3).right;
        assert_eq!(again.mode, ArmMode::JoystickAssisted);
        assert!(again.engaged);
        assert_eq!(again.command.orientation, rec.command.orientation);
    }

    #[test]
    fn missing_hand_repeats_last_command() {
        let mut rt = Retargeter::new(RetargetMode::CoarseToFine, &rig());
        let ws = WorkspaceModel::default();
        let ctrl = Sided::from_fn(ControllerState::idle);
        let h = hand(ArmSide::Left, Vec3::new(0.1, 0.2, 0.0), UnitQuat::IDENTITY);
        let live = rt.tick(
            Sided::new(
                ArmInput { hand: Some(&h), controller: &ctrl.left },
                ArmInput { hand: None, controller: &ctrl.right },
            ),
            &ws,
            &rig(),
            DT,
            10,
        );
        assert!(live.right.stale);
        assert_eq!(live.right.command.position, rig().arms.right.home_position);
        let stale = rt.tick(
            Sided::new(
                ArmInput { hand: None, controller: &ctrl.left },
                ArmInput { hand: None, controller: &ctrl.right },
            ),
            &ws,
            &rig(),
            DT,
            20,
        );
        assert!(stale.left.stale);
        assert_eq!(stale.left.command.position, live.left.command.position);
        assert_eq!(stale.left.command.orientation, live.left.command.orientation);
        assert_eq!(stale.left.command.timestamp_us, 20);
    }

    #[test]
    fn natural_only_ignores_buttons() {
        let mut rt = Retargeter::new(RetargetMode::NaturalOnly, &rig());
        let hands = Sided::from_fn(|s| hand(s, Vec3::new(0.2, 0.1, 0.0), UnitQuat::IDENTITY));
        let mut ctrls = Sided::from_fn(ControllerState::idle);
        ctrls.left.mode_hold = true;
        ctrls.left.u1 = 1.0;
        for k in 0..10 {
            let out = step(&mut rt, &hands, &ctrls, k);
            assert_eq!(out.left.mode, ArmMode::Natural);
            assert!(!out.left.engaged);
        }
    }

    #[test]
    fn relative_mode_contract() {
        let rig = rig();
        let ws = WorkspaceModel::default();
        let mut rt = Retargeter::new(RetargetMode::Relative, &rig);
        let mut hands = Sided::from_fn(|s| hand(s, Vec3::new(0.2, 0.1, 0.0), UnitQuat::IDENTITY));
        let mut ctrls = Sided::from_fn(ControllerState::idle);
        let first = step(&mut rt, &hands, &ctrls, 0);
        for k in 1..10 {
            hands.left.pose.position.x += 0.01;
            let out = step(&mut rt, &hands, &ctrls, k);
            assert_eq!(out.left.command.position, first.left.command.position);
            assert_eq!(out.left.command.orientation, first.left.command.orientation);
            assert_eq!(out.left.mode, ArmMode::Disengaged);
        }
        ctrls.left.mode_hold = true;
        let engage = step(&mut rt, &hands, &ctrls, 10).left;
        assert!(engage.engaged);
        assert_eq!(engage.command.position, first.left.command.position);
        assert_eq!(engage.command.orientation, first.left.command.orientation);

        let delta = Vec3::new(0.05, -0.02, 0.03);
        hands.left.pose.position += delta;
        let moved = step(&mut rt, &hands, &ctrls, 11).left;
        let expect = first.left.command.position + ws.scaling().component_mul(&delta);
        assert!((moved.command.position - expect).amax() < 1e-12);
    }
}
