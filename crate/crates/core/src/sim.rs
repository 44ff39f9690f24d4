//! Kinematic stand-in for the bimanual robot.
//!
//! End-effectors track their commands at bounded linear and angular speed,
//! integrated over fixed inner substeps. A slot-aligned counter produces the
//! synthetic camera frame index.

use serde::{Deserialize, Serialize};

use crate::geometry::{slerp_step, Pose, UnitQuat, Vec3};
use crate::retarget::{EndEffectorCommand, RigConfig, Sided};
use crate::transport::rate::RateGate;
use crate::workspace::{clamp_to_sphere, WorkspaceModel, WorkspaceSphere};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingParams {
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
    /// Hz
    pub inner_rate: f64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        TrackingParams {
            v_max: 1.0,
            omega_max: std::f64::consts::PI,
            inner_rate: 500.0,
        }
    }
}

impl TrackingParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("inner_rate", self.inner_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("tracking.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSimState {
    pub pose: Pose,
    pub gripper_closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrameMeta {
    pub camera: String,
    pub frame: u64,
    pub width: u32,
    pub height: u32,
    pub pose: Pose,
}

/// Read-only view of the simulated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub frame: u64,
    pub sim_time_us: u64,
    pub arms: Sided<ArmSimState>,
    pub cameras: Vec<CameraFrameMeta>,
}

impl SceneSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SimRobot {
    arms: Sided<ArmSimState>,
    spheres: Sided<WorkspaceSphere>,
    sim_time_us: u64,
    frame_counter: u64,
    camera_gate: RateGate<()>,
    eye_pose: Pose,
}

impl SimRobot {
    pub fn new(rig: &RigConfig, ws: &WorkspaceModel, camera_rate_hz: u32) -> Self {
        let arms = Sided::from_fn(|side| {
            let home = rig.home_command(side);
            ArmSimState {
                pose: Pose::new(home.position, home.orientation),
                gripper_closed: false,
            }
        });
        SimRobot {
            arms,
            spheres: Sided::from_fn(|side| rig.robot_sphere(side, ws)),
            sim_time_us: 0,
            frame_counter: 0,
            camera_gate: RateGate::new(camera_rate_hz),
            eye_pose: Pose::default(),
        }
    }

    pub fn with_eye_pose(mut self, pose: Pose) -> Self {
        self.eye_pose = pose;
        self
    }

    pub fn arms(&self) -> &Sided<ArmSimState> {
        &self.arms
    }

    pub fn frame_counter(&self) -> u64 {
        self.frame_counter
    }

    pub fn sim_time_us(&self) -> u64 {
        self.sim_time_us
    }

    /// Advances by `dt` seconds ending at `now_us`. Returns `true` when a new
    /// camera frame started.
    pub fn step(
        &mut self,
        cmds: &Sided<EndEffectorCommand>,
        params: &TrackingParams,
        dt: f64,
        now_us: u64,
    ) -> bool {
        let substeps = (dt * params.inner_rate).ceil().max(1.0) as usize;
        let h = dt / substeps as f64;
        for side in crate::retarget::ArmSide::ALL {
            let cmd = &cmds[side];
            let sphere = self.spheres[side];
            let arm = &mut self.arms[side];
            for _ in 0..substeps {
                let (p, q) = track_substep(&arm.pose, cmd, params, h);
                arm.pose = Pose::new(clamp_to_sphere(&p, &sphere).0, q);
            }
            arm.gripper_closed = cmd.grip_close;
        }
        self.sim_time_us = now_us;
        let new_frame = self.camera_gate.offer(now_us, ()).is_some();
        if new_frame {
            self.frame_counter += 1;
        }
        new_frame
    }

    pub fn scene_snapshot(&self) -> SceneSnapshot {
        let mut cameras = vec![CameraFrameMeta {
            camera: "eye".into(),
            frame: self.frame_counter,
            width: 1920,
            height: 1080,
            pose: self.eye_pose,
        }];
        for (name, arm) in [("wrist_left", &self.arms.left), ("wrist_right", &self.arms.right)] {
            cameras.push(CameraFrameMeta {
                camera: name.into(),
                frame: self.frame_counter,
                width: 1280,
                height: 720,
                pose: arm.pose,
            });
        }
        SceneSnapshot {
            frame: self.frame_counter,
            sim_time_us: self.sim_time_us,
            arms: self.arms,
            cameras,
        }
    }
}

fn track_substep(
    pose: &Pose,
    cmd: &EndEffectorCommand,
    params: &TrackingParams,
    h: f64,
) -> (Vec3, UnitQuat) {
    let delta = cmd.position - pose.position;
    let dist = delta.norm();
    let max_move = params.v_max * h;
    let p = if dist <= max_move {
        cmd.position
    } else {
        pose.position + delta * (max_move / dist)
    };
    let (q, _) = slerp_step(&pose.orientation, &cmd.orientation, params.omega_max, h);
    (p, q)
}
