//! Task metrics accumulated over a run.

use serde::{Deserialize, Serialize};

use crate::config::GoalPose;
use crate::engine::TickOutput;
use crate::geometry::{geodesic_distance, Pose};
use crate::retarget::{ArmMode, ArmSide, Sided};
use crate::sim::ArmSimState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Seconds until the goals last became and stayed satisfied, or the run
    /// duration when they never did.
    pub completion_time: f64,
    pub success: bool,
    /// Commanded end-effector path length, meters.
    pub path_length: Sided<f64>,
    /// Commanded geodesic rotation travel, radians.
    pub rotation_travel: Sided<f64>,
    /// Ticks on which the command pose did not change.
    pub frozen_ticks: Sided<u64>,
    pub mode_switch_count: u64,
    pub joystick_active_time: f64,
    /// Commands that entered the clamped state, per tick transition.
    pub clamp_count: u64,
    pub visibility_toggles: u64,
    pub ticks: u64,
}

impl MetricsReport {
    pub fn zero() -> Self {
        MetricsReport {
            completion_time: 0.0,
            success: false,
            path_length: Sided::default(),
            rotation_travel: Sided::default(),
            frozen_ticks: Sided::default(),
            mode_switch_count: 0,
            joystick_active_time: 0.0,
            clamp_count: 0,
            visibility_toggles: 0,
            ticks: 0,
        }
    }
}

pub fn goal_satisfied(goal: &GoalPose, arm: &ArmSimState) -> bool {
    let pos_ok = (arm.pose.position - goal.position).norm() <= goal.tolerance_m;
    let rot_ok = goal
        .orientation
        .is_none_or(|q| geodesic_distance(&q, &arm.pose.orientation) <= goal.tolerance_rad);
    pos_ok && rot_ok
}

/// Folds tick outputs into a [`MetricsReport`].
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    goals: Vec<GoalPose>,
    time_limit_s: Option<f64>,
    dt: f64,
    prev_pose: Sided<Option<Pose>>,
    prev_mode: Option<Sided<ArmMode>>,
    prev_clamped: Sided<bool>,
    satisfied_since_us: Option<u64>,
    report: MetricsReport,
}

impl MetricsAccumulator {
    pub fn new(goals: Vec<GoalPose>, time_limit_s: Option<f64>, dt: f64) -> Self {
        MetricsAccumulator {
            goals,
            time_limit_s,
            dt,
            prev_pose: Sided::default(),
            prev_mode: None,
            prev_clamped: Sided::default(),
            satisfied_since_us: None,
            report: MetricsReport::zero(),
        }
    }

    pub fn observe(&mut self, out: &TickOutput, sim_arms: &Sided<ArmSimState>) {
        let r = &mut self.report;
        r.ticks += 1;
        for side in ArmSide::ALL {
            let arm = &out.arms[side];
            if arm.command.clamped && !self.prev_clamped[side] {
                r.clamp_count += 1;
            }
            self.prev_clamped[side] = arm.command.clamped;
            if arm.mode == ArmMode::JoystickAssisted {
                r.joystick_active_time += self.dt;
            }
            if out.visibility_flips[side] {
                r.visibility_toggles += 1;
            }
            // path starts at the first command driven by a live hand
            if arm.stale && self.prev_pose[side].is_none() {
                continue;
            }
            let pose = Pose::new(arm.command.position, arm.command.orientation);
            if let Some(prev) = self.prev_pose[side] {
                let dp = (pose.position - prev.position).norm();
                let dr = geodesic_distance(&prev.orientation, &pose.orientation);
                r.path_length[side] += dp;
                r.rotation_travel[side] += dr;
                if pose == prev {
                    r.frozen_ticks[side] += 1;
                }
            }
            self.prev_pose[side] = Some(pose);
        }
        let modes = out.arms.map(|a| a.mode);
        if let Some(prev) = self.prev_mode {
            r.mode_switch_count +=
                (prev.left != modes.left) as u64 + (prev.right != modes.right) as u64;
        }
        self.prev_mode = Some(modes);

        let all = !self.goals.is_empty()
            && self.goals.iter().all(|g| goal_satisfied(g, &sim_arms[g.arm]));
        if all {
            self.satisfied_since_us.get_or_insert(out.time_us);
        } else {
            self.satisfied_since_us = None;
        }
    }

    pub fn finish(mut self, duration_us: u64) -> MetricsReport {
        let duration = duration_us as f64 * 1e-6;
        let r = &mut self.report;
        if r.ticks == 0 {
            return MetricsReport::zero();
        }
        match self.satisfied_since_us {
            Some(t) => {
                r.completion_time = t as f64 * 1e-6;
                r.success = self.time_limit_s.is_none_or(|lim| r.completion_time <= lim);
            }
            None => {
                r.completion_time = duration;
                r.success = false;
            }
        }
        self.report
    }
}
