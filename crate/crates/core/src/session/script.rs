//! Synthetic input scripts for tests and golden traces.

use crate::geometry::{UnitQuat, Vec3};
use crate::retarget::{ArmSide, ControllerState, HandPoseSample};
use crate::transport::codec::{ControllerFrame, InputFrame, PoseFrame};

use super::trace::{Trace, TraceError, TraceRecord};

pub const POSE_RATE_HZ: u32 = 60;
pub const CONTROLLER_RATE_HZ: u32 = 50;
/// Fixed transport delay applied to scripted frames.
pub const POSE_LATENCY_US: u64 = 1_500;
pub const CONTROLLER_LATENCY_US: u64 = 1_000;

fn sample_times(duration_us: u64, rate_hz: u32) -> impl Iterator<Item = u64> {
    (0u64..)
        .map(move |k| crate::transport::rate::slot_start_us(k, rate_hz))
        .take_while(move |t| *t < duration_us)
}

/// Hand pose frames at `rate_hz`; `pose_at` returns `None` for dropouts.
pub fn hand_stream(
    side: ArmSide,
    duration_us: u64,
    rate_hz: u32,
    latency_us: u64,
    pose_at: impl Fn(f64) -> Option<(Vec3, UnitQuat)>,
) -> Vec<TraceRecord> {
    sample_times(duration_us, rate_hz)
        .filter_map(|t| {
            let (position, orientation) = pose_at(t as f64 * 1e-6)?;
            let arrival_us = t + latency_us;
            (arrival_us < duration_us).then(|| TraceRecord {
                arrival_us,
                frame: InputFrame::Pose(PoseFrame::from_sample(&HandPoseSample {
                    side,
                    pose: crate::geometry::Pose::new(position, orientation),
                    timestamp_us: t,
                })),
            })
        })
        .collect()
}

/// Controller frames at `rate_hz`. The closure fills everything except the
/// side and timestamp.
pub fn controller_stream(
    side: ArmSide,
    duration_us: u64,
    rate_hz: u32,
    latency_us: u64,
    state_at: impl Fn(f64) -> ControllerState,
) -> Vec<TraceRecord> {
    sample_times(duration_us, rate_hz)
        .filter_map(|t| {
            let mut state = state_at(t as f64 * 1e-6);
            state.side = side;
            state.timestamp_us = t;
            let arrival_us = t + latency_us;
            (arrival_us < duration_us).then(|| TraceRecord {
                arrival_us,
                frame: InputFrame::Controller(ControllerFrame::from_state(&state)),
            })
        })
        .collect()
}

/// Half-open `[start, end)` intervals in seconds.
type Spans = &'static [(f64, f64)];

fn within(t: f64, spans: &[(f64, f64)]) -> bool {
    spans.iter().any(|&(a, b)| t >= a && t < b)
}

fn mirror(side: ArmSide) -> f64 {
    match side {
        ArmSide::Left => 1.0,
        ArmSide::Right => -1.0,
    }
}

/// Hand motion used by the demo session: a slow figure around the home pose
/// with a reach past the workspace boundary between 20 s and 23 s.
pub fn demo_hand_pose(side: ArmSide, t: f64) -> (Vec3, UnitQuat) {
    let m = mirror(side);
    let phase = if side == ArmSide::Left { 0.0 } else { 0.9 };
    let mut p = Vec3::new(
        0.40 + 0.07 * (0.31 * t + phase).sin(),
        m * 0.04 + 0.10 * (0.23 * t + phase).sin(),
        -0.18 + 0.06 * (0.41 * t + phase).cos(),
    );
    if (20.0..23.0).contains(&t) {
        let reach = ((t - 20.0) / 3.0 * std::f64::consts::PI).sin();
        p.x += 0.45 * reach;
    }
    let axis = Vec3::new(
        (0.17 * t).sin(),
        (0.11 * t + phase).cos(),
        0.5 + 0.3 * (0.07 * t).sin(),
    );
    let angle = 0.5 * (0.29 * t + phase).sin();
    (p, UnitQuat::from_axis_angle(&axis, angle))
}

/// Controller script: joystick-assisted spans with thumbstick input, grip
/// spans and visibility presses, different per arm.
pub fn demo_controller(side: ArmSide, t: f64) -> ControllerState {
    let mut c = ControllerState::idle(side);
    let (hold, stick, grip, vis): (Spans, (f64, f64), Spans, Spans) =
        match side {
            ArmSide::Left => (
                &[(10.0, 14.0), (30.0, 33.0), (50.0, 50.4), (52.0, 55.0)],
                (0.6, -0.3),
                &[(8.0, 12.0), (35.0, 41.0)],
                &[(25.0, 25.2), (44.0, 44.2)],
            ),
            ArmSide::Right => (
                &[(18.0, 21.0), (36.5, 39.0), (47.0, 49.0)],
                (-0.5, 0.7),
                &[(15.0, 26.0)],
                &[(5.0, 5.2), (12.0, 12.1), (40.0, 40.3)],
            ),
        };
    c.mode_hold = within(t, hold);
    if c.mode_hold {
        c.u1 = stick.0 * (0.9 * t).cos();
        c.u2 = stick.1;
    } else if within(t, &[(2.0, 4.0)]) {
        // thumbstick noise outside any hold span
        c.u1 = 0.4;
        c.u2 = -0.2;
    }
    c.grip_close = within(t, grip);
    c.vis_toggle = within(t, vis);
    c
}

/// A deterministic two-arm session exercising every mode transition, clamping,
/// visibility toggles and a right-hand tracking dropout (45 s to 46 s).
pub fn demo_session(duration_us: u64, config_hash: [u8; 32]) -> Result<Trace, TraceError> {
    let mut records = Vec::new();
    for side in ArmSide::ALL {
        records.extend(hand_stream(side, duration_us, POSE_RATE_HZ, POSE_LATENCY_US, |t| {
            let dropout = side == ArmSide::Right && (45.0..46.0).contains(&t);
            (!dropout).then(|| demo_hand_pose(side, t))
        }));
        records.extend(controller_stream(
            side,
            duration_us,
            CONTROLLER_RATE_HZ,
            CONTROLLER_LATENCY_US,
            |t| demo_controller(side, t),
        ));
    }
    Trace::from_records(config_hash, duration_us, records)
}

/// Replaces every thumbstick value with zero, keeping buttons.
pub fn zero_thumbsticks(trace: &Trace) -> Trace {
    let records = trace
        .records()
        .iter()
        .map(|r| {
            let mut r = *r;
            if let InputFrame::Controller(f) = &mut r.frame {
                f.u1 = 0.0;
                f.u2 = 0.0;
            }
            r
        })
        .collect();
    Trace::from_records(trace.header.config_hash, trace.duration_us(), records)
        .expect("same ordering as the source")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_session_shape() {
        let t = demo_session(60_000_000, [0; 32]).unwrap();
        let poses = t
            .records()
            .iter()
            .filter(|r| matches!(r.frame, InputFrame::Pose(_)))
            .count();
        let ctrls = t.records().len() - poses;
        // 60 s at 60 Hz per hand minus the 1 s right-hand dropout
        assert_eq!(poses, 2 * 3600 - 60);
        assert_eq!(ctrls, 2 * 3000);
        assert!(t.records().windows(2).all(|w| w[0].arrival_us <= w[1].arrival_us));
    }

    #[test]
    fn ablation_only_touches_sticks() {
        let t = demo_session(5_000_000, [0; 32]).unwrap();
        let z = zero_thumbsticks(&t);
        assert_eq!(t.records().len(), z.records().len());
        for (a, b) in t.records().iter().zip(z.records()) {
            match (a.frame, b.frame) {
                (InputFrame::Controller(fa), InputFrame::Controller(fb)) => {
                    assert_eq!(fa.buttons, fb.buttons);
                    assert_eq!((fb.u1, fb.u2), (0.0, 0.0));
                }
                (fa, fb) => assert_eq!(fa, fb),
            }
        }
    }
}
