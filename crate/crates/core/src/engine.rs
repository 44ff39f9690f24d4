//! The single-threaded engine loop.
//!
//! Inputs are queued with an arrival time and applied in order before the
//! first tick at or after that time. Tick `k` runs at `slot_start_us(k, tick_rate)`,
//! so a given input sequence always yields the same outputs.

use std::collections::VecDeque;

use serde::Serialize;

use crate::config::{ConfigError, EngineConfig};
use crate::geometry::Pose;
use crate::perception::{AnchorPlacement, LayoutMode, PanelPlacer, VisibilityState};
use crate::retarget::{
    ArmInput, ArmSide, ArmTick, ControllerState, EndEffectorCommand, HandPoseSample, Retargeter,
    Sided,
};
use crate::sim::{SceneSnapshot, SimRobot};
use crate::transport::codec::{CommandFrame, InputFrame};
use crate::transport::rate::{slot_start_us, RateGate};

/// Anchor placements emitted on one anchor slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorBatch {
    pub time_us: u64,
    pub layout: LayoutMode,
    pub placements: [AnchorPlacement; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickOutput {
    pub tick: u64,
    pub time_us: u64,
    pub arms: Sided<ArmTick>,
    /// Timestamp of the hand sample each command was computed from.
    pub hand_timestamp_us: Sided<Option<u64>>,
    pub visibility: Sided<bool>,
    pub visibility_flips: Sided<bool>,
    pub anchors: Option<AnchorBatch>,
    pub scene: Option<SceneSnapshot>,
}

impl TickOutput {
    pub fn commands(&self) -> Sided<EndEffectorCommand> {
        self.arms.map(|a| a.command)
    }

    /// Left then right.
    pub fn command_frames(&self) -> [CommandFrame; 2] {
        [
            CommandFrame::from_command(&self.arms.left.command),
            CommandFrame::from_command(&self.arms.right.command),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct HeldHand {
    sample: HandPoseSample,
    arrival_us: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InputStats {
    pub accepted: u64,
    /// Older than the latest sample already held for that side.
    pub out_of_order: u64,
}

pub struct Engine {
    config: EngineConfig,
    retargeter: Retargeter,
    sim: SimRobot,
    placer: PanelPlacer,
    visibility: VisibilityState,
    hands: Sided<Option<HeldHand>>,
    controllers: Sided<ControllerState>,
    pending: VecDeque<(u64, InputFrame)>,
    last_arrival_us: u64,
    next_tick: u64,
    anchor_gate: RateGate<()>,
    stats: InputStats,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let retargeter = Retargeter::new(config.engine.retarget_mode, &config.rig);
        let sim = SimRobot::new(&config.rig, &config.workspace, config.engine.scene_rate_hz)
            .with_eye_pose(Pose::new(
                nalgebra::Vector3::zeros(),
                crate::geometry::UnitQuat::from_rotation(&config.perception.neck_rotation.transpose()),
            ));
        Ok(Engine {
            anchor_gate: RateGate::new(config.engine.anchor_rate_hz),
            retargeter,
            sim,
            placer: PanelPlacer::new(),
            visibility: VisibilityState::default(),
            hands: Sided::default(),
            controllers: Sided::from_fn(ControllerState::idle),
            pending: VecDeque::new(),
            last_arrival_us: 0,
            next_tick: 0,
            stats: InputStats::default(),
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn retargeter(&self) -> &Retargeter {
        &self.retargeter
    }

    pub fn sim(&self) -> &SimRobot {
        &self.sim
    }

    pub fn stats(&self) -> &InputStats {
        &self.stats
    }

    pub fn ticks_run(&self) -> u64 {
        self.next_tick
    }

    /// Time of the next tick to run.
    pub fn next_tick_time_us(&self) -> u64 {
        slot_start_us(self.next_tick, self.config.engine.tick_rate_hz)
    }

    /// Queues an input. Arrival times must be non-decreasing.
    pub fn push_input(&mut self, arrival_us: u64, frame: InputFrame) {
        debug_assert!(arrival_us >= self.last_arrival_us, "arrivals must be ordered");
        self.last_arrival_us = self.last_arrival_us.max(arrival_us);
        self.pending.push_back((self.last_arrival_us, frame));
    }

    /// Runs every tick scheduled at or before `t_us`.
    pub fn advance_to(&mut self, t_us: u64, mut sink: impl FnMut(TickOutput)) -> u64 {
        let mut n = 0;
        while self.next_tick_time_us() <= t_us {
            sink(self.tick());
            n += 1;
        }
        n
    }

    /// Runs every tick scheduled strictly before `t_us`.
    pub fn advance_before(&mut self, t_us: u64, mut sink: impl FnMut(TickOutput)) -> u64 {
        let mut n = 0;
        while self.next_tick_time_us() < t_us {
            sink(self.tick());
            n += 1;
        }
        n
    }

    fn apply(&mut self, arrival_us: u64, frame: InputFrame) {
        match frame {
            InputFrame::Pose(f) => {
                let side = f.side;
                if let Some(held) = &self.hands[side] {
                    if f.timestamp_us < held.sample.timestamp_us {
                        self.stats.out_of_order += 1;
                        return;
                    }
                }
                self.hands[side] = Some(HeldHand {
                    sample: f.to_sample(),
                    arrival_us,
                });
            }
            InputFrame::Controller(f) => {
                let side = f.side;
                if f.timestamp_us < self.controllers[side].timestamp_us {
                    self.stats.out_of_order += 1;
                    return;
                }
                self.controllers[side] = f.to_state();
            }
        }
        self.stats.accepted += 1;
    }

    /// Runs the next tick.
    pub fn tick(&mut self) -> TickOutput {
        let tick = self.next_tick;
        let now = slot_start_us(tick, self.config.engine.tick_rate_hz);
        while self.pending.front().is_some_and(|(t, _)| *t <= now) {
            let (t, frame) = self.pending.pop_front().expect("non-empty");
            self.apply(t, frame);
        }

        let stale_after = self.config.engine.stale_timeout_ms * 1000;
        let live: Sided<Option<&HandPoseSample>> = Sided::from_fn(|side| {
            self.hands[side]
                .as_ref()
                .filter(|h| now.saturating_sub(h.arrival_us) <= stale_after)
                .map(|h| &h.sample)
        });
        let inputs = Sided::from_fn(|side| ArmInput {
            hand: live[side],
            controller: &self.controllers[side],
        });
        let dt = self.config.dt();
        let arms = self
            .retargeter
            .tick(inputs, &self.config.workspace, &self.config.rig, dt, now);
        let hand_timestamp_us = Sided::from_fn(|side| live[side].map(|h| h.timestamp_us));

        let visibility_flips = Sided::from_fn(|side| {
            self.visibility.toggle_visibility(&self.controllers[side])
        });

        let commands = arms.map(|a| a.command);
        let anchors = self.anchor_gate.offer(now, ()).map(|_| AnchorBatch {
            time_us: now,
            layout: self.config.engine.layout_mode,
            placements: self.placer.place_panels(
                &commands,
                &self.visibility,
                &self.config.rig,
                &self.config.perception,
                self.config.engine.layout_mode,
            ),
        });

        let new_frame = self.sim.step(&commands, &self.config.tracking, dt, now);
        let scene = new_frame.then(|| self.sim.scene_snapshot());

        self.next_tick += 1;
        TickOutput {
            tick,
            time_us: now,
            arms,
            hand_timestamp_us,
            visibility: self.visibility.visible,
            visibility_flips,
            anchors,
            scene,
        }
    }

    pub fn latest_command(&self, side: ArmSide) -> &EndEffectorCommand {
        self.retargeter.state().arms[side].last_command()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::codec::{ControllerFrame, PoseFrame};

    fn pose(side: ArmSide, ts: u64, x: f64) -> InputFrame {
        InputFrame::Pose(PoseFrame {
            side,
            timestamp_us: ts,
            position: [x, 0.0, -0.1],
            orientation: [1.0, 0.0, 0.0, 0.0],
        })
    }

    #[test]
    fn inputs_apply_before_their_tick() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.push_input(0, pose(ArmSide::Left, 0, 0.3));
        let t0 = e.tick();
        assert!(!t0.arms.left.stale);
        assert!(t0.arms.right.stale);
        assert_eq!(t0.hand_timestamp_us.left, Some(0));
        // arrives just after tick 1 is scheduled
        e.push_input(e.next_tick_time_us() + 1, pose(ArmSide::Left, 10, 0.35));
        let t1 = e.tick();
        assert_eq!(t1.hand_timestamp_us.left, Some(0));
        let t2 = e.tick();
        assert_eq!(t2.hand_timestamp_us.left, Some(10));
    }

    #[test]
    fn out_of_order_samples_dropped() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.push_input(0, pose(ArmSide::Right, 100, 0.3));
        e.push_input(0, pose(ArmSide::Right, 50, 0.1));
        let out = e.tick();
        assert_eq!(out.hand_timestamp_us.right, Some(100));
        assert_eq!(e.stats().out_of_order, 1);
    }

    #[test]
    fn stale_hand_holds_last_command() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        e.push_input(0, pose(ArmSide::Left, 0, 0.3));
        let first = e.tick();
        let mut last = first.clone();
        e.advance_to(1_000_000, |o| last = o);
        assert!(last.arms.left.stale);
        assert_eq!(last.arms.left.command.position, first.arms.left.command.position);
        assert_eq!(last.arms.left.command.timestamp_us, last.time_us);
    }

    #[test]
    fn controller_toggles_visibility_once_per_press() {
        let mut e = Engine::new(EngineConfig::default()).unwrap();
        let frame = |ts, buttons| {
            InputFrame::Controller(ControllerFrame {
                side: ArmSide::Right,
                timestamp_us: ts,
                buttons,
                u1: 0.0,
                u2: 0.0,
            })
        };
        e.push_input(0, frame(0, crate::transport::codec::BUTTON_VIS_TOGGLE));
        let mut flips = 0;
        e.advance_to(500_000, |o| flips += o.visibility_flips.right as u32);
        assert_eq!(flips, 1);
        e.push_input(600_000, frame(600_000, 0));
        let mut last = None;
        e.advance_to(700_000, |o| last = Some(o.visibility));
        assert!(last.unwrap().right);
    }
}
