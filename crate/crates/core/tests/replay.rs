//! Record, replay and compare over whole traces.

use std::path::Path;

use teleop_core::config::{ClockMode, EngineConfig};
use teleop_core::engine::Engine;
use teleop_core::geometry::{UnitQuat, Vec3};
use teleop_core::retarget::{ArmSide, ControllerState, RetargetMode};
use teleop_core::runtime::{run_engine, RunOptions};
use teleop_core::session::{compare, compare_table, replay, script, MetricsReport, Trace, TraceRecord};
use teleop_core::workspace::WorkspaceModel;

const DT: f64 = 1.0 / 60.0;

/// Unit scaling, so commanded distance equals hand distance.
fn unit_scale_config(mode: RetargetMode) -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.workspace = WorkspaceModel::new(0.8, 0.4, 0.8, 0.4).unwrap();
    cfg.engine.retarget_mode = mode;
    cfg
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Left hand travels a straight line along `dir` over [t0, t1], still
/// before and after.
fn line_trace(duration_us: u64, from: Vec3, dir: Vec3, length: f64, t0: f64, t1: f64) -> Trace {
    let d = dir.normalize();
    let records = script::hand_stream(ArmSide::Left, duration_us, 60, 0, |t| {
        let s = smoothstep((t - t0) / (t1 - t0));
        Some((from + d * (length * s), UnitQuat::default()))
    });
    Trace::from_records([0; 32], duration_us, records).unwrap()
}

#[test]
fn empty_trace_gives_empty_log_and_zero_metrics() {
    let cfg = EngineConfig::default();
    let out = replay(&Trace::new(cfg.hash(), 0), &cfg).unwrap();
    assert!(out.command_log.is_empty());
    assert_eq!(out.ticks, 0);
    assert_eq!(out.metrics, MetricsReport::zero());
}

#[test]
fn replay_is_deterministic() {
    let cfg = EngineConfig::default();
    let trace = script::demo_session(12_000_000, cfg.hash()).unwrap();
    let a = replay(&trace, &cfg).unwrap();
    let b = replay(&trace, &cfg).unwrap();
    assert_eq!(a.command_log, b.command_log);
    assert_eq!(a.metrics, b.metrics);
    assert!(!a.config_mismatch);
}

#[test]
fn straight_line_path_length() {
    let cfg = unit_scale_config(RetargetMode::NaturalOnly);
    for (dir, len) in [
        (Vec3::x(), 0.3),
        (Vec3::new(1.0, -2.0, 0.5), 0.3),
        (Vec3::new(0.0, 1.0, 1.0), 0.3),
    ] {
        let trace = line_trace(3_000_000, Vec3::new(0.25, 0.0, -0.1), dir, len, 0.5, 2.0);
        let mut clamped = false;
        let out = teleop_core::session::replay_with(&trace, &cfg, |t, _| {
            clamped |= t.arms.left.command.clamped;
        })
        .unwrap();
        assert!(!clamped, "line must stay inside the robot sphere");
        let got = out.metrics.path_length.left;
        assert!((got - len).abs() <= 1e-6, "{dir:?}: path {got}");
        assert_eq!(out.metrics.rotation_travel.left, 0.0);
        // the right hand never appeared
        assert_eq!(out.metrics.path_length.right, 0.0);
    }
}

#[test]
fn metrics_are_additive_over_concatenation() {
    let cfg = unit_scale_config(RetargetMode::CoarseToFine);
    let start = Vec3::new(0.25, 0.0, -0.1);
    let mid = start + Vec3::new(0.0, 0.1, 0.1);
    let spin = |t: f64| UnitQuat::from_axis_angle(&Vec3::z(), 0.4 * smoothstep(t / 1.5));
    let seg = |from: Vec3, to: Vec3, turn: f64| {
        let recs = script::hand_stream(ArmSide::Left, 2_000_000, 60, 0, move |t| {
            let s = smoothstep(t / 1.5);
            Some((from + (to - from) * s, UnitQuat::from_axis_angle(&Vec3::z(), turn) * spin(t)))
        });
        Trace::from_records([0; 32], 2_000_000, recs).unwrap()
    };
    let a = seg(start, mid, 0.0);
    // b starts exactly where a ends
    let b = seg(mid, mid + Vec3::new(0.15, -0.05, 0.0), 0.4);
    let ra = replay(&a, &cfg).unwrap().metrics;
    let rb = replay(&b, &cfg).unwrap().metrics;
    let rab = replay(&a.concat(&b), &cfg).unwrap().metrics;
    for side in ArmSide::ALL {
        let p = ra.path_length[side] + rb.path_length[side];
        let r = ra.rotation_travel[side] + rb.rotation_travel[side];
        assert!((rab.path_length[side] - p).abs() <= 1e-9, "{side:?} path");
        assert!((rab.rotation_travel[side] - r).abs() <= 1e-9, "{side:?} rotation {} vs {}", rab.rotation_travel[side], r);
    }
    assert!(rab.path_length.left > 0.2);
    assert!(rab.rotation_travel.left > 0.7);
}

#[test]
fn compare_same_config_twice_gives_identical_rows() {
    let cfg = EngineConfig::default();
    let trace = script::demo_session(8_000_000, cfg.hash()).unwrap();
    let rows = compare(&trace, &[("a".into(), cfg.clone()), ("a".into(), cfg.clone())]).unwrap();
    assert_eq!(rows[0], rows[1]);
    let table = compare_table(&rows);
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    assert!(compare(&trace, &[("a".into(), cfg)]).is_err());
}

#[test]
fn relative_freezes_rotation_while_disengaged() {
    let duration_us = 6_000_000;
    let omega = 0.5;
    let (on, off) = (2.0, 3.0);
    let mut records: Vec<TraceRecord> = script::hand_stream(ArmSide::Left, duration_us, 60, 0, |t| {
        Some((
            Vec3::new(0.25, 0.0, -0.1),
            UnitQuat::from_axis_angle(&Vec3::z(), omega * t),
        ))
    });
    records.extend(script::controller_stream(ArmSide::Left, duration_us, 50, 0, |t| {
        let mut c = ControllerState::idle(ArmSide::Left);
        c.mode_hold = (on..off).contains(&t);
        c
    }));
    let trace = Trace::from_records([0; 32], duration_us, records).unwrap();
    let rows = compare(
        &trace,
        &[
            ("c2f".into(), unit_scale_config(RetargetMode::CoarseToFine)),
            ("relative".into(), unit_scale_config(RetargetMode::Relative)),
        ],
    )
    .unwrap();
    let (c2f, rel) = (&rows[0].metrics, &rows[1].metrics);
    // the relative command only turns while the clutch is held
    let expected = omega * (off - on);
    let slack = 3.0 * omega * DT;
    let got = rel.rotation_travel.left;
    assert!((got - expected).abs() <= slack, "relative travel {got}, expected {expected}");
    // coarse-to-fine follows the hand outside the hold
    assert!(c2f.rotation_travel.left > 2.0 * expected);
    let disengaged_ticks = ((duration_us as f64 * 1e-6 - (off - on)) / DT) as u64;
    assert!(rel.frozen_ticks.left + 6 >= disengaged_ticks);
    assert!(c2f.frozen_ticks.left < rel.frozen_ticks.left);
}

#[test]
fn natural_only_ignores_thumbsticks() {
    let cfg = EngineConfig::default();
    let trace = script::demo_session(30_000_000, cfg.hash()).unwrap();
    let mut natural = cfg.clone();
    natural.engine.retarget_mode = RetargetMode::NaturalOnly;
    let ablated = script::zero_thumbsticks(&trace);
    assert_ne!(trace, ablated);
    let rows = compare(
        &trace,
        &[("natural".into(), natural.clone()), ("c2f".into(), cfg.clone())],
    )
    .unwrap();
    let rows_ablated = compare(&ablated, &[("natural".into(), natural), ("c2f".into(), cfg)]).unwrap();
    assert_eq!(rows[0].command_log_sha256, rows_ablated[0].command_log_sha256);
    assert_eq!(rows[0].metrics.joystick_active_time, 0.0);
    assert_ne!(rows[1].command_log_sha256, rows_ablated[1].command_log_sha256);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("config");
    let default = EngineConfig::load(dir.join("default.toml")).unwrap();
    assert_eq!(default, EngineConfig::default());
    let natural = EngineConfig::load(dir.join("natural-only.toml")).unwrap();
    assert_eq!(natural.engine.retarget_mode, RetargetMode::NaturalOnly);
    let relative = EngineConfig::load(dir.join("relative.toml")).unwrap();
    assert_eq!(relative.engine.retarget_mode, RetargetMode::Relative);
    EngineConfig::load(dir.join("static-layout.toml")).unwrap();
    // the resolved dump reloads to the same config
    assert_eq!(EngineConfig::from_toml_str(&default.to_toml()).unwrap(), default);
}

#[test]
fn golden_trace_flags_foreign_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let trace = Trace::read(root.join("tests/golden/session.cft")).unwrap();
    assert_eq!(trace.duration_us(), 60_000_000);
    let own = replay(&trace, &EngineConfig::default()).unwrap();
    assert!(!own.config_mismatch);
    let relative = EngineConfig::load(root.join("config/relative.toml")).unwrap();
    assert!(replay(&trace, &relative).unwrap().config_mismatch);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_record_replays_byte_identically() {
    let cfg = EngineConfig::default();
    let source = script::demo_session(5_000_000, cfg.hash()).unwrap();
    let engine = Engine::new(cfg.clone()).unwrap();
    let (tx, rx) = tokio::sync::mpsc::channel(64);
    let (ticks_tx, _) = tokio::sync::broadcast::channel(16);
    let (_stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let frames: Vec<_> = source.records().iter().map(|r| r.frame).collect();
    // the feeder races the unpaced tick loop, so arrival stamps are arbitrary
    let feeder = tokio::spawn(async move {
        for f in frames {
            if tx.send(f).await.is_err() {
                break;
            }
            tokio::task::yield_now().await;
        }
    });
    let summary = run_engine(
        engine,
        rx,
        ticks_tx,
        RunOptions {
            clock: ClockMode::Simulated,
            duration_us: Some(5_000_000),
            record: true,
        },
        None,
        stop_rx,
    )
    .await;
    feeder.abort();
    let trace = summary.trace.expect("recorded");
    assert!(!trace.is_empty());
    // through the file format and back
    let trace = Trace::decode(&trace.encode()).unwrap();
    let out = replay(&trace, &cfg).unwrap();
    assert!(!out.config_mismatch);
    assert_eq!(out.ticks, summary.ticks);
    assert_eq!(out.command_log, summary.command_log);
    assert_eq!(out.metrics, summary.metrics);
}
