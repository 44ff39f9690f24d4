//! Deterministic replay of traces and side-by-side comparison.

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::metrics::{MetricsAccumulator, MetricsReport};
use super::trace::Trace;
use crate::config::{ConfigError, EngineConfig};
use crate::engine::{Engine, TickOutput};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("compare needs at least two configs, got {0}")]
    TooFewConfigs(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    /// Concatenated CommandFrames, left then right per tick.
    pub command_log: Vec<u8>,
    pub metrics: MetricsReport,
    /// The trace was recorded under a different config.
    pub config_mismatch: bool,
    pub ticks: u64,
    pub anchor_emissions: u64,
    pub scene_emissions: u64,
}

impl ReplayOutput {
    pub fn command_log_sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.command_log))
    }
}

/// Runs `trace` through a fresh engine, calling `observe` after every tick.
pub fn replay_with(
    trace: &Trace,
    config: &EngineConfig,
    mut observe: impl FnMut(&TickOutput, &Engine),
) -> Result<ReplayOutput, ConfigError> {
    let mut engine = Engine::new(config.clone())?;
    let config_mismatch = trace.header.config_hash != config.hash();
    if config_mismatch {
        log::warn!(
            "trace was recorded under config {} but is replayed under {}",
            hex::encode(trace.header.config_hash),
            config.hash_hex()
        );
    }
    for r in trace.records() {
        engine.push_input(r.arrival_us, r.frame);
    }
    let mut metrics = MetricsAccumulator::new(
        config.session.goals.clone(),
        config.session.time_limit_s,
        config.dt(),
    );
    let mut command_log = Vec::new();
    let (mut anchors, mut scenes) = (0, 0);
    while engine.next_tick_time_us() < trace.duration_us() {
        let out = engine.tick();
        for f in out.command_frames() {
            command_log.extend_from_slice(&f.encode());
        }
        anchors += out.anchors.is_some() as u64;
        scenes += out.scene.is_some() as u64;
        metrics.observe(&out, engine.sim().arms());
        observe(&out, &engine);
    }
    Ok(ReplayOutput {
        command_log,
        metrics: metrics.finish(trace.duration_us()),
        config_mismatch,
        ticks: engine.ticks_run(),
        anchor_emissions: anchors,
        scene_emissions: scenes,
    })
}

pub fn replay(trace: &Trace, config: &EngineConfig) -> Result<ReplayOutput, ConfigError> {
    replay_with(trace, config, |_, _| {})
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub config_hash: String,
    pub command_log_sha256: String,
    pub config_mismatch: bool,
    pub metrics: MetricsReport,
}

pub fn compare(
    trace: &Trace,
    configs: &[(String, EngineConfig)],
) -> Result<Vec<CompareRow>, ReplayError> {
    if configs.len() < 2 {
        return Err(ReplayError::TooFewConfigs(configs.len()));
    }
    configs
        .iter()
        .map(|(label, cfg)| {
            let out = replay(trace, cfg)?;
            Ok(CompareRow {
                label: label.clone(),
                config_hash: cfg.hash_hex(),
                command_log_sha256: out.command_log_sha256(),
                config_mismatch: out.config_mismatch,
                metrics: out.metrics,
            })
        })
        .collect()
}

/// Tab-separated table, one row per config.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut s = String::from(
        "label\tsuccess\tcompletion_s\tpath_l_m\tpath_r_m\trot_l_rad\trot_r_rad\tmode_switches\tjoystick_s\tclamps\tvis_toggles\tlog_sha256\n",
    );
    for r in rows {
        let m = &r.metrics;
        s.push_str(&format!(
            "{}\t{}\t{:.3}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{:.3}\t{}\t{}\t{}\n",
            r.label,
            m.success,
            m.completion_time,
            m.path_length.left,
            m.path_length.right,
            m.rotation_travel.left,
            m.rotation_travel.right,
            m.mode_switch_count,
            m.joystick_active_time,
            m.clamp_count,
            m.visibility_toggles,
            &r.command_log_sha256[..16],
        ));
    }
    s
}
