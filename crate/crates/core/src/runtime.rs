//! Live engine: network listeners, the paced tick loop and the console bridge.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::task::JoinHandle;

use crate::config::{ClockMode, ConfigError, EngineConfig};
use crate::engine::{Engine, TickOutput};
use crate::session::{MetricsAccumulator, MetricsReport, Trace};
use crate::transport::bridge::{self, BridgeHub, SessionInfo};
use crate::transport::codec::InputFrame;
use crate::transport::udp::{self, CommandSender, UdpStats};

/// Engine input queue depth.
pub const INPUT_QUEUE: usize = 1024;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("binding {what} on {addr}: {source}")]
    Bind {
        what: &'static str,
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("engine task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// `Simulated` runs ticks back to back instead of pacing them by the OS clock.
    pub clock: ClockMode,
    /// Stop after the tick scheduled before this time.
    pub duration_us: Option<u64>,
    pub record: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ticks: u64,
    pub duration_us: u64,
    /// Concatenated CommandFrames, left then right per tick.
    pub command_log: Vec<u8>,
    pub trace: Option<Trace>,
    pub metrics: MetricsReport,
}

/// Runs the tick loop. Inputs drained before tick `k` are stamped with that
/// tick's time, so the recorded trace replays to the same command log.
pub async fn run_engine(
    mut engine: Engine,
    mut inputs: mpsc::Receiver<InputFrame>,
    ticks: broadcast::Sender<Arc<TickOutput>>,
    opts: RunOptions,
    commands: Option<CommandSender>,
    mut shutdown: watch::Receiver<bool>,
) -> RunSummary {
    let config = engine.config().clone();
    let mut trace = opts.record.then(|| Trace::new(config.hash(), u64::MAX));
    let mut metrics = MetricsAccumulator::new(
        config.session.goals.clone(),
        config.session.time_limit_s,
        config.dt(),
    );
    let mut command_log = Vec::new();
    let start = tokio::time::Instant::now();
    loop {
        let t = engine.next_tick_time_us();
        if opts.duration_us.is_some_and(|d| t >= d) || *shutdown.borrow() {
            break;
        }
        match opts.clock {
            ClockMode::Wall => {
                let due = start + Duration::from_micros(t);
                tokio::select! {
                    _ = tokio::time::sleep_until(due) => {}
                    _ = shutdown.changed() => break,
                }
            }
            ClockMode::Simulated => tokio::task::yield_now().await,
        }
        while let Ok(frame) = inputs.try_recv() {
            engine.push_input(t, frame);
            if let Some(trace) = &mut trace {
                trace.push(t, frame).expect("tick times are monotone");
            }
        }
        let out = engine.tick();
        for frame in out.command_frames() {
            command_log.extend_from_slice(&frame.encode());
            if let Some(sender) = &commands {
                sender.send(&frame);
            }
        }
        metrics.observe(&out, engine.sim().arms());
        let _ = ticks.send(Arc::new(out));
    }
    let duration_us = engine.next_tick_time_us();
    if let Some(trace) = &mut trace {
        trace.set_duration_us(duration_us);
    }
    RunSummary {
        ticks: engine.ticks_run(),
        duration_us,
        command_log,
        trace,
        metrics: metrics.finish(duration_us),
    }
}

/// Stops a [`LiveSession`] from another task.
#[derive(Debug, Clone)]
pub struct ShutdownHandle(Arc<watch::Sender<bool>>);

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.0.send_replace(true);
    }
}

/// A running engine with its UDP listeners and bridge.
pub struct LiveSession {
    pub bridge_addr: SocketAddr,
    pub pose_addr: SocketAddr,
    pub controller_addr: SocketAddr,
    pub udp_stats: Arc<UdpStats>,
    ticks: broadcast::Sender<Arc<TickOutput>>,
    shutdown: ShutdownHandle,
    engine: JoinHandle<RunSummary>,
    services: Vec<JoinHandle<()>>,
}

impl LiveSession {
    pub async fn start(config: EngineConfig, opts: RunOptions) -> Result<Self, RuntimeError> {
        let engine = Engine::new(config.clone())?;
        let net = &config.network;
        let bind_udp = |what, addr| async move {
            UdpSocket::bind(addr)
                .await
                .map_err(|source| RuntimeError::Bind { what, addr, source })
        };
        let pose_socket = bind_udp("pose listener", net.pose_listen).await?;
        let controller_socket = bind_udp("controller listener", net.controller_listen).await?;
        let bridge_listener = TcpListener::bind(net.bridge_listen)
            .await
            .map_err(|source| RuntimeError::Bind {
                what: "bridge",
                addr: net.bridge_listen,
                source,
            })?;
        let commands = net
            .command_target
            .map(|addr| {
                CommandSender::bind(addr).map_err(|source| RuntimeError::Bind {
                    what: "command sender",
                    addr,
                    source,
                })
            })
            .transpose()?;

        let local = |r: std::io::Result<SocketAddr>| r.expect("bound socket has an address");
        let pose_addr = local(pose_socket.local_addr());
        let controller_addr = local(controller_socket.local_addr());
        let bridge_addr = local(bridge_listener.local_addr());

        let (input_tx, input_rx) = mpsc::channel(INPUT_QUEUE);
        let (ticks_tx, ticks_rx) = broadcast::channel(256);
        let (shutdown_tx, shutdown_rx) = watch::channel(false);
        let udp_stats = Arc::new(UdpStats::default());

        let hub = BridgeHub::new(
            SessionInfo {
                config_hash: config.hash_hex(),
                retarget_mode: config.engine.retarget_mode,
                layout: config.engine.layout_mode,
                tick_rate_hz: config.engine.tick_rate_hz,
            },
            input_tx.clone(),
        );
        let services = vec![
            tokio::spawn(hub.clone().fan_out(ticks_rx)),
            tokio::spawn(bridge::serve(bridge_listener, hub, shutdown_rx.clone())),
            tokio::spawn(udp::listen(
                pose_socket,
                input_tx.clone(),
                udp_stats.clone(),
                shutdown_rx.clone(),
            )),
            tokio::spawn(udp::listen(
                controller_socket,
                input_tx,
                udp_stats.clone(),
                shutdown_rx.clone(),
            )),
        ];
        log::info!(
            "engine running: bridge ws://{bridge_addr}, poses udp {pose_addr}, controllers udp {controller_addr}"
        );
        let engine = tokio::spawn(run_engine(
            engine,
            input_rx,
            ticks_tx.clone(),
            opts,
            commands,
            shutdown_rx,
        ));
        Ok(LiveSession {
            bridge_addr,
            pose_addr,
            controller_addr,
            udp_stats,
            ticks: ticks_tx,
            shutdown: ShutdownHandle(Arc::new(shutdown_tx)),
            engine,
            services,
        })
    }

    /// Every tick output from now on.
    pub fn subscribe(&self) -> broadcast::Receiver<Arc<TickOutput>> {
        self.ticks.subscribe()
    }

    pub fn shutdown(&self) {
        self.shutdown.shutdown();
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.shutdown.clone()
    }

    /// Waits for the engine to stop (duration reached or shutdown), then
    /// stops the listeners.
    pub async fn join(self) -> Result<RunSummary, RuntimeError> {
        let summary = self.engine.await?;
        self.shutdown.shutdown();
        drop(self.ticks);
        for s in self.services {
            s.await?;
        }
        Ok(summary)
    }
}
