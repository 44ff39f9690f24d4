//! WebSocket bridge to the operator console.
//!
//! Every message is one JSON text frame tagged by `type`. Any number of
//! observers may connect; at most one connection holds the driver role and
//! may send inputs. The engine side publishes each tick once into a broadcast
//! channel of pre-serialized messages.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio_tungstenite::tungstenite::Message;

use crate::engine::TickOutput;
use crate::perception::{EyeSide, LayoutMode};
use crate::retarget::{ArmMode, ArmSide, ControllerState, RetargetMode, Sided};
use crate::sim::SceneSnapshot;
use crate::transport::codec::{ControllerFrame, InputFrame, PoseFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Driver,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        role: Role,
    },
    Pose {
        side: ArmSide,
        timestamp_us: u64,
        position: [f64; 3],
        /// `(w, x, y, z)`
        orientation: [f64; 4],
    },
    Controller {
        side: ArmSide,
        timestamp_us: u64,
        #[serde(default)]
        mode_hold: bool,
        #[serde(default)]
        vis_toggle: bool,
        #[serde(default)]
        grip: bool,
        #[serde(default)]
        u1: f32,
        #[serde(default)]
        u2: f32,
    },
}

impl ClientMessage {
    /// The equivalent binary input, validated by the frame codec.
    pub fn to_input(&self) -> Option<Result<InputFrame, crate::transport::codec::DecodeError>> {
        let frame = match *self {
            ClientMessage::Hello { .. } => return None,
            ClientMessage::Pose {
                side,
                timestamp_us,
                position,
                orientation,
            } => InputFrame::Pose(PoseFrame {
                side,
                timestamp_us,
                position,
                orientation,
            }),
            ClientMessage::Controller {
                side,
                timestamp_us,
                mode_hold,
                vis_toggle,
                grip,
                u1,
                u2,
            } => InputFrame::Controller(ControllerFrame::from_state(&ControllerState {
                side,
                mode_hold,
                vis_toggle,
                u1: u1 as f64,
                u2: u2 as f64,
                grip_close: grip,
                timestamp_us,
            })),
        };
        Some(InputFrame::decode(&frame.encode()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Another connection already holds the driver role.
    Busy,
    /// Not valid JSON or not a known message.
    Malformed,
    /// Inputs sent without the driver role.
    Forbidden,
    /// Well-formed message whose frame content fails validation.
    InvalidFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmTelemetry {
    pub side: ArmSide,
    pub mode: ArmMode,
    pub stale: bool,
    pub engaged: bool,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub grip_close: bool,
    pub clamped: bool,
    /// Timestamp of the hand sample the command was computed from.
    pub hand_timestamp_us: Option<u64>,
}

/// One anchor record per (arm, eye).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorMessage {
    pub arm: ArmSide,
    pub eye: EyeSide,
    pub anchor: [f64; 3],
    pub panel_center: [f64; 3],
    pub scale: f64,
    pub visible: bool,
    pub behind_camera: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        role: Role,
        config_hash: String,
        retarget_mode: RetargetMode,
        layout: LayoutMode,
        tick_rate_hz: u32,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
    Telemetry {
        tick: u64,
        time_us: u64,
        arms: Vec<ArmTelemetry>,
        visibility: Sided<bool>,
    },
    Anchors {
        time_us: u64,
        layout: LayoutMode,
        placements: Vec<AnchorMessage>,
    },
    Scene {
        snapshot: SceneSnapshot,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

/// Telemetry, then anchors and scene when they were emitted on this tick.
pub fn tick_messages(out: &TickOutput) -> Vec<ServerMessage> {
    let arms = ArmSide::ALL
        .iter()
        .map(|&side| {
            let a = &out.arms[side];
            ArmTelemetry {
                side,
                mode: a.mode,
                stale: a.stale,
                engaged: a.engaged,
                position: a.command.position.into(),
                orientation: a.command.orientation.to_array(),
                grip_close: a.command.grip_close,
                clamped: a.command.clamped,
                hand_timestamp_us: out.hand_timestamp_us[side],
            }
        })
        .collect();
    let mut msgs = vec![ServerMessage::Telemetry {
        tick: out.tick,
        time_us: out.time_us,
        arms,
        visibility: out.visibility,
    }];
    if let Some(batch) = &out.anchors {
        msgs.push(ServerMessage::Anchors {
            time_us: batch.time_us,
            layout: batch.layout,
            placements: batch
                .placements
                .iter()
                .map(|p| AnchorMessage {
                    arm: p.arm,
                    eye: p.eye,
                    anchor: p.anchor.into(),
                    panel_center: p.panel_center.into(),
                    scale: p.panel_scale,
                    visible: p.visible,
                    behind_camera: p.behind_camera,
                })
                .collect(),
        });
    }
    if let Some(snapshot) = &out.scene {
        msgs.push(ServerMessage::Scene {
            snapshot: snapshot.clone(),
        });
    }
    msgs
}

#[derive(Debug, Clone)]
pub struct SessionInfo {
    pub config_hash: String,
    pub retarget_mode: RetargetMode,
    pub layout: LayoutMode,
    pub tick_rate_hz: u32,
}

/// Shared between the fan-out task and every connection.
pub struct BridgeHub {
    info: SessionInfo,
    inputs: mpsc::Sender<InputFrame>,
    messages: broadcast::Sender<Arc<str>>,
    latest_scene: watch::Sender<Option<Arc<str>>>,
    driver_taken: AtomicBool,
}

impl BridgeHub {
    pub fn new(info: SessionInfo, inputs: mpsc::Sender<InputFrame>) -> Arc<Self> {
        Arc::new(BridgeHub {
            info,
            inputs,
            messages: broadcast::channel(1024).0,
            latest_scene: watch::channel(None).0,
            driver_taken: AtomicBool::new(false),
        })
    }

    /// Serializes one tick and sends it to every connection.
    pub fn publish(&self, out: &TickOutput) {
        for msg in tick_messages(out) {
            let text: Arc<str> = msg.to_json().into();
            if matches!(msg, ServerMessage::Scene { .. }) {
                self.latest_scene.send_replace(Some(text.clone()));
            }
            // no receivers is fine
            let _ = self.messages.send(text);
        }
    }

    /// Publishes every tick from `ticks` until the channel closes.
    pub async fn fan_out(self: Arc<Self>, mut ticks: broadcast::Receiver<Arc<TickOutput>>) {
        loop {
            match ticks.recv().await {
                Ok(out) => self.publish(&out),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("bridge fan-out skipped {n} ticks");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    }

    pub fn driver_connected(&self) -> bool {
        self.driver_taken.load(Ordering::SeqCst)
    }

    fn welcome(&self, role: Role) -> String {
        ServerMessage::Welcome {
            role,
            config_hash: self.info.config_hash.clone(),
            retarget_mode: self.info.retarget_mode,
            layout: self.info.layout,
            tick_rate_hz: self.info.tick_rate_hz,
        }
        .to_json()
    }
}

fn error(code: ErrorCode, message: impl Into<String>) -> Message {
    Message::text(
        ServerMessage::Error {
            code,
            message: message.into(),
        }
        .to_json(),
    )
}

/// Accepts connections until `shutdown` flips to `true`.
pub async fn serve(listener: TcpListener, hub: Arc<BridgeHub>, mut shutdown: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let hub = hub.clone();
                    let shutdown = shutdown.clone();
                    tokio::spawn(async move {
                        if let Err(e) = handle_connection(stream, peer, hub, shutdown).await {
                            log::debug!("bridge connection {peer}: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("bridge accept failed: {e}"),
            },
            _ = shutdown.changed() => break,
        }
    }
}

struct DriverGuard<'a>(&'a AtomicBool);

impl Drop for DriverGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

async fn handle_connection(
    stream: TcpStream,
    peer: SocketAddr,
    hub: Arc<BridgeHub>,
    mut shutdown: watch::Receiver<bool>,
) -> Result<(), tokio_tungstenite::tungstenite::Error> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    log::info!("bridge: {peer} connected");
    let (mut sink, mut source) = ws.split();
    let mut messages = hub.messages.subscribe();
    let latest_scene = hub.latest_scene.borrow().clone();
    if let Some(scene) = latest_scene {
        sink.send(Message::text(scene.as_ref())).await?;
    }
    let mut driver: Option<DriverGuard<'_>> = None;
    loop {
        tokio::select! {
            msg = messages.recv() => match msg {
                Ok(text) => sink.send(Message::text(text.as_ref())).await?,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::debug!("bridge: {peer} lagged by {n} messages");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = source.next() => {
                let Some(incoming) = incoming else { break };
                let reply = match incoming? {
                    Message::Text(text) => {
                        match serde_json::from_str::<ClientMessage>(text.as_str()) {
                            Ok(ClientMessage::Hello { role: Role::Observer }) => {
                                driver = None;
                                Some(Message::text(hub.welcome(Role::Observer)))
                            }
                            Ok(ClientMessage::Hello { role: Role::Driver }) => {
                                if driver.is_some() {
                                    Some(Message::text(hub.welcome(Role::Driver)))
                                } else if hub
                                    .driver_taken
                                    .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
                                    .is_ok()
                                {
                                    driver = Some(DriverGuard(&hub.driver_taken));
                                    log::info!("bridge: {peer} is driving");
                                    Some(Message::text(hub.welcome(Role::Driver)))
                                } else {
                                    Some(error(ErrorCode::Busy, "a driver is already connected"))
                                }
                            }
                            Ok(input) => forward_input(&hub, driver.is_some(), &input).await,
                            Err(e) => Some(error(ErrorCode::Malformed, e.to_string())),
                        }
                    }
                    Message::Binary(bytes) => {
                        if driver.is_none() {
                            Some(error(ErrorCode::Forbidden, "inputs require the driver role"))
                        } else {
                            match InputFrame::decode(&bytes) {
                                Ok(frame) => send_input(&hub, frame).await,
                                Err(e) => Some(error(ErrorCode::InvalidFrame, e.to_string())),
                            }
                        }
                    }
                    Message::Close(_) => break,
                    _ => None,
                };
                if let Some(reply) = reply {
                    sink.send(reply).await?;
                }
            }
            _ = shutdown.changed() => break,
        }
    }
    log::info!("bridge: {peer} disconnected");
    let _ = sink.close().await;
    Ok(())
}

async fn forward_input(hub: &BridgeHub, is_driver: bool, msg: &ClientMessage) -> Option<Message> {
    if !is_driver {
        return Some(error(ErrorCode::Forbidden, "inputs require the driver role"));
    }
    match msg.to_input()? {
        Ok(frame) => send_input(hub, frame).await,
        Err(e) => Some(error(ErrorCode::InvalidFrame, e.to_string())),
    }
}

async fn send_input(hub: &BridgeHub, frame: InputFrame) -> Option<Message> {
    match hub.inputs.send(frame).await {
        Ok(()) => None,
        Err(_) => Some(error(ErrorCode::InvalidFrame, "engine has stopped")),
    }
}
