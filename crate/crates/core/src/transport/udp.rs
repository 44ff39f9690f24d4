//! UDP datagram front end: latest-wins inputs, losses tolerated.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use tokio::net::UdpSocket;
use tokio::sync::{mpsc, watch};

use crate::transport::codec::{CommandFrame, InputFrame};

#[derive(Debug, Default)]
pub struct UdpStats {
    pub received: AtomicU64,
    pub malformed: AtomicU64,
    /// Dropped because the engine queue was full.
    pub dropped: AtomicU64,
}

/// Decodes every datagram on `socket` into `inputs` until shutdown.
pub async fn listen(
    socket: UdpSocket,
    inputs: mpsc::Sender<InputFrame>,
    stats: Arc<UdpStats>,
    mut shutdown: watch::Receiver<bool>,
) {
    let mut buf = [0u8; 512];
    loop {
        tokio::select! {
            r = socket.recv_from(&mut buf) => match r {
                Ok((n, peer)) => {
                    stats.received.fetch_add(1, Ordering::Relaxed);
                    match InputFrame::decode(&buf[..n]) {
                        Ok(frame) => {
                            if inputs.try_send(frame).is_err() {
                                stats.dropped.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                        Err(e) => {
                            stats.malformed.fetch_add(1, Ordering::Relaxed);
                            log::debug!("udp: bad datagram from {peer}: {e}");
                        }
                    }
                }
                Err(e) => log::warn!("udp receive failed: {e}"),
            },
            _ = shutdown.changed() => break,
        }
    }
}

/// Sends CommandFrames to a fixed target.
pub struct CommandSender {
    socket: std::net::UdpSocket,
    target: SocketAddr,
}

impl CommandSender {
    pub fn bind(target: SocketAddr) -> std::io::Result<Self> {
        let local: SocketAddr = if target.is_ipv4() {
            "0.0.0.0:0".parse().expect("valid")
        } else {
            "[::]:0".parse().expect("valid")
        };
        let socket = std::net::UdpSocket::bind(local)?;
        socket.set_nonblocking(true)?;
        Ok(CommandSender { socket, target })
    }

    pub fn send(&self, frame: &CommandFrame) {
        if let Err(e) = self.socket.send_to(&frame.encode(), self.target) {
            log::debug!("udp: command send failed: {e}");
        }
    }
}
