//! Wire formats, rate gating and network front ends.

pub mod bridge;
pub mod codec;
pub mod rate;
pub mod udp;
