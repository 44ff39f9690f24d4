//! Slot-aligned rate gates over a microsecond clock.
//!
//! Slot `k` of a gate running at `rate` Hz starts at `ceil(k * 1e6 / rate)`
//! microseconds. A gate emits at most once per slot, so emission counts are a
//! pure function of the timestamps it sees.

use std::time::Instant;

pub const MICROS_PER_SEC: u64 = 1_000_000;

/// Index of the slot containing `t_us`.
pub fn slot_index(t_us: u64, rate_hz: u32) -> u64 {
    ((t_us as u128 * rate_hz as u128) / MICROS_PER_SEC as u128) as u64
}

/// First microsecond of slot `k`.
pub fn slot_start_us(k: u64, rate_hz: u32) -> u64 {
    let num = k as u128 * MICROS_PER_SEC as u128;
    num.div_ceil(rate_hz as u128) as u64
}

/// Decimating gate: forwards the most recent item once per output slot.
#[derive(Debug, Clone)]
pub struct RateGate<T> {
    rate_hz: u32,
    last_slot: Option<u64>,
    latest: Option<T>,
}

impl<T: Clone> RateGate<T> {
    pub fn new(rate_hz: u32) -> Self {
        assert!(rate_hz > 0, "rate gate needs a positive rate");
        RateGate {
            rate_hz,
            last_slot: None,
            latest: None,
        }
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    /// Records `item` as the latest and emits it if `t_us` opens a new slot.
    pub fn offer(&mut self, t_us: u64, item: T) -> Option<T> {
        self.latest = Some(item);
        self.poll(t_us)
    }

    /// Emits the latest item if `t_us` is in a slot that has not emitted yet.
    pub fn poll(&mut self, t_us: u64) -> Option<T> {
        let slot = slot_index(t_us, self.rate_hz);
        if self.last_slot.is_some_and(|s| s >= slot) {
            return None;
        }
        let item = self.latest.clone()?;
        self.last_slot = Some(slot);
        Some(item)
    }
}

/// Source of engine time in microseconds.
pub trait Clock: Send {
    fn now_us(&self) -> u64;
}

/// Wall clock measured from its creation.
#[derive(Debug, Clone)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock {
            start: Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_us(&self) -> u64 {
        self.start.elapsed().as_micros() as u64
    }
}

/// Manually advanced clock used for tests, replays and `--sim-clock` runs.
#[derive(Debug, Clone, Default)]
pub struct SimClock {
    now_us: u64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, t_us: u64) {
        assert!(t_us >= self.now_us, "simulated clock must be monotone");
        self.now_us = t_us;
    }

    pub fn advance(&mut self, dt_us: u64) {
        self.now_us += dt_us;
    }
}

impl Clock for SimClock {
    fn now_us(&self) -> u64 {
        self.now_us
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slots_round_trip() {
        for rate in [15, 30, 50, 60, 500] {
            for k in 0..5000 {
                assert_eq!(slot_index(slot_start_us(k, rate), rate), k);
                if k > 0 {
                    assert_eq!(slot_index(slot_start_us(k, rate) - 1, rate), k - 1);
                }
            }
        }
    }

    #[test]
    fn decimate_by_two() {
        let mut gate = RateGate::new(30);
        let emitted: Vec<u64> = (0..600)
            .filter_map(|k| gate.offer(slot_start_us(k, 60), k))
            .collect();
        assert_eq!(emitted.len(), 300);
        assert!(emitted.iter().enumerate().all(|(i, k)| *k == 2 * i as u64));
    }

    #[test]
    fn empty_input_never_emits() {
        let mut gate: RateGate<u32> = RateGate::new(30);
        for t in (0..10_000_000).step_by(5_000) {
            assert_eq!(gate.poll(t), None);
        }
    }

    #[test]
    fn ten_seconds_sixty_to_thirty() {
        let mut gate = RateGate::new(30);
        let n = (0..)
            .map(|k| slot_start_us(k, 60))
            .take_while(|t| *t < 10 * MICROS_PER_SEC)
            .filter(|t| gate.offer(*t, ()).is_some())
            .count();
        assert_eq!(n, 300);
    }

    #[test]
    fn sim_clock_is_monotone() {
        let mut c = SimClock::new();
        c.advance(10);
        c.set(25);
        assert_eq!(c.now_us(), 25);
    }

    proptest! {
        #[test]
        fn no_slot_emits_twice(mut ts in prop::collection::vec(0u64..5_000_000, 1..500), rate in 1u32..200) {
            ts.sort_unstable();
            let mut gate = RateGate::new(rate);
            let slots: Vec<u64> = ts.iter().filter(|t| gate.offer(**t, ()).is_some()).map(|t| slot_index(*t, rate)).collect();
            let mut dedup = slots.clone();
            dedup.dedup();
            prop_assert_eq!(&slots, &dedup);
            let mut distinct: Vec<u64> = ts.iter().map(|t| slot_index(*t, rate)).collect();
            distinct.dedup();
            prop_assert_eq!(slots.len(), distinct.len());
        }
    }
}
