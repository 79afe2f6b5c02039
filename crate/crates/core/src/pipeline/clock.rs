use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

/// Monotonic seconds.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

#[derive(Debug)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Advances by a fixed tick on every read. Makes latencies and timestamps a
/// function of call order only, so logs from stub runs are reproducible.
#[derive(Debug)]
pub struct SteppedClock {
    tick_micros: u64,
    reads: AtomicU64,
}

impl SteppedClock {
    pub fn new(tick_seconds: f64) -> Self {
        SteppedClock {
            tick_micros: (tick_seconds * 1e6).round() as u64,
            reads: AtomicU64::new(0),
        }
    }
}

impl Clock for SteppedClock {
    fn now(&self) -> f64 {
        let n = self.reads.fetch_add(1, Ordering::SeqCst);
        (n * self.tick_micros) as f64 / 1e6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stepped_clock_ticks() {
        let c = SteppedClock::new(0.25);
        assert_eq!([c.now(), c.now(), c.now()], [0.0, 0.25, 0.5]);
    }

    #[test]
    fn monotonic_never_goes_back() {
        let c = MonotonicClock::new();
        let a = c.now();
        assert!(c.now() >= a);
    }
}
