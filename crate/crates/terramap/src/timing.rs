//! Per-stage wall-clock timing, removable at compile time.
//!
//! With the `no-timing` feature the timer compiles to a no-op and every
//! reported duration is zero, so instrumentation can be excluded from
//! latency comparisons entirely.

#[cfg(not(feature = "no-timing"))]
use std::time::Instant;

/// Measures elapsed milliseconds between stage marks.
pub struct StageTimer {
    #[cfg(not(feature = "no-timing"))]
    last: Instant,
}

impl StageTimer {
    pub fn start() -> Self {
        StageTimer {
            #[cfg(not(feature = "no-timing"))]
            last: Instant::now(),
        }
    }

    /// Milliseconds since construction or the previous `lap`.
    pub fn lap(&mut self) -> f64 {
        #[cfg(not(feature = "no-timing"))]
        {
            let now = Instant::now();
            let ms = now.duration_since(self.last).as_secs_f64() * 1e3;
            self.last = now;
            ms
        }
        #[cfg(feature = "no-timing")]
        {
            0.0
        }
    }
}
