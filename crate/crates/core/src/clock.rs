//! Process-wide monotonic clock.
//!
//! Every timestamp the harness records (request send/completion times, power
//! samples, measurement windows) is expressed in seconds since one shared
//! origin, so values taken by different threads are directly comparable.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

static ORIGIN: OnceLock<Instant> = OnceLock::new();

fn origin() -> Instant {
    *ORIGIN.get_or_init(Instant::now)
}

/// Seconds elapsed since the process clock origin.
pub fn now() -> f64 {
    origin().elapsed().as_secs_f64()
}

/// The `Instant` corresponding to a clock reading.
pub fn instant_at(seconds: f64) -> Instant {
    origin() + Duration::from_secs_f64(seconds.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonic() {
        let a = now();
        let b = now();
        assert!(b >= a);
    }

    #[test]
    fn instant_roundtrip() {
        let t = now();
        let back = instant_at(t);
        let again = back.duration_since(origin()).as_secs_f64();
        assert!((again - t).abs() < 1e-6);
    }
}
