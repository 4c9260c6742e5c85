use super::MockConfig;

/// Closed-form energy per request for an `n`-request burst against the mock.
///
/// The burst runs as `ceil(n / C)` back-to-back batches of length `d`, the last
/// one possibly partial. Each batch costs idle power for its full length plus
/// peak power scaled by its occupancy.
pub fn analytic_energy_per_request(n: u32, cfg: &MockConfig) -> f64 {
    assert!(n >= 1, "request count must be at least 1");
    let c = cfg.capacity;
    let d = cfg.per_request_duration_s;
    let batches = n.div_ceil(c);
    let mut joules = 0.0;
    for b in 0..batches {
        let occupancy = (n - b * c).min(c);
        joules += cfg.idle_power_w * d + cfg.peak_power_w * (occupancy as f64 / c as f64) * d;
    }
    joules / n as f64
}
