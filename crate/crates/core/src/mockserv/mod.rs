//! Deterministic OpenAI-compatible mock backend.
//!
//! The mock executes at most `capacity` requests at once, each for exactly
//! `per_request_duration_s`; later arrivals queue FIFO. Its power draw is
//! `idle + peak * inflight / capacity`, which makes energy per request fall
//! as load rises and flatten once the server is saturated. That curve has a
//! closed form ([`analytic_energy_per_request`]) the harness can be checked
//! against end to end.

mod oracle;
mod server;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::analytic_energy_per_request;
pub use server::{InflightEntry, InflightLog, MockPowerSource, MockServer, MockState, PowerReport};

/// Which requests the mock answers with HTTP 500.
///
/// The request index is the `x-prompt-id` header when the client sends one,
/// otherwise the 0-based arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSchedule {
    /// Fails the `n`th, `2n`th, ... request (indices `n-1`, `2n-1`, ...).
    EveryNth(u64),
    /// Fails exactly these indices.
    Indices(Vec<u64>),
}

impl FaultSchedule {
    pub fn hits(&self, index: u64) -> bool {
        match self {
            FaultSchedule::EveryNth(0) => false,
            FaultSchedule::EveryNth(n) => (index + 1).is_multiple_of(*n),
            FaultSchedule::Indices(v) => v.contains(&index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    /// Maximum concurrently executing requests.
    pub capacity: u32,
    pub per_request_duration_s: f64,
    pub tokens_per_response: u32,
    pub idle_power_w: f64,
    pub peak_power_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_schedule: Option<FaultSchedule>,
    /// Seeds the filler text.
    #[serde(default)]
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            capacity: 100,
            per_request_duration_s: 2.0,
            tokens_per_response: 16,
            idle_power_w: 100.0,
            peak_power_w: 300.0,
            fault_schedule: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MockConfigError {
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("per-request duration must be > 0")]
    NonPositiveDuration,
    #[error("tokens per response must be at least 1")]
    ZeroTokens,
    #[error("power levels must be finite and >= 0")]
    NegativePower,
}

impl MockConfig {
    pub fn validate(&self) -> Result<(), MockConfigError> {
        if self.capacity == 0 {
            return Err(MockConfigError::ZeroCapacity);
        }
        if !(self.per_request_duration_s.is_finite() && self.per_request_duration_s > 0.0) {
            return Err(MockConfigError::NonPositiveDuration);
        }
        if self.tokens_per_response == 0 {
            return Err(MockConfigError::ZeroTokens);
        }
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.idle_power_w) || !ok(self.peak_power_w) {
            return Err(MockConfigError::NegativePower);
        }
        Ok(())
    }

    /// `idle + peak * inflight / capacity`.
    pub fn power_at(&self, inflight: u32) -> f64 {
        self.idle_power_w + self.peak_power_w * (inflight as f64 / self.capacity as f64)
    }
}
