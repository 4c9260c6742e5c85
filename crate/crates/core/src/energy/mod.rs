//! Power sampling, energy integration and CO2eq estimation.
//!
//! Power sources are polled on a fixed interval between an explicit tracker
//! start and stop. The resulting samples are integrated with a zero-order
//! hold: each reading is assumed to hold until the next one, and the final
//! reading holds until the window closes.

mod emissions;
mod integrate;
mod sources;
mod tracker;

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emissions::{estimate_emissions, EmissionsEstimate, GridProfile, JOULES_PER_KWH};
pub use integrate::integrate_energy;
pub use sources::{
    parse_source, ConstantSource, HttpPowerSource, PowerSource, SourceError, TraceSource,
};
#[cfg(feature = "hardware")]
pub use sources::{NvidiaSmiSource, RaplSource};
pub use tracker::{start_tracker, Tracker};

/// One instantaneous power reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub source_id: String,
    /// Seconds on the harness clock, see [`crate::clock`].
    pub timestamp_s: f64,
    pub watts: f64,
}

impl PowerSample {
    pub fn new(source_id: impl Into<String>, timestamp_s: f64, watts: f64) -> Self {
        Self {
            source_id: source_id.into(),
            timestamp_s,
            watts,
        }
    }
}

/// The interval during which energy is attributed to a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl MeasurementWindow {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, EnergyError> {
        if !(start_s.is_finite() && end_s.is_finite()) || end_s < start_s {
            return Err(EnergyError::InvalidWindow { start_s, end_s });
        }
        Ok(Self { start_s, end_s })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Joules per source over one window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub per_source: BTreeMap<String, f64>,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn from_sources(per_source: BTreeMap<String, f64>) -> Self {
        let total = per_source.values().sum();
        Self { per_source, total }
    }

    /// Sum over the sources whose id starts with `gpu`.
    pub fn gpu_total(&self) -> f64 {
        self.per_source
            .iter()
            .filter(|(id, _)| is_gpu_source(id))
            .map(|(_, j)| j)
            .sum()
    }
}

pub fn is_gpu_source(id: &str) -> bool {
    id.starts_with("gpu")
}

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("no power sources registered")]
    NoSources,
    #[error("power source `{source_id}` failed to initialise: {reason}")]
    SourceInitFailure { source_id: String, reason: String },
    #[error("tracker is not running")]
    NotRunning,
    #[error("samples for `{source_id}` are not strictly increasing in time")]
    UnsortedSamples { source_id: String },
    #[error("sample for `{source_id}` at {timestamp_s}s lies outside the window")]
    SampleOutsideWindow { source_id: String, timestamp_s: f64 },
    #[error("invalid power reading for `{source_id}`: {watts} W")]
    InvalidPower { source_id: String, watts: f64 },
    #[error("invalid window [{start_s}, {end_s}]")]
    InvalidWindow { start_s: f64, end_s: f64 },
    #[error("invalid grid profile: {0}")]
    InvalidGrid(String),
    #[error("energy must be finite and >= 0, got {0}")]
    NegativeEnergy(f64),
    #[error("unknown power source descriptor `{0}`")]
    UnknownSourceSpec(String),
    #[error("writing samples: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    timestamp_s: f64,
    source_id: String,
    watts: f64,
}

/// Writes samples as `timestamp_s,source_id,watts` rows with a header.
pub fn write_samples_csv<W: io::Write>(samples: &[PowerSample], out: W) -> Result<(), EnergyError> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(SampleRow {
            timestamp_s: s.timestamp_s,
            source_id: s.source_id.clone(),
            watts: s.watts,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: io::Read>(input: R) -> Result<Vec<PowerSample>, EnergyError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<SampleRow>()
        .map(|row| {
            let row = row?;
            Ok(PowerSample::new(row.source_id, row.timestamp_s, row.watts))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakdown_total_is_sum() {
        let mut m = BTreeMap::new();
        m.insert("gpu0".to_string(), 10.0);
        m.insert("gpu1".to_string(), 5.0);
        m.insert("cpu-pkg0".to_string(), 2.5);
        let b = EnergyBreakdown::from_sources(m);
        assert_eq!(b.total, 17.5);
        assert_eq!(b.gpu_total(), 15.0);
    }

    #[test]
    fn window_rejects_reversed() {
        assert!(MeasurementWindow::new(2.0, 1.0).is_err());
        assert_eq!(MeasurementWindow::new(1.0, 1.0).unwrap().duration_s(), 0.0);
    }

    #[test]
    fn samples_csv_roundtrip() {
        let samples = vec![
            PowerSample::new("gpu0", 0.0, 100.0),
            PowerSample::new("cpu-pkg0", 0.0, 35.5),
            PowerSample::new("gpu0", 0.015, 212.25),
        ];
        let mut buf = Vec::new();
        write_samples_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp_s,source_id,watts\n"));
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), samples);
    }
}
