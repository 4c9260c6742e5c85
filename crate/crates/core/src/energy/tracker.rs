use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::warn;

use super::{EnergyError, MeasurementWindow, PowerSample, PowerSource};
use crate::clock;

/// A running sampler. Created by [`start_tracker`], finished by [`Tracker::stop`].
pub struct Tracker {
    sources: Vec<Arc<dyn PowerSource>>,
    start_s: f64,
    stop_tx: Option<mpsc::Sender<()>>,
    worker: Option<JoinHandle<Vec<PowerSample>>>,
}

fn read_all(sources: &[Arc<dyn PowerSource>], t: f64, out: &mut Vec<PowerSample>) {
    for src in sources {
        match src.read_watts() {
            Ok(w) if w.is_finite() && w >= 0.0 => out.push(PowerSample::new(src.id(), t, w)),
            Ok(w) => warn!("dropping invalid reading {w} W from `{}`", src.id()),
            Err(e) => warn!("power source `{}` read failed: {e}", src.id()),
        }
    }
}

/// Opens a measurement window and starts polling `sources` every `interval`.
///
/// Every source is read once synchronously at the window start; a source
/// failing that first read aborts with [`EnergyError::SourceInitFailure`].
pub fn start_tracker(
    sources: Vec<Arc<dyn PowerSource>>,
    interval: Duration,
) -> Result<Tracker, EnergyError> {
    if sources.is_empty() {
        return Err(EnergyError::NoSources);
    }
    let interval = interval.max(Duration::from_micros(100));

    let start_s = clock::now();
    let mut samples = Vec::new();
    for src in &sources {
        let watts = src
            .read_watts()
            .map_err(|e| EnergyError::SourceInitFailure {
                source_id: src.id().to_string(),
                reason: e.to_string(),
            })?;
        if !(watts.is_finite() && watts >= 0.0) {
            return Err(EnergyError::SourceInitFailure {
                source_id: src.id().to_string(),
                reason: format!("invalid reading {watts} W"),
            });
        }
        samples.push(PowerSample::new(src.id(), start_s, watts));
    }

    let (stop_tx, stop_rx) = mpsc::channel::<()>();
    let worker_sources = sources.clone();
    let start = clock::instant_at(start_s);
    let worker = thread::Builder::new()
        .name("power-sampler".into())
        .spawn(move || {
            let mut tick: u32 = 1;
            loop {
                let deadline = start + interval * tick;
                let wait = deadline.saturating_duration_since(std::time::Instant::now());
                match stop_rx.recv_timeout(wait) {
                    Err(RecvTimeoutError::Timeout) => {
                        read_all(&worker_sources, clock::now(), &mut samples);
                        tick += 1;
                    }
                    Ok(()) | Err(RecvTimeoutError::Disconnected) => break,
                }
            }
            samples
        })?;

    Ok(Tracker {
        sources,
        start_s,
        stop_tx: Some(stop_tx),
        worker: Some(worker),
    })
}

impl Tracker {
    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn is_running(&self) -> bool {
        self.worker.is_some()
    }

    /// Stops polling, takes the closing sample and returns the window.
    pub fn stop(&mut self) -> Result<(MeasurementWindow, Vec<PowerSample>), EnergyError> {
        let worker = self.worker.take().ok_or(EnergyError::NotRunning)?;
        if let Some(tx) = self.stop_tx.take() {
            let _ = tx.send(());
        }
        let mut samples = worker
            .join()
            .map_err(|_| EnergyError::Io(std::io::Error::other("sampler thread panicked")))?;

        let last = samples
            .iter()
            .map(|s| s.timestamp_s)
            .fold(self.start_s, f64::max);
        let mut end_s = clock::now();
        if end_s <= last {
            end_s = last + 1e-9;
        }
        read_all(&self.sources, end_s, &mut samples);
        Ok((MeasurementWindow::new(self.start_s, end_s)?, samples))
    }
}

impl Drop for Tracker {
    fn drop(&mut self) {
        if let Some(tx) = self.stop_tx.take() {
            let _ = tx.send(());
        }
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
