use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::EnergyError;
use crate::clock;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct SourceError(pub String);

/// Anything that can report instantaneous power draw.
///
/// Sources are polled from the tracker's sampling thread, so a read may block
/// briefly but should not take anywhere near the sampling interval.
pub trait PowerSource: Send + Sync {
    fn id(&self) -> &str;
    fn read_watts(&self) -> Result<f64, SourceError>;
}

/// Always reports the same wattage. Counts how often it was read.
#[derive(Debug)]
pub struct ConstantSource {
    id: String,
    watts: f64,
    reads: AtomicU64,
}

impl ConstantSource {
    pub fn new(id: impl Into<String>, watts: f64) -> Self {
        Self {
            id: id.into(),
            watts,
            reads: AtomicU64::new(0),
        }
    }

    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }
}

impl PowerSource for ConstantSource {
    fn id(&self) -> &str {
        &self.id
    }

    fn read_watts(&self) -> Result<f64, SourceError> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        Ok(self.watts)
    }
}

/// Replays a scripted piecewise-constant trace.
///
/// Steps are `(offset_s, watts)` pairs relative to an anchor on the harness
/// clock; before the first step the source reads 0 W.
#[derive(Debug, Clone)]
pub struct TraceSource {
    id: String,
    anchor_s: f64,
    steps: Vec<(f64, f64)>,
}

impl TraceSource {
    /// Anchored at the current clock reading.
    pub fn new(id: impl Into<String>, steps: Vec<(f64, f64)>) -> Self {
        Self::anchored_at(id, clock::now(), steps)
    }

    pub fn anchored_at(id: impl Into<String>, anchor_s: f64, mut steps: Vec<(f64, f64)>) -> Self {
        steps.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            id: id.into(),
            anchor_s,
            steps,
        }
    }

    pub fn watts_at(&self, t_s: f64) -> f64 {
        let offset = t_s - self.anchor_s;
        self.steps
            .iter()
            .take_while(|(at, _)| *at <= offset)
            .last()
            .map_or(0.0, |(_, w)| *w)
    }
}

impl PowerSource for TraceSource {
    fn id(&self) -> &str {
        &self.id
    }

    fn read_watts(&self) -> Result<f64, SourceError> {
        Ok(self.watts_at(clock::now()))
    }
}

/// Polls the mock server's `/mock/power` endpoint.
pub struct HttpPowerSource {
    id: String,
    url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct PowerReading {
    watts: f64,
}

impl HttpPowerSource {
    /// `base_url` is the server root, e.g. `http://127.0.0.1:8000`.
    pub fn new(id: impl Into<String>, base_url: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(2)))
            .build()
            .into();
        Self {
            id: id.into(),
            url: format!("{}/mock/power", base_url.trim_end_matches('/')),
            agent,
        }
    }
}

impl PowerSource for HttpPowerSource {
    fn id(&self) -> &str {
        &self.id
    }

    fn read_watts(&self) -> Result<f64, SourceError> {
        let body = self
            .agent
            .get(&self.url)
            .call()
            .and_then(|mut r| r.body_mut().read_to_string())
            .map_err(|e| SourceError(format!("GET {}: {e}", self.url)))?;
        let reading: PowerReading =
            serde_json::from_str(&body).map_err(|e| SourceError(e.to_string()))?;
        Ok(reading.watts)
    }
}

/// Reads board power from `nvidia-smi` for one GPU.
#[cfg(feature = "hardware")]
#[derive(Debug)]
pub struct NvidiaSmiSource {
    id: String,
    index: u32,
}

#[cfg(feature = "hardware")]
impl NvidiaSmiSource {
    pub fn new(index: u32) -> Self {
        Self {
            id: format!("gpu{index}"),
            index,
        }
    }
}

#[cfg(feature = "hardware")]
impl PowerSource for NvidiaSmiSource {
    fn id(&self) -> &str {
        &self.id
    }

    fn read_watts(&self) -> Result<f64, SourceError> {
        let out = std::process::Command::new("nvidia-smi")
            .args([
                "--query-gpu=power.draw",
                "--format=csv,noheader,nounits",
                "-i",
                &self.index.to_string(),
            ])
            .output()
            .map_err(|e| SourceError(format!("running nvidia-smi: {e}")))?;
        if !out.status.success() {
            return Err(SourceError(format!(
                "nvidia-smi exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        text.trim()
            .parse::<f64>()
            .map_err(|e| SourceError(format!("parsing nvidia-smi output {text:?}: {e}")))
    }
}

/// CPU package power derived from the RAPL energy counter in sysfs.
///
/// Power is the counter delta over the time since the previous read.
#[cfg(feature = "hardware")]
#[derive(Debug)]
pub struct RaplSource {
    id: String,
    zone: std::path::PathBuf,
    last: std::sync::Mutex<Option<(f64, u64)>>,
}

#[cfg(feature = "hardware")]
impl RaplSource {
    pub fn new(zone_index: u32) -> Self {
        Self {
            id: format!("cpu-pkg{zone_index}"),
            zone: format!("/sys/class/powercap/intel-rapl:{zone_index}").into(),
            last: std::sync::Mutex::new(None),
        }
    }

    fn read_u64(&self, file: &str) -> Result<u64, SourceError> {
        let path = self.zone.join(file);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| SourceError(format!("reading {}: {e}", path.display())))?;
        text.trim()
            .parse()
            .map_err(|e| SourceError(format!("parsing {}: {e}", path.display())))
    }
}

#[cfg(feature = "hardware")]
impl PowerSource for RaplSource {
    fn id(&self) -> &str {
        &self.id
    }

    fn read_watts(&self) -> Result<f64, SourceError> {
        let mut last = self.last.lock().unwrap();
        if last.is_none() {
            *last = Some((clock::now(), self.read_u64("energy_uj")?));
            std::thread::sleep(Duration::from_millis(50));
        }
        let (t0, e0) = last.expect("primed above");
        let t1 = clock::now();
        let e1 = self.read_u64("energy_uj")?;
        let delta_uj = if e1 >= e0 {
            e1 - e0
        } else {
            // counter wrapped
            let range = self.read_u64("max_energy_range_uj")?;
            range - e0 + e1
        };
        *last = Some((t1, e1));
        Ok(delta_uj as f64 * 1e-6 / (t1 - t0))
    }
}

/// Builds a source from a short descriptor.
///
/// * `constant:<id>:<watts>`
/// * `mock-http:<base-url>` (id `mock`)
/// * `nvidia-smi[:<gpu-index>]` (id `gpu<N>`, needs the `hardware` feature)
/// * `rapl[:<zone>]` (id `cpu-pkg<N>`, needs the `hardware` feature)
pub fn parse_source(desc: &str) -> Result<Arc<dyn PowerSource>, EnergyError> {
    let unknown = || EnergyError::UnknownSourceSpec(desc.to_string());
    let (kind, rest) = match desc.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (desc, None),
    };
    match kind {
        "constant" => {
            let (id, watts) = rest.and_then(|r| r.rsplit_once(':')).ok_or_else(unknown)?;
            let watts: f64 = watts.parse().map_err(|_| unknown())?;
            if id.is_empty() || !(watts.is_finite() && watts >= 0.0) {
                return Err(unknown());
            }
            Ok(Arc::new(ConstantSource::new(id, watts)))
        }
        "mock-http" => {
            let url = rest.filter(|r| !r.is_empty()).ok_or_else(unknown)?;
            Ok(Arc::new(HttpPowerSource::new("mock", url)))
        }
        #[cfg(feature = "hardware")]
        "nvidia-smi" => {
            let idx = rest.map_or(Ok(0), str::parse).map_err(|_| unknown())?;
            Ok(Arc::new(NvidiaSmiSource::new(idx)))
        }
        #[cfg(feature = "hardware")]
        "rapl" => {
            let idx = rest.map_or(Ok(0), str::parse).map_err(|_| unknown())?;
            Ok(Arc::new(RaplSource::new(idx)))
        }
        _ => Err(unknown()),
    }
}
