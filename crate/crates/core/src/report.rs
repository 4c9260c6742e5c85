//! Versioned JSON report, atomic writes and plot-data exports.
//!
//! A report carries the raw material of every run (power samples, window,
//! request records) next to the derived numbers, so [`Report::reanalyze`]
//! can rebuild every metric from the raw data alone.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    build_series, detect_plateau, fit_params_vs_energy, AnalysisError, LinearFit, PlateauResult,
    RunResult, SourceFilter, SweepSeries,
};
use crate::config::BenchConfig;
use crate::energy::{
    estimate_emissions, integrate_energy, write_samples_csv, EmissionsEstimate, EnergyError,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u64, expected: u32 },
    #[error("report is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPlateau {
    pub model: String,
    #[serde(flatten)]
    pub plateau: PlateauResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub model: String,
    pub params: u64,
    pub layers: u32,
    pub j_per_request: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeFit {
    /// Request load the points were taken at.
    pub load: u32,
    pub points: Vec<FitPoint>,
    pub fit: LinearFit,
}

/// Mean and spread of energy per request for one model at the comparison load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub load: u32,
    pub mean_j: f64,
    pub stddev_j: f64,
    pub repeats: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub series: Vec<SweepSeries>,
    pub plateaus: Vec<ModelPlateau>,
    pub size_fit: Option<SizeFit>,
    pub model_summaries: Vec<ModelSummary>,
    pub total_energy_j: f64,
    pub emissions: EmissionsEstimate,
    pub failed_requests: usize,
    pub runs_with_failures: Vec<String>,
}

impl Derived {
    pub fn compute(
        config: &BenchConfig,
        filter: &SourceFilter,
        runs: &[RunResult],
    ) -> Result<Self, ReportError> {
        let series = build_series(&config.models, runs, filter)?;

        let mut plateaus = Vec::new();
        for s in &series {
            if s.points.len() >= 2 {
                plateaus.push(ModelPlateau {
                    model: s.model.clone(),
                    plateau: detect_plateau(s, config.plateau_epsilon)?,
                });
            }
        }

        let comparison_load = comparison_load(config, runs);
        let model_summaries: Vec<ModelSummary> = match comparison_load {
            Some(load) => series
                .iter()
                .filter_map(|s| {
                    s.point(load).map(|p| ModelSummary {
                        model: s.model.clone(),
                        load,
                        mean_j: p.mean_j,
                        stddev_j: p.stddev_j,
                        repeats: p.repeats,
                    })
                })
                .collect(),
            None => Vec::new(),
        };

        let points: Vec<FitPoint> = model_summaries
            .iter()
            .filter_map(|m| {
                config.profile(&m.model).map(|p| FitPoint {
                    model: m.model.clone(),
                    params: p.params,
                    layers: p.layers,
                    j_per_request: m.mean_j,
                })
            })
            .collect();
        let xy: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.params as f64, p.j_per_request))
            .collect();
        let size_fit = match (comparison_load, fit_params_vs_energy(&xy)) {
            (Some(load), Ok(fit)) => Some(SizeFit { load, points, fit }),
            _ => None,
        };

        let total_energy_j: f64 = runs.iter().map(|r| r.energy.total).sum();
        let emissions = estimate_emissions(total_energy_j, &config.grid)?;
        let runs_with_failures: Vec<String> = runs
            .iter()
            .filter(|r| r.failed_requests() > 0)
            .map(|r| r.spec.run_id.clone())
            .collect();

        Ok(Self {
            series,
            plateaus,
            size_fit,
            model_summaries,
            total_energy_j,
            emissions,
            failed_requests: runs.iter().map(RunResult::failed_requests).sum(),
            runs_with_failures,
        })
    }

    pub fn plateau(&self, model: &str) -> Option<&PlateauResult> {
        self.plateaus
            .iter()
            .find(|p| p.model == model)
            .map(|p| &p.plateau)
    }
}

/// The configured fit load if it was measured, otherwise the largest load.
fn comparison_load(config: &BenchConfig, runs: &[RunResult]) -> Option<u32> {
    if runs.iter().any(|r| r.spec.request_count == config.fit_load) {
        Some(config.fit_load)
    } else {
        runs.iter().map(|r| r.spec.request_count).max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    /// Wall-clock time the sweep started, seconds since the Unix epoch.
    pub started_unix_s: f64,
    pub wall_duration_s: f64,
    pub config: BenchConfig,
    pub source_filter: SourceFilter,
    pub runs: Vec<RunResult>,
    pub derived: Derived,
}

impl Report {
    pub fn new(
        config: BenchConfig,
        source_filter: SourceFilter,
        runs: Vec<RunResult>,
        started_unix_s: f64,
        wall_duration_s: f64,
    ) -> Result<Self, ReportError> {
        let derived = Derived::compute(&config, &source_filter, &runs)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            started_unix_s,
            wall_duration_s,
            config,
            source_filter,
            runs,
            derived,
        })
    }

    /// Recomputes each run's energy and emissions from its samples, then
    /// every derived metric.
    pub fn reanalyze(&self) -> Result<Report, ReportError> {
        let mut runs = self.runs.clone();
        for r in &mut runs {
            r.energy = integrate_energy(&r.samples, &r.window)?;
            r.emissions = estimate_emissions(r.energy.total, &self.config.grid)?;
        }
        let derived = Derived::compute(&self.config, &self.source_filter, &runs)?;
        Ok(Report {
            runs,
            derived,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0);
        if found != SCHEMA_VERSION as u64 {
            return Err(ReportError::SchemaMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        write_atomic(path, |w| Ok(w.write_all(self.to_json().as_bytes())?))
    }
}

/// Writes a file through a temp file in the same directory and renames it
/// into place. If `fill` fails the destination is left untouched.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), ReportError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), ReportError>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".partial-")
        .tempfile_in(dir)?;
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| ReportError::Io(e.error))?;
    Ok(())
}

#[derive(Serialize)]
struct SweepRow<'a> {
    model: &'a str,
    load: u32,
    j_per_request: f64,
    stddev_j: f64,
    repeats: u32,
    plateau: bool,
}

#[derive(Serialize)]
struct ParamsRow<'a> {
    model: &'a str,
    params: u64,
    layers: u32,
    j_per_request: f64,
}

#[derive(Serialize)]
struct ModelRow<'a> {
    model: &'a str,
    load: u32,
    mean_j: f64,
    stddev_j: f64,
    repeats: u32,
}

pub const LOAD_SWEEP_FILE: &str = "load_sweep.csv";
pub const PARAMS_FILE: &str = "params_vs_energy.csv";
pub const MODELS_FILE: &str = "model_comparison.csv";

fn csv_bytes<T: Serialize>(
    rows: impl IntoIterator<Item = T>,
    header_only: &[&str],
) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(true)
        .from_writer(Vec::new());
    let mut any = false;
    for row in rows {
        w.serialize(row)?;
        any = true;
    }
    if !any {
        w.write_record(header_only)?;
    }
    w.into_inner().map_err(|e| ReportError::Io(e.into_error()))
}

/// Energy per request against load, one row per (model, load).
pub fn load_sweep_csv(report: &Report) -> Result<Vec<u8>, ReportError> {
    let rows = report.derived.series.iter().flat_map(|s| {
        let plateau = report
            .derived
            .plateau(&s.model)
            .filter(|p| p.found)
            .map(|p| p.plateau_load);
        s.points.iter().map(move |p| SweepRow {
            model: &s.model,
            load: p.load,
            j_per_request: p.mean_j,
            stddev_j: p.stddev_j,
            repeats: p.repeats,
            plateau: plateau == Some(p.load),
        })
    });
    csv_bytes(
        rows,
        &[
            "model",
            "load",
            "j_per_request",
            "stddev_j",
            "repeats",
            "plateau",
        ],
    )
}

/// Energy per request against parameter count at the comparison load.
pub fn params_csv(report: &Report) -> Result<Vec<u8>, ReportError> {
    let cfg = &report.config;
    let rows = report.derived.model_summaries.iter().filter_map(|m| {
        cfg.profile(&m.model).map(|p| ParamsRow {
            model: &m.model,
            params: p.params,
            layers: p.layers,
            j_per_request: m.mean_j,
        })
    });
    csv_bytes(rows, &["model", "params", "layers", "j_per_request"])
}

/// Mean and standard deviation per model at the comparison load.
pub fn models_csv(report: &Report) -> Result<Vec<u8>, ReportError> {
    let rows = report.derived.model_summaries.iter().map(|m| ModelRow {
        model: &m.model,
        load: m.load,
        mean_j: m.mean_j,
        stddev_j: m.stddev_j,
        repeats: m.repeats,
    });
    csv_bytes(rows, &["model", "load", "mean_j", "stddev_j", "repeats"])
}

/// Writes the three plot-data files plus `samples/run_NNNN.csv` per run.
pub fn export_plot_data(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in [
        (LOAD_SWEEP_FILE, load_sweep_csv(report)?),
        (PARAMS_FILE, params_csv(report)?),
        (MODELS_FILE, models_csv(report)?),
    ] {
        let path = dir.join(name);
        write_atomic(&path, |w| Ok(w.write_all(&bytes)?))?;
        written.push(path);
    }
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir)?;
    for (i, run) in report.runs.iter().enumerate() {
        let path = samples_dir.join(format!("run_{i:04}.csv"));
        write_atomic(&path, |w| Ok(write_samples_csv(&run.samples, w)?))?;
        written.push(path);
    }
    Ok(written)
}

/// Plain-text summary table.
pub fn format_summary(report: &Report) -> String {
    let d = &report.derived;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} runs, {:.1} J total, {:.3} g CO2eq (intensity {} g/kWh, PUE {})",
        report.runs.len(),
        d.total_energy_j,
        d.emissions.grams_co2eq,
        d.emissions.carbon_intensity,
        d.emissions.pue
    );
    if d.failed_requests > 0 {
        let _ = writeln!(
            out,
            "WARNING: {} failed requests in runs: {}",
            d.failed_requests,
            d.runs_with_failures.join(", ")
        );
    }
    for s in &d.series {
        let _ = writeln!(out, "\n{}", s.model);
        let _ = writeln!(
            out,
            "{:>8} {:>14} {:>12} {:>4}",
            "load", "J/request", "stddev", "n"
        );
        let plateau = d
            .plateau(&s.model)
            .filter(|p| p.found)
            .map(|p| p.plateau_load);
        for p in &s.points {
            let mark = if plateau == Some(p.load) {
                "  <- plateau"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{:>8} {:>14.4} {:>12.4} {:>4}{mark}",
                p.load, p.mean_j, p.stddev_j, p.repeats
            );
        }
    }
    if let Some(f) = &d.size_fit {
        let _ = writeln!(
            out,
            "\nsize fit at load {}: J/request = {:.4e} * params + {:.4} (r^2 = {:.4})",
            f.load, f.fit.slope, f.fit.intercept, f.fit.r_squared
        );
    }
    out
}
