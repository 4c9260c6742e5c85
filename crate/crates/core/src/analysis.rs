//! Derived metrics: energy per request, repeat statistics, plateau detection
//! and the parameter-count scaling fit.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunSpec;
use crate::energy::{
    is_gpu_source, EmissionsEstimate, EnergyBreakdown, MeasurementWindow, PowerSample,
};
use crate::loadgen::{RequestRecord, WarmupSummary};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("run has no requests")]
    ZeroRequests,
    #[error("unknown power source `{0}`")]
    UnknownSource(String),
    #[error("no values to aggregate")]
    EmptyInput,
    #[error("series needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("fit needs at least two distinct x values")]
    DegenerateInput,
}

/// Everything measured for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: RunSpec,
    pub warmup: WarmupSummary,
    pub window: MeasurementWindow,
    pub samples: Vec<PowerSample>,
    pub energy: EnergyBreakdown,
    pub records: Vec<RequestRecord>,
    pub emissions: EmissionsEstimate,
}

impl RunResult {
    pub fn failed_requests(&self) -> usize {
        self.records.iter().filter(|r| !r.status.is_ok()).count()
    }

    pub fn output_tokens(&self) -> u64 {
        self.records.iter().map(|r| r.output_token_count).sum()
    }
}

/// Which power sources count towards energy per request.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFilter {
    #[default]
    All,
    /// Sources whose id starts with `gpu`.
    Gpu,
    Ids(Vec<String>),
}

impl SourceFilter {
    pub fn select(&self, energy: &EnergyBreakdown) -> Result<f64, AnalysisError> {
        match self {
            SourceFilter::All => Ok(energy.total),
            SourceFilter::Gpu => Ok(energy
                .per_source
                .iter()
                .filter(|(id, _)| is_gpu_source(id))
                .map(|(_, j)| j)
                .sum()),
            SourceFilter::Ids(ids) => ids
                .iter()
                .map(|id| {
                    energy
                        .per_source
                        .get(id)
                        .copied()
                        .ok_or_else(|| AnalysisError::UnknownSource(id.clone()))
                })
                .sum(),
        }
    }

    fn selects_any(&self, energy: &EnergyBreakdown) -> bool {
        match self {
            SourceFilter::All => !energy.per_source.is_empty(),
            SourceFilter::Gpu => energy.per_source.keys().any(|id| is_gpu_source(id)),
            SourceFilter::Ids(ids) => !ids.is_empty(),
        }
    }
}

/// Filtered energy divided by the number of attempted requests.
pub fn energy_per_request(result: &RunResult, filter: &SourceFilter) -> Result<f64, AnalysisError> {
    let attempted = result.spec.request_count;
    if attempted == 0 {
        return Err(AnalysisError::ZeroRequests);
    }
    let joules = filter.select(&result.energy)?;
    if !filter.selects_any(&result.energy) {
        warn!(
            "source filter {filter:?} selects no sources in run {}",
            result.spec.run_id
        );
    }
    Ok(joules / attempted as f64)
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn aggregate_repeats(values: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = values.len();
    let std = if n > 1 {
        (m2 / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, std))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub load: u32,
    pub mean_j: f64,
    pub stddev_j: f64,
    pub repeats: u32,
}

/// Energy per request against request load for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub model: String,
    pub points: Vec<SweepPoint>,
}

impl SweepSeries {
    pub fn point(&self, load: u32) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.load == load)
    }
}

/// Groups runs by model (in `models` order) and load (ascending).
pub fn build_series(
    models: &[String],
    results: &[RunResult],
    filter: &SourceFilter,
) -> Result<Vec<SweepSeries>, AnalysisError> {
    let mut out = Vec::new();
    for model in models {
        let mut loads: Vec<u32> = results
            .iter()
            .filter(|r| &r.spec.model == model)
            .map(|r| r.spec.request_count)
            .collect();
        loads.sort_unstable();
        loads.dedup();
        let mut points = Vec::with_capacity(loads.len());
        for load in loads {
            let values: Vec<f64> = results
                .iter()
                .filter(|r| &r.spec.model == model && r.spec.request_count == load)
                .map(|r| energy_per_request(r, filter))
                .collect::<Result<_, _>>()?;
            let (mean_j, stddev_j) = aggregate_repeats(&values)?;
            points.push(SweepPoint {
                load,
                mean_j,
                stddev_j,
                repeats: values.len() as u32,
            });
        }
        if !points.is_empty() {
            out.push(SweepSeries {
                model: model.clone(),
                points,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauResult {
    /// Smallest load from which the series stays flat (last load when not found).
    pub plateau_load: u32,
    pub plateau_value: f64,
    pub found: bool,
}

/// Finds the first point after which every value stays within `epsilon`
/// (relative) of it. A plateau made of only the final point does not count.
pub fn detect_plateau(series: &SweepSeries, epsilon: f64) -> Result<PlateauResult, AnalysisError> {
    let pts = &series.points;
    if pts.len() < 2 {
        return Err(AnalysisError::TooFewPoints(pts.len()));
    }
    let flat_from = |i: usize| {
        let base = pts[i].mean_j;
        pts[i..]
            .iter()
            .all(|p| (p.mean_j - base).abs() <= epsilon * base.abs())
    };
    let i = (0..pts.len())
        .find(|&i| flat_from(i))
        .unwrap_or(pts.len() - 1);
    Ok(PlateauResult {
        plateau_load: pts[i].load,
        plateau_value: pts[i].mean_j,
        found: i + 1 < pts.len(),
    })
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn residuals(&self, points: &[(f64, f64)]) -> Vec<f64> {
        points.iter().map(|&(x, y)| y - self.predict(x)).collect()
    }
}

/// Fits energy per request against parameter count.
pub fn fit_params_vs_energy(points: &[(f64, f64)]) -> Result<LinearFit, AnalysisError> {
    let n = points.len();
    if n < 2 {
        return Err(AnalysisError::DegenerateInput);
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        (sxx + (x - mx) * (x - mx), sxy + (x - mx) * (y - my))
    });
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateInput);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|&(_, y)| (y - my) * (y - my)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
