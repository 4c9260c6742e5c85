//! End-to-end sweep execution.
//!
//! Runs execute strictly one after another. Within a run the order is fixed:
//! warm-up, tracker start, dispatch, tracker stop after the last completion,
//! then integration.

use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::info;
use thiserror::Error;

use crate::analysis::{RunResult, SourceFilter};
use crate::config::{plan_runs, validate_config, BenchConfig, ConfigErrors, PlanError, RunSpec};
use crate::dataset::{load_prompts, DatasetError, Prompt};
use crate::energy::{
    estimate_emissions, integrate_energy, parse_source, start_tracker, EnergyError, GridProfile,
    PowerSource, Tracker,
};
use crate::loadgen::{self, ClientOptions, CompletionClient, LoadgenError};
use crate::report::{Report, ReportError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Loadgen(#[from] LoadgenError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("power sources: {0}")]
    Sources(EnergyError),
    #[error("run {run_id}: {source}")]
    Run {
        run_id: String,
        #[source]
        source: RunError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Client(#[from] LoadgenError),
}

impl PipelineError {
    /// True when the failure came from the serving endpoint rather than the setup.
    pub fn is_endpoint_failure(&self) -> bool {
        matches!(
            self,
            PipelineError::Run {
                source: RunError::Loadgen(
                    LoadgenError::EndpointUnreachable { .. }
                        | LoadgenError::AllRequestsFailed { .. }
                ),
                ..
            }
        )
    }
}

async fn start_tracker_blocking(
    sources: Vec<Arc<dyn PowerSource>>,
    interval: Duration,
) -> Result<Tracker, EnergyError> {
    tokio::task::spawn_blocking(move || start_tracker(sources, interval))
        .await
        .expect("tracker start panicked")
}

/// Executes one run against `client`.
pub async fn execute_run(
    client: &CompletionClient,
    spec: &RunSpec,
    prompts: &[Prompt],
    sources: &[Arc<dyn PowerSource>],
    interval: Duration,
    grid: &GridProfile,
) -> Result<RunResult, RunError> {
    let warmup = loadgen::warmup(client, &spec.model, prompts, spec.warmup_count).await?;

    let mut tracker = start_tracker_blocking(sources.to_vec(), interval).await?;
    let records = match loadgen::dispatch(client, spec, prompts).await {
        Ok(r) => r,
        Err(e) => {
            tokio::task::spawn_blocking(move || drop(tracker))
                .await
                .ok();
            return Err(e.into());
        }
    };
    let (tracker, stopped) = tokio::task::spawn_blocking(move || {
        let res = tracker.stop();
        (tracker, res)
    })
    .await
    .expect("tracker stop panicked");
    drop(tracker);
    let (window, samples) = stopped?;

    let energy = integrate_energy(&samples, &window)?;
    let emissions = estimate_emissions(energy.total, grid)?;
    Ok(RunResult {
        spec: spec.clone(),
        warmup,
        window,
        samples,
        energy,
        records,
        emissions,
    })
}

/// Builds the power sources named in the config.
pub fn config_sources(config: &BenchConfig) -> Result<Vec<Arc<dyn PowerSource>>, PipelineError> {
    if config.power_sources.is_empty() {
        return Err(PipelineError::Sources(EnergyError::NoSources));
    }
    config
        .power_sources
        .iter()
        .map(|d| parse_source(d).map_err(PipelineError::Sources))
        .collect()
}

pub fn client_for(config: &BenchConfig) -> Result<CompletionClient, LoadgenError> {
    CompletionClient::new(
        &config.endpoint_url,
        ClientOptions {
            max_tokens: config.max_output_tokens,
            timeout: Duration::from_secs_f64(config.request_timeout_s),
            ..ClientOptions::default()
        },
    )
}

/// Validates, plans and executes a full sweep, returning the report.
///
/// `sources` overrides the config's `power_sources` when given (used to plug
/// in-process sources such as the mock's).
pub async fn run_benchmark(
    config: BenchConfig,
    sources: Option<Vec<Arc<dyn PowerSource>>>,
    filter: SourceFilter,
) -> Result<Report, PipelineError> {
    let config = validate_config(config)?;
    let sources = match sources {
        Some(s) if !s.is_empty() => s,
        Some(_) => return Err(PipelineError::Sources(EnergyError::NoSources)),
        None => config_sources(&config)?,
    };
    let prompts = load_prompts(
        &config.dataset_path,
        config.dataset_format,
        config.max_prompts,
    )?;
    let plan = plan_runs(&config, &prompts)?;
    let client = client_for(&config)?;
    let interval = Duration::from_secs_f64(config.sample_interval_s);

    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let wall = std::time::Instant::now();

    let mut results = Vec::with_capacity(plan.len());
    for (i, spec) in plan.iter().enumerate() {
        info!("run {}/{}: {}", i + 1, plan.len(), spec.run_id);
        let result = execute_run(&client, spec, &prompts, &sources, interval, &config.grid)
            .await
            .map_err(|source| PipelineError::Run {
                run_id: spec.run_id.clone(),
                source,
            })?;
        info!(
            "run {} finished: {:.2} J over {:.3} s, {} failed",
            spec.run_id,
            result.energy.total,
            result.window.duration_s(),
            result.failed_requests()
        );
        results.push(result);
    }

    Ok(Report::new(
        config,
        filter,
        results,
        started_unix_s,
        wall.elapsed().as_secs_f64(),
    )?)
}
