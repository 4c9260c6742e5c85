//! Benchmark configuration and run planning.
//!
//! A [`BenchConfig`] describes a whole sweep: which models to hit, which
//! request loads to send, how often to repeat each point. [`plan_runs`]
//! expands it into the ordered list of [`RunSpec`]s that the pipeline
//! executes one after another.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetFormat, Prompt};
use crate::energy::GridProfile;

pub const DEFAULT_WARMUP_COUNT: u32 = 200;
pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 15.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 128;
pub const DEFAULT_REQUEST_TIMEOUT_S: f64 = 300.0;
pub const DEFAULT_FIT_LOAD: u32 = 100;
pub const DEFAULT_PLATEAU_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchMode {
    Burst,
    FixedRate,
}

/// How a run's requests are submitted.
///
/// `Burst` submits everything with no pacing. `FixedRate` spaces submissions
/// `1 / rate` seconds apart and requires `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchPolicy {
    pub mode: DispatchMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl DispatchPolicy {
    pub fn burst() -> Self {
        Self {
            mode: DispatchMode::Burst,
            rate: None,
        }
    }

    pub fn fixed_rate(rate: f64) -> Self {
        Self {
            mode: DispatchMode::FixedRate,
            rate: Some(rate),
        }
    }
}

impl Default for DispatchPolicy {
    fn default() -> Self {
        Self::burst()
    }
}

/// Size description of a model, used for the parameter-count scaling fit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    /// Trainable parameters.
    pub params: u64,
    /// Sequential transformer layers.
    pub layers: u32,
}

impl ModelProfile {
    pub fn new(name: impl Into<String>, params: u64, layers: u32) -> Self {
        Self {
            name: name.into(),
            params,
            layers,
        }
    }
}

/// The Pythia size ladder (70M to 6.9B) with nominal parameter counts.
pub fn pythia_suite() -> Vec<ModelProfile> {
    [
        ("EleutherAI/pythia-70m", 70_000_000, 6),
        ("EleutherAI/pythia-160m", 160_000_000, 12),
        ("EleutherAI/pythia-410m", 410_000_000, 24),
        ("EleutherAI/pythia-1b", 1_000_000_000, 16),
        ("EleutherAI/pythia-1.4b", 1_400_000_000, 24),
        ("EleutherAI/pythia-2.8b", 2_800_000_000, 32),
        ("EleutherAI/pythia-6.9b", 6_900_000_000, 32),
    ]
    .into_iter()
    .map(|(name, params, layers)| ModelProfile::new(name, params, layers))
    .collect()
}

/// Roughly 3B-parameter models from different architecture families.
pub fn architecture_set() -> Vec<ModelProfile> {
    [
        ("EleutherAI/pythia-2.8b", 2_800_000_000, 32),
        ("databricks/dolly-v2-3b", 2_800_000_000, 32),
        ("bigscience/bloom-3b", 3_000_000_000, 30),
        (
            "togethercomputer/RedPajama-INCITE-Base-3B-v1",
            2_800_000_000,
            32,
        ),
    ]
    .into_iter()
    .map(|(name, params, layers)| ModelProfile::new(name, params, layers))
    .collect()
}

fn default_warmup() -> u32 {
    DEFAULT_WARMUP_COUNT
}
fn default_repeats() -> u32 {
    1
}
fn default_interval() -> f64 {
    DEFAULT_SAMPLE_INTERVAL_S
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_OUTPUT_TOKENS
}
fn default_timeout() -> f64 {
    DEFAULT_REQUEST_TIMEOUT_S
}
fn default_fit_load() -> u32 {
    DEFAULT_FIT_LOAD
}
fn default_epsilon() -> f64 {
    DEFAULT_PLATEAU_EPSILON
}

/// Everything needed to run one benchmark sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Base URL of the OpenAI-compatible server, e.g. `http://127.0.0.1:8000`.
    pub endpoint_url: String,
    pub models: Vec<String>,
    pub request_loads: Vec<u32>,
    #[serde(default = "default_warmup")]
    pub warmup_count: u32,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub dataset_format: DatasetFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prompts: Option<usize>,
    #[serde(default)]
    pub dispatch: DispatchPolicy,
    #[serde(default = "default_interval")]
    pub sample_interval_s: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_s: f64,
    pub grid: GridProfile,
    /// Power source descriptors, see [`crate::energy::parse_source`].
    #[serde(default)]
    pub power_sources: Vec<String>,
    /// Size metadata for the scaling fit; models without a profile are left out of it.
    #[serde(default)]
    pub model_profiles: Vec<ModelProfile>,
    /// Request load whose energy per request feeds the size fit.
    #[serde(default = "default_fit_load")]
    pub fit_load: u32,
    #[serde(default = "default_epsilon")]
    pub plateau_epsilon: f64,
}

impl BenchConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(
        endpoint_url: impl Into<String>,
        models: Vec<String>,
        request_loads: Vec<u32>,
        dataset_path: impl Into<PathBuf>,
        grid: GridProfile,
    ) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            models,
            request_loads,
            warmup_count: DEFAULT_WARMUP_COUNT,
            repeats: 1,
            dataset_path: dataset_path.into(),
            dataset_format: DatasetFormat::default(),
            max_prompts: None,
            dispatch: DispatchPolicy::burst(),
            sample_interval_s: DEFAULT_SAMPLE_INTERVAL_S,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            request_timeout_s: DEFAULT_REQUEST_TIMEOUT_S,
            grid,
            power_sources: Vec::new(),
            model_profiles: Vec::new(),
            fit_load: DEFAULT_FIT_LOAD,
            plateau_epsilon: DEFAULT_PLATEAU_EPSILON,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn profile(&self, model: &str) -> Option<&ModelProfile> {
        self.model_profiles.iter().find(|p| p.name == model)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigViolation {
    #[error("no models configured")]
    EmptyModels,
    #[error("model `{0}` listed more than once")]
    DuplicateModel(String),
    #[error("no request loads configured")]
    EmptyLoads,
    #[error("request loads must be strictly positive")]
    NonPositiveLoad,
    #[error("request load {0} listed more than once")]
    DuplicateLoad(u32),
    #[error("repeats must be at least 1")]
    NonPositiveRepeats,
    #[error("fixed-rate dispatch needs a rate > 0")]
    NonPositiveRate,
    #[error("burst dispatch must not carry a rate")]
    RateWithBurst,
    #[error("dataset not found: {0}")]
    MissingDataset(PathBuf),
    #[error("max_prompts must be positive")]
    NonPositiveMaxPrompts,
    #[error("sample interval must be > 0")]
    NonPositiveInterval,
    #[error("max_output_tokens must be at least 1")]
    NonPositiveMaxTokens,
    #[error("request timeout must be > 0")]
    NonPositiveTimeout,
    #[error("invalid grid profile: {0}")]
    InvalidGrid(String),
    #[error("invalid model profile `{0}`: params and layers must be > 0")]
    InvalidProfile(String),
    #[error("plateau epsilon must be finite and >= 0")]
    InvalidEpsilon,
}

/// All invariant violations found in a config.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "invalid config: {}", msgs.join("; "))
    }
}

impl ConfigErrors {
    pub fn contains(&self, v: &ConfigViolation) -> bool {
        self.0.contains(v)
    }
}

/// Checks every config invariant, returning the config untouched when all hold.
pub fn validate_config(config: BenchConfig) -> Result<BenchConfig, ConfigErrors> {
    let mut errs = Vec::new();

    if config.models.is_empty() {
        errs.push(ConfigViolation::EmptyModels);
    }
    let mut seen = HashSet::new();
    for m in &config.models {
        if !seen.insert(m.as_str()) {
            errs.push(ConfigViolation::DuplicateModel(m.clone()));
        }
    }

    if config.request_loads.is_empty() {
        errs.push(ConfigViolation::EmptyLoads);
    }
    if config.request_loads.contains(&0) {
        errs.push(ConfigViolation::NonPositiveLoad);
    }
    let mut seen = HashSet::new();
    for &n in &config.request_loads {
        if !seen.insert(n) {
            errs.push(ConfigViolation::DuplicateLoad(n));
        }
    }

    if config.repeats == 0 {
        errs.push(ConfigViolation::NonPositiveRepeats);
    }

    match (config.dispatch.mode, config.dispatch.rate) {
        (DispatchMode::FixedRate, Some(r)) if r.is_finite() && r > 0.0 => {}
        (DispatchMode::FixedRate, _) => errs.push(ConfigViolation::NonPositiveRate),
        (DispatchMode::Burst, Some(_)) => errs.push(ConfigViolation::RateWithBurst),
        (DispatchMode::Burst, None) => {}
    }

    if !config.dataset_path.is_file() {
        errs.push(ConfigViolation::MissingDataset(config.dataset_path.clone()));
    }
    if config.max_prompts == Some(0) {
        errs.push(ConfigViolation::NonPositiveMaxPrompts);
    }
    if !(config.sample_interval_s.is_finite() && config.sample_interval_s > 0.0) {
        errs.push(ConfigViolation::NonPositiveInterval);
    }
    if config.max_output_tokens == 0 {
        errs.push(ConfigViolation::NonPositiveMaxTokens);
    }
    if !(config.request_timeout_s.is_finite() && config.request_timeout_s > 0.0) {
        errs.push(ConfigViolation::NonPositiveTimeout);
    }
    if let Err(e) = config.grid.validate() {
        errs.push(ConfigViolation::InvalidGrid(e.to_string()));
    }
    for p in &config.model_profiles {
        if p.params == 0 || p.layers == 0 {
            errs.push(ConfigViolation::InvalidProfile(p.name.clone()));
        }
    }
    if !(config.plateau_epsilon.is_finite() && config.plateau_epsilon >= 0.0) {
        errs.push(ConfigViolation::InvalidEpsilon);
    }

    if errs.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(errs))
    }
}

/// One benchmark run: a model hit with `request_count` requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub model: String,
    pub request_count: u32,
    pub dispatch: DispatchPolicy,
    pub warmup_count: u32,
    pub repeat_index: u32,
    /// Dataset indices of the prompts to send, in dataset order.
    pub prompt_ids: Vec<usize>,
}

impl RunSpec {
    pub fn make_id(model: &str, load: u32, repeat: u32) -> String {
        format!("{model}@n{load}#r{repeat}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("dataset has {available} prompts but the largest load needs {needed}")]
    InsufficientPrompts { needed: usize, available: usize },
}

/// Expands a validated config into its ordered run plan.
///
/// Order is model (as configured), then load ascending, then repeat index.
/// A run at load `n` always uses the first `n` prompts of the dataset.
pub fn plan_runs(config: &BenchConfig, prompts: &[Prompt]) -> Result<Vec<RunSpec>, PlanError> {
    let mut loads = config.request_loads.clone();
    loads.sort_unstable();
    loads.dedup();

    let needed = loads.last().copied().unwrap_or(0) as usize;
    if prompts.len() < needed {
        return Err(PlanError::InsufficientPrompts {
            needed,
            available: prompts.len(),
        });
    }

    let mut plan = Vec::with_capacity(config.models.len() * loads.len() * config.repeats as usize);
    for model in &config.models {
        for &load in &loads {
            let prompt_ids: Vec<usize> = prompts[..load as usize].iter().map(|p| p.id).collect();
            for repeat in 0..config.repeats {
                plan.push(RunSpec {
                    run_id: RunSpec::make_id(model, load, repeat),
                    model: model.clone(),
                    request_count: load,
                    dispatch: config.dispatch,
                    warmup_count: config.warmup_count,
                    repeat_index: repeat,
                    prompt_ids: prompt_ids.clone(),
                });
            }
        }
    }
    Ok(plan)
}
