//! Energy-efficiency benchmarking for OpenAI-compatible LLM serving endpoints.
//!
//! The harness sends warm-up traffic, opens a power measurement window,
//! fires a run's requests (as one burst or at a fixed rate), closes the
//! window after the last response and turns the sampled power into joules
//! per request. Sweeping the request load exposes where energy per request
//! stops improving; sweeping model sizes gives a parameters-vs-energy fit.
//!
//! A deterministic mock backend ([`mockserv`]) with a capacity-limited
//! batching model and a synthetic power draw lets the whole pipeline run
//! without a GPU, against a closed-form expectation.
//!
//! Module map:
//!
//! * [`config`]: sweep configuration and run planning
//! * [`dataset`]: prompt ingestion
//! * [`loadgen`]: completion client, warm-up, burst and fixed-rate dispatch
//! * [`energy`]: power sources, sampling tracker, integration, CO2eq
//! * [`mockserv`]: the mock serving backend
//! * [`analysis`]: energy per request, repeats, plateau detection, size fit
//! * [`report`]: versioned report and plot-data exports
//! * [`pipeline`]: the end-to-end sweep
//!
//! See the crate's `examples/` directory for one runnable program per area.

pub mod analysis;
pub mod clock;
pub mod config;
pub mod dataset;
pub mod energy;
pub mod loadgen;
pub mod mockserv;
pub mod pipeline;
pub mod report;

pub use analysis::{RunResult, SourceFilter};
pub use config::{BenchConfig, DispatchPolicy, ModelProfile, RunSpec};
pub use dataset::{DatasetFormat, Prompt};
pub use energy::{GridProfile, PowerSample};
pub use report::Report;
