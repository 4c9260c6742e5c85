use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::{error, warn};

use llm_energy_bench::analysis::SourceFilter;
use llm_energy_bench::config::BenchConfig;
use llm_energy_bench::mockserv::{FaultSchedule, MockConfig, MockServer};
use llm_energy_bench::pipeline::{run_benchmark, PipelineError};
use llm_energy_bench::report::{self, Report};

const EXIT_CONFIG: u8 = 1;
const EXIT_ENDPOINT: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Energy-efficiency benchmark for OpenAI-compatible LLM servers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark sweep and write a report.
    Run(RunArgs),
    /// Serve the deterministic mock backend.
    Mock(MockArgs),
    /// Summarise a report or export its plot data.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "LLM_BENCH_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long = "model")]
    models: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    loads: Vec<u32>,
    #[arg(long)]
    warmup: Option<u32>,
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = ["hella_swag_jsonl", "plain_lines"])]
    dataset_format: Option<String>,
    #[arg(long)]
    max_prompts: Option<usize>,
    /// Fixed request rate (req/s); burst when absent.
    #[arg(long)]
    rate: Option<f64>,
    /// Seconds between power samples.
    #[arg(long)]
    sample_interval: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Grid carbon intensity, g CO2eq per kWh.
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long)]
    pue: Option<f64>,
    /// Power source descriptor, repeatable (constant:ID:W, mock-http:URL, nvidia-smi[:N], rapl[:N]).
    #[arg(long = "source")]
    sources: Vec<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, value_enum, default_value_t = FilterArg::All)]
    filter: FilterArg,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Also write plot-data CSVs into this directory.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    Gpu,
}

#[derive(clap::Args)]
struct MockArgs {
    /// TOML mock config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8000")]
    bind: SocketAddr,
    #[arg(long)]
    capacity: Option<u32>,
    /// Per-request service time in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    tokens: Option<u32>,
    #[arg(long)]
    idle_power: Option<f64>,
    #[arg(long)]
    peak_power: Option<f64>,
    /// Answer every Nth request with HTTP 500.
    #[arg(long)]
    fail_every: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct ReportArgs {
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Directory for `--format csv` output.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
    Csv,
}

fn build_config(args: &RunArgs) -> anyhow::Result<BenchConfig> {
    use toml::Value;
    let mut table = match &args.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            text.parse::<toml::Table>()
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    let mut set = |k: &str, v: Value| {
        table.insert(k.to_string(), v);
    };
    if let Some(e) = &args.endpoint {
        set("endpoint_url", Value::String(e.clone()));
    }
    if !args.models.is_empty() {
        set(
            "models",
            Value::Array(args.models.iter().cloned().map(Value::String).collect()),
        );
    }
    if !args.loads.is_empty() {
        set(
            "request_loads",
            Value::Array(
                args.loads
                    .iter()
                    .map(|&n| Value::Integer(n.into()))
                    .collect(),
            ),
        );
    }
    if let Some(n) = args.warmup {
        set("warmup_count", Value::Integer(n.into()));
    }
    if let Some(n) = args.repeats {
        set("repeats", Value::Integer(n.into()));
    }
    if let Some(p) = &args.dataset {
        set("dataset_path", Value::String(p.display().to_string()));
    }
    if let Some(f) = &args.dataset_format {
        set("dataset_format", Value::String(f.clone()));
    }
    if let Some(n) = args.max_prompts {
        set("max_prompts", Value::Integer(n as i64));
    }
    if let Some(r) = args.rate {
        let mut d = toml::Table::new();
        d.insert("mode".into(), Value::String("fixed_rate".into()));
        d.insert("rate".into(), Value::Float(r));
        set("dispatch", Value::Table(d));
    }
    if let Some(s) = args.sample_interval {
        set("sample_interval_s", Value::Float(s));
    }
    if let Some(n) = args.max_tokens {
        set("max_output_tokens", Value::Integer(n.into()));
    }
    if let Some(t) = args.timeout {
        set("request_timeout_s", Value::Float(t));
    }
    if !args.sources.is_empty() {
        set(
            "power_sources",
            Value::Array(args.sources.iter().cloned().map(Value::String).collect()),
        );
    }
    if args.intensity.is_some() || args.pue.is_some() {
        let mut grid = table
            .get("grid")
            .and_then(|g| g.as_table().cloned())
            .unwrap_or_default();
        if let Some(i) = args.intensity {
            grid.insert("carbon_intensity".into(), Value::Float(i));
        }
        grid.entry("pue").or_insert(Value::Float(1.0));
        if let Some(p) = args.pue {
            grid.insert("pue".into(), Value::Float(p));
        }
        table.insert("grid".into(), Value::Table(grid));
    }
    Ok(table.try_into()?)
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            error!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let filter = match args.filter {
        FilterArg::All => SourceFilter::All,
        FilterArg::Gpu => SourceFilter::Gpu,
    };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    let report = match rt.block_on(run_benchmark(config, None, filter)) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(match e {
                e if e.is_endpoint_failure() => EXIT_ENDPOINT,
                PipelineError::Config(_)
                | PipelineError::Dataset(_)
                | PipelineError::Plan(_)
                | PipelineError::Sources(_) => EXIT_CONFIG,
                _ => EXIT_ENDPOINT,
            });
        }
    };
    if let Err(e) = report.save(&args.out) {
        error!("writing {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    if let Some(dir) = &args.plot_dir {
        if let Err(e) = report::export_plot_data(&report, dir) {
            error!("writing plot data: {e}");
            return ExitCode::FAILURE;
        }
    }
    print!("{}", report::format_summary(&report));
    println!("report written to {}", args.out.display());
    if report.derived.failed_requests > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn mock_config(args: &MockArgs) -> anyhow::Result<MockConfig> {
    let mut cfg = match &args.config {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => MockConfig::default(),
    };
    if let Some(c) = args.capacity {
        cfg.capacity = c;
    }
    if let Some(d) = args.duration {
        cfg.per_request_duration_s = d;
    }
    if let Some(g) = args.tokens {
        cfg.tokens_per_response = g;
    }
    if let Some(p) = args.idle_power {
        cfg.idle_power_w = p;
    }
    if let Some(p) = args.peak_power {
        cfg.peak_power_w = p;
    }
    if let Some(n) = args.fail_every {
        cfg.fault_schedule = Some(FaultSchedule::EveryNth(n));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_mock(args: MockArgs) -> ExitCode {
    let cfg = match mock_config(&args) {
        Ok(c) => c,
        Err(e) => {
            error!("mock config: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    rt.block_on(async move {
        let server = match MockServer::start(cfg, args.bind).await {
            Ok(s) => s,
            Err(e) => {
                error!("binding {}: {e:#}", args.bind);
                return ExitCode::from(EXIT_ENDPOINT);
            }
        };
        println!("mock server listening on {}", server.base_url());
        let _ = tokio::signal::ctrl_c().await;
        server.shutdown().await;
        ExitCode::SUCCESS
    })
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let stored = Report::load(&args.report)?;
    let report = stored.reanalyze()?;
    if report.derived != stored.derived {
        warn!("derived metrics in the report differ from a fresh re-analysis; showing the re-analysis");
    }
    match args.format {
        ReportFormat::Table => print!("{}", report::format_summary(&report)),
        ReportFormat::Json => println!("{}", report.to_json()),
        ReportFormat::Csv => {
            for p in report::export_plot_data(&report, &args.out_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Mock(a) => cmd_mock(a),
        Command::Report(a) => match cmd_report(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                error!("{e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
