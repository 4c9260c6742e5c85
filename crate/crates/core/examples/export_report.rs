//! Runs a small two-model sweep against the mock, saves the report, reloads
//! it, re-derives every metric from the stored samples and writes plot CSVs.
//!
//!     cargo run --example export_report -- [output-dir]

use std::io::Write;
use std::path::PathBuf;

use llm_energy_bench::analysis::SourceFilter;
use llm_energy_bench::config::{BenchConfig, ModelProfile};
use llm_energy_bench::energy::GridProfile;
use llm_energy_bench::mockserv::{MockConfig, MockServer};
use llm_energy_bench::pipeline::run_benchmark;
use llm_energy_bench::report::{export_plot_data, format_summary, Report};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("llm-energy-bench-example"));
    std::fs::create_dir_all(&out_dir)?;

    let server = MockServer::start_local(MockConfig {
        capacity: 8,
        per_request_duration_s: 0.1,
        ..Default::default()
    })
    .await?;
    let mut dataset = tempfile::NamedTempFile::new()?;
    for i in 0..16 {
        writeln!(
            dataset,
            "{{\"ctx\": \"Clip {i}: a person is kneeling on the floor and\"}}"
        )?;
    }

    let mut config = BenchConfig::new(
        server.base_url(),
        vec!["small".into(), "large".into()],
        vec![2, 8, 16],
        dataset.path(),
        GridProfile::new(350.0, 1.3),
    );
    config.warmup_count = 8;
    config.repeats = 2;
    config.sample_interval_s = 0.005;
    config.fit_load = 8;
    config.model_profiles = vec![
        ModelProfile::new("small", 160_000_000, 12),
        ModelProfile::new("large", 1_400_000_000, 24),
    ];

    let report =
        run_benchmark(config, Some(vec![server.power_source()]), SourceFilter::All).await?;
    server.shutdown().await;

    let path = out_dir.join("report.json");
    report.save(&path)?;
    let reloaded = Report::load(&path)?.reanalyze()?;
    assert_eq!(reloaded.derived, report.derived);

    print!("{}", format_summary(&reloaded));
    for f in export_plot_data(&reloaded, &out_dir)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
