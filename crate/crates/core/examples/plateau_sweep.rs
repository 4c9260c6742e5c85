//! Request-load sweep against the mock backend.
//!
//! Starts an in-process mock (capacity 100, 0.2 s per request, 100 W idle,
//! 300 W peak), sweeps the burst size from 5 to 500 and prints measured
//! energy per request next to the closed-form expectation.
//!
//!     cargo run --release --example plateau_sweep

use std::io::Write;

use llm_energy_bench::analysis::SourceFilter;
use llm_energy_bench::config::BenchConfig;
use llm_energy_bench::energy::GridProfile;
use llm_energy_bench::mockserv::{analytic_energy_per_request, MockConfig, MockServer};
use llm_energy_bench::pipeline::run_benchmark;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let mock_cfg = MockConfig {
        capacity: 100,
        per_request_duration_s: 0.2,
        idle_power_w: 100.0,
        peak_power_w: 300.0,
        ..Default::default()
    };
    let server = MockServer::start_local(mock_cfg.clone()).await?;

    let mut dataset = tempfile::NamedTempFile::new()?;
    for i in 0..500 {
        writeln!(
            dataset,
            "{{\"ctx\": \"Prompt number {i} describes a person who\"}}"
        )?;
    }

    let mut config = BenchConfig::new(
        server.base_url(),
        vec!["mock-model".into()],
        vec![5, 10, 20, 40, 100, 200, 500],
        dataset.path(),
        GridProfile::new(400.0, 1.2),
    );
    config.sample_interval_s = mock_cfg.per_request_duration_s / 20.0;

    let report =
        run_benchmark(config, Some(vec![server.power_source()]), SourceFilter::All).await?;

    println!(
        "{:>6} {:>12} {:>12} {:>8}",
        "N", "measured J", "oracle J", "error"
    );
    for p in &report.derived.series[0].points {
        let oracle = analytic_energy_per_request(p.load, &mock_cfg);
        println!(
            "{:>6} {:>12.4} {:>12.4} {:>7.2}%",
            p.load,
            p.mean_j,
            oracle,
            100.0 * (p.mean_j - oracle) / oracle
        );
    }
    let plateau = report
        .derived
        .plateau("mock-model")
        .expect("series has points");
    println!(
        "plateau found: {} at N = {} ({:.4} J/request)",
        plateau.found, plateau.plateau_load, plateau.plateau_value
    );
    server.shutdown().await;
    Ok(())
}
