//! Compares burst and fixed-rate dispatch of the same 20 requests against
//! the mock backend.
//!
//!     cargo run --example rate_dispatch

use std::time::Duration;

use llm_energy_bench::config::{DispatchPolicy, RunSpec};
use llm_energy_bench::dataset::Prompt;
use llm_energy_bench::energy::GridProfile;
use llm_energy_bench::loadgen::{submission_spread, ClientOptions, CompletionClient};
use llm_energy_bench::mockserv::{MockConfig, MockServer};
use llm_energy_bench::pipeline::execute_run;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let server = MockServer::start_local(MockConfig {
        capacity: 20,
        per_request_duration_s: 0.2,
        ..Default::default()
    })
    .await?;
    let client = CompletionClient::new(&server.base_url(), ClientOptions::default())?;
    let prompts: Vec<Prompt> = (0..20)
        .map(|id| Prompt {
            id,
            text: format!("Request {id}: a woman ties her shoes and"),
        })
        .collect();

    for dispatch in [DispatchPolicy::burst(), DispatchPolicy::fixed_rate(10.0)] {
        let spec = RunSpec {
            run_id: RunSpec::make_id("mock", 20, 0),
            model: "mock".into(),
            request_count: 20,
            dispatch,
            warmup_count: 20,
            repeat_index: 0,
            prompt_ids: (0..20).collect(),
        };
        let run = execute_run(
            &client,
            &spec,
            &prompts,
            &[server.power_source()],
            Duration::from_millis(10),
            &GridProfile::new(400.0, 1.0),
        )
        .await?;
        println!(
            "{:?}: window {:.2}s, spread {:.3}s, peak {:.0} W, {:.3} J/request",
            dispatch.mode,
            run.window.duration_s(),
            submission_spread(&run.records),
            run.samples.iter().map(|s| s.watts).fold(0.0, f64::max),
            run.energy.total / 20.0
        );
    }
    server.shutdown().await;
    Ok(())
}
