//! Drives the mock backend directly: a few completions, its power readout
//! and the slot occupancy log.
//!
//!     cargo run --example mock_backend

use std::time::Duration;

use llm_energy_bench::loadgen::{ClientOptions, CompletionClient};
use llm_energy_bench::mockserv::{FaultSchedule, MockConfig, MockServer};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let server = MockServer::start_local(MockConfig {
        capacity: 2,
        per_request_duration_s: 0.25,
        tokens_per_response: 8,
        fault_schedule: Some(FaultSchedule::EveryNth(4)),
        ..Default::default()
    })
    .await?;
    println!("mock at {}", server.base_url());

    let client = CompletionClient::new(&server.base_url(), ClientOptions::default())?;
    let mut tasks = Vec::new();
    for id in 0..5 {
        let c = client.clone();
        tasks.push(tokio::spawn(async move {
            c.complete("mock", Some(id), "The chef slices an onion and")
                .await
        }));
    }
    tokio::time::sleep(Duration::from_millis(100)).await;
    let p = server.state().power_report();
    println!(
        "busy: {} of {} slots, {:.1} W",
        p.inflight, p.capacity, p.watts
    );

    for t in tasks {
        let r = t.await?;
        println!(
            "prompt {} -> {:?}, {} tokens, {:.3}s",
            r.prompt_id,
            r.status,
            r.output_token_count,
            r.completion_time_s - r.send_time_s
        );
    }

    let log = server.state().inflight_log();
    println!(
        "max inflight {} (capacity {})",
        log.max_inflight, log.capacity
    );
    let t0 = log.entries.first().map_or(0.0, |e| e.t_s);
    for e in &log.entries {
        println!("  {:>7.3}s  inflight={}", e.t_s - t0, e.inflight);
    }
    server.shutdown().await;
    Ok(())
}
