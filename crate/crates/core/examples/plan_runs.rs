//! Loads a HellaSwag-style dataset and expands a config into its run plan.
//!
//!     cargo run --example plan_runs

use std::io::Write;

use llm_energy_bench::config::{plan_runs, validate_config, BenchConfig};
use llm_energy_bench::dataset::load_prompts;

fn main() -> anyhow::Result<()> {
    let mut dataset = tempfile::NamedTempFile::new()?;
    for (i, ctx) in [
        "A man is sitting on a roof. he",
        "A woman is outside with a bucket and a dog. The dog is running around trying to avoid a bath. she",
        "Two girls are sailing on a lake. they",
        "A boy is running down a track. the boy",
        "The man is standing in front of a camera. he",
    ]
    .iter()
    .enumerate()
    {
        writeln!(dataset, r#"{{"ind": {i}, "ctx": "{ctx}", "label": 0}}"#)?;
    }

    let config = BenchConfig::from_toml(&format!(
        r#"
endpoint_url = "http://127.0.0.1:8000"
models = ["EleutherAI/pythia-70m", "EleutherAI/pythia-160m"]
request_loads = [4, 1, 2]
repeats = 2
dataset_path = "{}"

[grid]
carbon_intensity = 400.0
pue = 1.2
"#,
        dataset.path().display()
    ))?;
    let config = validate_config(config)?;

    let prompts = load_prompts(
        &config.dataset_path,
        config.dataset_format,
        config.max_prompts,
    )?;
    println!("{} prompts, first: {:?}", prompts.len(), prompts[0].text);

    let plan = plan_runs(&config, &prompts)?;
    for run in &plan {
        println!(
            "{:<32} warmup={} prompts={:?}",
            run.run_id, run.warmup_count, run.prompt_ids
        );
    }
    Ok(())
}
