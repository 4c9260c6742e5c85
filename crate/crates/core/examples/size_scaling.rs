//! Fits energy per request against parameter count for a model suite and
//! lists the residuals, which show models that break the size trend.
//!
//!     cargo run --example size_scaling

use llm_energy_bench::analysis::fit_params_vs_energy;
use llm_energy_bench::config::pythia_suite;

fn main() -> anyhow::Result<()> {
    // J/request at 100 concurrent requests. The 410M model has 24 layers
    // against 16 for the 1B model and costs more per request.
    let measured = [0.9, 1.4, 3.6, 2.9, 4.1, 7.6, 16.8];
    let suite = pythia_suite();
    let points: Vec<(f64, f64)> = suite
        .iter()
        .zip(measured)
        .map(|(m, j)| (m.params as f64, j))
        .collect();

    let fit = fit_params_vs_energy(&points)?;
    println!(
        "J/request = {:.3} per billion params + {:.3}   (r² = {:.4})",
        fit.slope * 1e9,
        fit.intercept,
        fit.r_squared
    );
    println!(
        "{:<26} {:>7} {:>6} {:>9} {:>9}",
        "model", "params", "layers", "J/req", "residual"
    );
    for (m, r) in suite.iter().zip(fit.residuals(&points)) {
        println!(
            "{:<26} {:>6.2}B {:>6} {:>9.2} {:>+9.2}",
            m.name,
            m.params as f64 / 1e9,
            m.layers,
            fit.predict(m.params as f64) + r,
            r
        );
    }
    Ok(())
}
