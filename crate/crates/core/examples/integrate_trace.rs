//! Integrates a recorded two-GPU power trace and converts it to CO2eq.
//!
//!     cargo run --example integrate_trace

use llm_energy_bench::energy::{
    estimate_emissions, integrate_energy, GridProfile, MeasurementWindow, PowerSample,
};

fn main() -> anyhow::Result<()> {
    // 15 s sampling over a 70 s run; gpu1 joins the batch later.
    let samples = vec![
        PowerSample::new("gpu0", 0.0, 62.0),
        PowerSample::new("gpu1", 0.0, 58.0),
        PowerSample::new("gpu0", 15.0, 241.5),
        PowerSample::new("gpu1", 15.0, 60.0),
        PowerSample::new("gpu0", 30.0, 248.0),
        PowerSample::new("gpu1", 30.0, 233.0),
        PowerSample::new("gpu0", 45.0, 239.0),
        PowerSample::new("gpu1", 45.0, 236.5),
        PowerSample::new("gpu0", 60.0, 71.0),
        PowerSample::new("gpu1", 60.0, 66.0),
        PowerSample::new("cpu-pkg0", 0.0, 35.0),
        PowerSample::new("cpu-pkg0", 30.0, 48.0),
        PowerSample::new("gpu0", 70.0, 64.0),
        PowerSample::new("gpu1", 70.0, 59.0),
        PowerSample::new("cpu-pkg0", 70.0, 33.0),
    ];
    let window = MeasurementWindow::new(0.0, 70.0)?;
    let energy = integrate_energy(&samples, &window)?;
    for (id, j) in &energy.per_source {
        println!("{id:<10} {j:>10.1} J");
    }
    println!("{:<10} {:>10.1} J", "gpu only", energy.gpu_total());
    println!("{:<10} {:>10.1} J", "total", energy.total);

    let requests = 100.0;
    println!("{:.2} J/request", energy.total / requests);

    let grid = GridProfile::new(400.0, 1.2);
    let e = estimate_emissions(energy.total, &grid)?;
    println!(
        "{:.6} kWh x {} g/kWh x PUE {} = {:.4} g CO2eq",
        e.energy_kwh, e.carbon_intensity, e.pue, e.grams_co2eq
    );
    Ok(())
}
