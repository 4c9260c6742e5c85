use serde::{Deserialize, Serialize};

use super::EnergyError;

pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Grid carbon intensity and facility overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    /// Grams CO2eq per kWh drawn from the grid.
    pub carbon_intensity: f64,
    /// Power usage effectiveness, >= 1.
    pub pue: f64,
}

impl GridProfile {
    pub fn new(carbon_intensity: f64, pue: f64) -> Self {
        Self {
            carbon_intensity,
            pue,
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(self.carbon_intensity.is_finite() && self.carbon_intensity >= 0.0) {
            return Err(EnergyError::InvalidGrid(format!(
                "carbon intensity {} must be >= 0",
                self.carbon_intensity
            )));
        }
        if !(self.pue.is_finite() && self.pue >= 1.0) {
            return Err(EnergyError::InvalidGrid(format!(
                "PUE {} must be >= 1",
                self.pue
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionsEstimate {
    pub energy_kwh: f64,
    pub carbon_intensity: f64,
    pub pue: f64,
    pub grams_co2eq: f64,
}

/// Converts measured joules into grams CO2eq for the given grid.
pub fn estimate_emissions(
    joules: f64,
    grid: &GridProfile,
) -> Result<EmissionsEstimate, EnergyError> {
    grid.validate()?;
    if !(joules.is_finite() && joules >= 0.0) {
        return Err(EnergyError::NegativeEnergy(joules));
    }
    let energy_kwh = joules / JOULES_PER_KWH;
    Ok(EmissionsEstimate {
        energy_kwh,
        carbon_intensity: grid.carbon_intensity,
        pue: grid.pue,
        grams_co2eq: energy_kwh * grid.carbon_intensity * grid.pue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_energy() {
        let e = estimate_emissions(0.0, &GridProfile::new(812.0, 1.6)).unwrap();
        assert_eq!(e.grams_co2eq, 0.0);
    }

    #[test]
    fn one_kwh() {
        let e = estimate_emissions(3.6e6, &GridProfile::new(400.0, 1.0)).unwrap();
        assert_eq!(e.energy_kwh, 1.0);
        assert_eq!(e.grams_co2eq, 400.0);
        let e = estimate_emissions(3.6e6, &GridProfile::new(400.0, 1.5)).unwrap();
        assert_eq!(e.grams_co2eq, 600.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(estimate_emissions(-1.0, &GridProfile::new(400.0, 1.0)).is_err());
        assert!(estimate_emissions(1.0, &GridProfile::new(400.0, 0.9)).is_err());
        assert!(estimate_emissions(1.0, &GridProfile::new(-3.0, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_each_argument(
            joules in 0.0f64..1e9,
            intensity in 0.0f64..2000.0,
            pue in 1.0f64..3.0,
            k in 1.0f64..100.0,
        ) {
            let base = estimate_emissions(joules, &GridProfile::new(intensity, pue)).unwrap().grams_co2eq;
            let tol = |x: f64| 1e-12 * x.abs().max(1e-300);
            let e = estimate_emissions(joules * k, &GridProfile::new(intensity, pue)).unwrap().grams_co2eq;
            prop_assert!((e - k * base).abs() <= tol(k * base));
            let e = estimate_emissions(joules, &GridProfile::new(intensity * k, pue)).unwrap().grams_co2eq;
            prop_assert!((e - k * base).abs() <= tol(k * base));
            let e = estimate_emissions(joules, &GridProfile::new(intensity, pue * k)).unwrap().grams_co2eq;
            prop_assert!((e - k * base).abs() <= tol(k * base));
        }
    }
}
