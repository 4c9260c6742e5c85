use std::collections::BTreeMap;

use super::{EnergyBreakdown, EnergyError, MeasurementWindow, PowerSample};

/// Integrates per-source power samples over `window` with a left-rectangle rule.
///
/// For each source, sample `i` contributes `watts_i * (t_{i+1} - t_i)` and the
/// last sample extends to `window.end_s`. Samples of different sources may be
/// interleaved; within one source they must be strictly increasing in time.
pub fn integrate_energy(
    samples: &[PowerSample],
    window: &MeasurementWindow,
) -> Result<EnergyBreakdown, EnergyError> {
    let mut by_source: BTreeMap<&str, Vec<&PowerSample>> = BTreeMap::new();
    for s in samples {
        if !(s.watts.is_finite() && s.watts >= 0.0) {
            return Err(EnergyError::InvalidPower {
                source_id: s.source_id.clone(),
                watts: s.watts,
            });
        }
        if s.timestamp_s < window.start_s || s.timestamp_s > window.end_s {
            return Err(EnergyError::SampleOutsideWindow {
                source_id: s.source_id.clone(),
                timestamp_s: s.timestamp_s,
            });
        }
        by_source.entry(&s.source_id).or_default().push(s);
    }

    let mut per_source = BTreeMap::new();
    for (id, trace) in by_source {
        if trace
            .windows(2)
            .any(|w| w[1].timestamp_s <= w[0].timestamp_s)
        {
            return Err(EnergyError::UnsortedSamples {
                source_id: id.to_string(),
            });
        }
        let mut joules = 0.0;
        for (i, s) in trace.iter().enumerate() {
            let until = trace.get(i + 1).map_or(window.end_s, |n| n.timestamp_s);
            joules += s.watts * (until - s.timestamp_s);
        }
        per_source.insert(id.to_string(), joules);
    }
    Ok(EnergyBreakdown::from_sources(per_source))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(a: f64, b: f64) -> MeasurementWindow {
        MeasurementWindow::new(a, b).unwrap()
    }

    #[test]
    fn constant_power() {
        let s: Vec<_> = [0.0, 15.0, 30.0]
            .iter()
            .map(|&t| PowerSample::new("gpu0", t, 100.0))
            .collect();
        let e = integrate_energy(&s, &w(0.0, 30.0)).unwrap();
        assert_eq!(e.total, 3000.0);
    }

    #[test]
    fn no_samples_is_zero() {
        let e = integrate_energy(&[], &w(0.0, 42.0)).unwrap();
        assert_eq!(e.total, 0.0);
        assert!(e.per_source.is_empty());
    }

    #[test]
    fn piecewise_trace() {
        let s = vec![
            PowerSample::new("gpu0", 0.0, 100.0),
            PowerSample::new("gpu0", 10.0, 200.0),
            PowerSample::new("gpu0", 20.0, 50.0),
        ];
        let e = integrate_energy(&s, &w(0.0, 30.0)).unwrap();
        assert_eq!(e.total, 3500.0);
    }

    #[test]
    fn empty_window_is_zero_not_error() {
        let s = vec![PowerSample::new("gpu0", 5.0, 100.0)];
        let e = integrate_energy(&s, &w(5.0, 5.0)).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn interleaved_sources() {
        let s = vec![
            PowerSample::new("gpu0", 0.0, 100.0),
            PowerSample::new("cpu-pkg0", 0.0, 10.0),
            PowerSample::new("gpu0", 1.0, 200.0),
            PowerSample::new("cpu-pkg0", 1.0, 20.0),
        ];
        let e = integrate_energy(&s, &w(0.0, 2.0)).unwrap();
        assert_eq!(e.per_source["gpu0"], 300.0);
        assert_eq!(e.per_source["cpu-pkg0"], 30.0);
        assert_eq!(e.total, 330.0);
    }

    #[test]
    fn unsorted_rejected() {
        let s = vec![
            PowerSample::new("gpu0", 1.0, 100.0),
            PowerSample::new("gpu0", 0.5, 100.0),
        ];
        assert!(matches!(
            integrate_energy(&s, &w(0.0, 2.0)),
            Err(EnergyError::UnsortedSamples { .. })
        ));
        let dup = vec![
            PowerSample::new("gpu0", 1.0, 100.0),
            PowerSample::new("gpu0", 1.0, 100.0),
        ];
        assert!(integrate_energy(&dup, &w(0.0, 2.0)).is_err());
    }

    #[test]
    fn outside_window_rejected() {
        let s = vec![PowerSample::new("gpu0", 3.0, 100.0)];
        assert!(matches!(
            integrate_energy(&s, &w(0.0, 2.0)),
            Err(EnergyError::SampleOutsideWindow { .. })
        ));
    }

    fn trace() -> impl Strategy<Value = (Vec<PowerSample>, f64)> {
        prop::collection::vec((0.01f64..5.0, 0.0f64..500.0), 1..30).prop_map(|steps| {
            let mut t = 0.0;
            let mut out = Vec::new();
            for (dt, p) in steps {
                out.push(PowerSample::new("gpu0", t, p));
                t += dt;
            }
            (out, t)
        })
    }

    proptest! {
        #[test]
        fn additive_over_split((samples, end) in trace(), pick in any::<prop::sample::Index>()) {
            let split_idx = pick.index(samples.len());
            let b = samples[split_idx].timestamp_s;
            let whole = integrate_energy(&samples, &w(0.0, end)).unwrap().total;
            let left: Vec<_> = samples.iter().filter(|s| s.timestamp_s < b).cloned().collect();
            let right: Vec<_> = samples.iter().filter(|s| s.timestamp_s >= b).cloned().collect();
            let l = integrate_energy(&left, &w(0.0, b)).unwrap().total;
            let r = integrate_energy(&right, &w(b, end)).unwrap().total;
            prop_assert!((whole - (l + r)).abs() <= 1e-9 * whole.abs().max(1.0));
        }

        #[test]
        fn scales_linearly((samples, end) in trace(), k in 0.0f64..50.0) {
            let base = integrate_energy(&samples, &w(0.0, end)).unwrap();
            let scaled: Vec<_> = samples
                .iter()
                .map(|s| PowerSample::new(s.source_id.clone(), s.timestamp_s, s.watts * k))
                .collect();
            let e = integrate_energy(&scaled, &w(0.0, end)).unwrap();
            prop_assert!((e.total - k * base.total).abs() <= 1e-9 * (k * base.total).abs().max(1.0));
        }
    }
}
