mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{mock_cfg, start_mock, timing_lock};
use llm_energy_bench::clock;
use llm_energy_bench::energy::{
    integrate_energy, start_tracker, ConstantSource, EnergyError, HttpPowerSource, PowerSource,
    TraceSource,
};

#[test]
fn cadence_follows_interval() {
    let _t = timing_lock();
    let src = Arc::new(ConstantSource::new("gpu0", 200.0));
    let mut tracker = start_tracker(vec![src.clone()], Duration::from_millis(50)).unwrap();
    std::thread::sleep(Duration::from_millis(260));
    let (window, samples) = tracker.stop().unwrap();

    // start + 5 ticks + closing read
    assert!(samples.len() >= 6, "{} samples", samples.len());
    assert_eq!(samples.len() as u64, src.read_count());
    for w in samples.windows(2).take(samples.len() - 2) {
        let gap = w[1].timestamp_s - w[0].timestamp_s;
        assert!((gap - 0.05).abs() < 0.02, "gap {gap}");
    }
    assert_eq!(samples[0].timestamp_s, window.start_s);
    assert_eq!(samples.last().unwrap().timestamp_s, window.end_s);
    let e = integrate_energy(&samples, &window).unwrap();
    assert!((e.total - 200.0 * window.duration_s()).abs() < 1e-9);
}

#[test]
fn long_interval_costs_two_reads() {
    let src = Arc::new(ConstantSource::new("gpu0", 50.0));
    let mut tracker = start_tracker(vec![src.clone()], Duration::from_secs(15)).unwrap();
    std::thread::sleep(Duration::from_millis(100));
    let (_, samples) = tracker.stop().unwrap();
    assert_eq!(samples.len(), 2);
    assert_eq!(src.read_count(), 2);
}

#[test]
fn sources_are_integrated_separately() {
    let _t = timing_lock();
    let anchor = clock::now();
    let trace = Arc::new(TraceSource::anchored_at(
        "gpu1",
        anchor,
        vec![(0.0, 100.0), (0.1, 300.0)],
    ));
    let cpu = Arc::new(ConstantSource::new("cpu-pkg0", 40.0));
    let sources: Vec<Arc<dyn PowerSource>> = vec![trace, cpu];
    let mut tracker = start_tracker(sources, Duration::from_millis(10)).unwrap();
    std::thread::sleep(Duration::from_millis(200));
    let (window, samples) = tracker.stop().unwrap();

    let e = integrate_energy(&samples, &window).unwrap();
    let cpu_j = e.per_source["cpu-pkg0"];
    assert!((cpu_j - 40.0 * window.duration_s()).abs() < 1e-9);
    // Exact would be 100 W until 0.1 s and 300 W after; sampling lag at
    // the step is bounded by one interval.
    let t_step = anchor + 0.1;
    let exact = 100.0 * (t_step - window.start_s) + 300.0 * (window.end_s - t_step);
    assert!(
        (e.per_source["gpu1"] - exact).abs() <= 200.0 * 0.011,
        "{e:?}"
    );
    assert_eq!(e.total, e.per_source.values().sum::<f64>());
    assert_eq!(e.gpu_total(), e.per_source["gpu1"]);
}

#[test]
fn second_stop_is_an_error() {
    let mut tracker = start_tracker(
        vec![Arc::new(ConstantSource::new("gpu0", 1.0))],
        Duration::from_millis(10),
    )
    .unwrap();
    tracker.stop().unwrap();
    assert!(!tracker.is_running());
    assert!(matches!(tracker.stop(), Err(EnergyError::NotRunning)));
}

#[test]
fn empty_source_list() {
    assert!(matches!(
        start_tracker(Vec::new(), Duration::from_secs(1)),
        Err(EnergyError::NoSources)
    ));
}

#[tokio::test(flavor = "multi_thread")]
async fn polls_mock_over_http() {
    let server = start_mock(mock_cfg(4, 0.05)).await;
    let base = server.base_url();
    let tracker = tokio::task::spawn_blocking(move || {
        let src: Arc<dyn PowerSource> = Arc::new(HttpPowerSource::new("mock", &base));
        let mut t = start_tracker(vec![src], Duration::from_millis(20)).unwrap();
        std::thread::sleep(Duration::from_millis(100));
        t.stop().unwrap()
    });
    let (window, samples) = tracker.await.unwrap();
    assert!(samples
        .iter()
        .all(|s| s.watts == 100.0 && s.source_id == "mock"));
    let e = integrate_energy(&samples, &window).unwrap();
    assert!((e.total - 100.0 * window.duration_s()).abs() < 1e-9);
    server.shutdown().await;

    let dead: Arc<dyn PowerSource> = Arc::new(HttpPowerSource::new("mock", "http://127.0.0.1:9"));
    let err =
        tokio::task::spawn_blocking(move || start_tracker(vec![dead], Duration::from_secs(1)))
            .await
            .unwrap();
    assert!(matches!(err, Err(EnergyError::SourceInitFailure { .. })));
}
