mod common;

use common::{bench_cmd, hellaswag_file, write_file, MockProcess};
use llm_energy_bench::report::Report;

#[test]
fn missing_endpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = hellaswag_file(4);
    let out = dir.path().join("report.json");
    let status = bench_cmd()
        .args(["run", "--model", "m", "--loads", "2", "--intensity", "400"])
        .arg("--dataset")
        .arg(data.path())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = hellaswag_file(4);
    let out = dir.path().join("report.json");
    let status = bench_cmd()
        .args(["run", "--endpoint", "http://127.0.0.1:9", "--model", "m"])
        .args([
            "--loads",
            "0",
            "--intensity",
            "400",
            "--source",
            "constant:gpu0:10",
        ])
        .arg("--dataset")
        .arg(data.path())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unreachable_endpoint_exits_2_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = hellaswag_file(4);
    let out = dir.path().join("report.json");
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let status = bench_cmd()
        .args(["run", "--model", "m", "--loads", "2", "--warmup", "2"])
        .args([
            "--intensity",
            "400",
            "--source",
            "constant:gpu0:10",
            "--timeout",
            "5",
        ])
        .arg("--endpoint")
        .arg(format!("http://127.0.0.1:{port}"))
        .arg("--dataset")
        .arg(data.path())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn run_then_report_against_mock_process() {
    let mock = MockProcess::spawn(&["--capacity", "4", "--duration", "0.05"]);
    let dir = tempfile::tempdir().unwrap();
    let data = hellaswag_file(8);
    let cfg = dir.path().join("bench.toml");
    write_file(
        &cfg,
        &format!(
            r#"
endpoint_url = "{}"
models = ["mock-a", "mock-b"]
request_loads = [2, 4, 8]
warmup_count = 3
sample_interval_s = 0.01
power_sources = ["mock-http:{}"]
fit_load = 8
model_profiles = [
  {{ name = "mock-a", params = 1000000, layers = 4 }},
  {{ name = "mock-b", params = 2000000, layers = 8 }},
]

[grid]
carbon_intensity = 400.0
pue = 1.5
"#,
            mock.base_url, mock.base_url
        ),
    );
    let out = dir.path().join("report.json");
    let plots = dir.path().join("plots");
    let run = bench_cmd()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--dataset")
        .arg(data.path())
        .arg("--out")
        .arg(&out)
        .arg("--plot-dir")
        .arg(&plots)
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("report written to"));

    let report = Report::load(&out).unwrap();
    assert_eq!(report.runs.len(), 6);
    assert_eq!(report.derived.series.len(), 2);
    assert!(report
        .runs
        .iter()
        .all(|r| r.energy.per_source.contains_key("mock")));
    assert_eq!(report.derived.size_fit.as_ref().unwrap().load, 8);
    assert_eq!(report.config.grid.pue, 1.5);
    for f in [
        "load_sweep.csv",
        "params_vs_energy.csv",
        "model_comparison.csv",
    ] {
        assert!(plots.join(f).is_file(), "{f}");
    }

    let table = bench_cmd().arg("report").arg(&out).output().unwrap();
    assert!(table.status.success());
    assert!(String::from_utf8_lossy(&table.stdout).contains("mock-a"));

    let json = bench_cmd()
        .arg("report")
        .arg(&out)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(json.status.success());
    let again = Report::from_json(&String::from_utf8(json.stdout).unwrap()).unwrap();
    assert_eq!(again.derived, report.derived);

    let csv_dir = dir.path().join("csv");
    std::fs::create_dir(&csv_dir).unwrap();
    let csv = bench_cmd()
        .arg("report")
        .arg(&out)
        .args(["--format", "csv", "--out-dir"])
        .arg(&csv_dir)
        .output()
        .unwrap();
    assert!(csv.status.success());
    assert_eq!(
        std::fs::read(csv_dir.join("load_sweep.csv")).unwrap(),
        std::fs::read(plots.join("load_sweep.csv")).unwrap()
    );
}

#[test]
fn failed_requests_exit_3_with_report() {
    let mock = MockProcess::spawn(&["--capacity", "4", "--duration", "0.02", "--fail-every", "2"]);
    let dir = tempfile::tempdir().unwrap();
    let data = hellaswag_file(4);
    let out = dir.path().join("report.json");
    let run = bench_cmd()
        .args(["run", "--model", "m", "--loads", "4", "--warmup", "0"])
        .args([
            "--intensity",
            "400",
            "--source",
            "constant:gpu0:10",
            "--sample-interval",
            "0.01",
        ])
        .arg("--endpoint")
        .arg(&mock.base_url)
        .arg("--dataset")
        .arg(data.path())
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let report = Report::load(&out).unwrap();
    assert_eq!(report.derived.failed_requests, 2);
    assert_eq!(
        report.derived.runs_with_failures,
        vec!["m@n4#r0".to_string()]
    );
}

#[test]
fn report_on_garbage_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    write_file(&p, r#"{"schema_version": 99}"#);
    let status = bench_cmd().arg("report").arg(&p).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
