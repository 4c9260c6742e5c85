#![allow(dead_code)]

use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use llm_energy_bench::mockserv::{MockConfig, MockServer};
use tempfile::NamedTempFile;

/// Serialises tests that measure wall-clock timing.
static TIMING: Mutex<()> = Mutex::new(());

pub fn timing_lock() -> MutexGuard<'static, ()> {
    TIMING.lock().unwrap_or_else(|e| e.into_inner())
}

/// A HellaSwag-style JSONL file with `n` distinct prompts.
pub fn hellaswag_file(n: usize) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    for i in 0..n {
        writeln!(
            f,
            r#"{{"ind": {i}, "ctx": "Prompt {i}: a person stands in a kitchen and", "label": 0}}"#
        )
        .unwrap();
    }
    f.flush().unwrap();
    f
}

pub fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

pub fn mock_cfg(capacity: u32, duration_s: f64) -> MockConfig {
    MockConfig {
        capacity,
        per_request_duration_s: duration_s,
        idle_power_w: 100.0,
        peak_power_w: 300.0,
        ..Default::default()
    }
}

pub async fn start_mock(cfg: MockConfig) -> MockServer {
    MockServer::start_local(cfg)
        .await
        .expect("mock server starts")
}

/// A `mock` subcommand child process, killed on drop.
pub struct MockProcess {
    child: std::process::Child,
    pub base_url: String,
}

impl MockProcess {
    pub fn spawn(args: &[&str]) -> Self {
        use std::io::BufRead;
        use std::process::{Command, Stdio};
        let mut child = Command::new(env!("CARGO_BIN_EXE_llm-energy-bench"))
            .args(["mock", "--bind", "127.0.0.1:0"])
            .args(args)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .spawn()
            .expect("spawn mock");
        let mut line = String::new();
        std::io::BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base_url = line
            .trim()
            .rsplit(' ')
            .next()
            .expect("listening line")
            .to_string();
        assert!(
            base_url.starts_with("http://"),
            "unexpected output {line:?}"
        );
        Self { child, base_url }
    }
}

impl Drop for MockProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn bench_cmd() -> std::process::Command {
    let mut c = std::process::Command::new(env!("CARGO_BIN_EXE_llm-energy-bench"));
    c.env("RUST_LOG", "warn").env_remove("LLM_BENCH_ENDPOINT");
    c
}
