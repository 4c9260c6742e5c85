use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::{oneshot, OwnedSemaphorePermit, Semaphore};
use tokio::task::JoinHandle;

use super::{MockConfig, MockConfigError};
use crate::clock;
use crate::energy::{PowerSource, SourceError};
use crate::loadgen::wire::{
    CompletionChoice, CompletionRequest, CompletionResponse, Usage, PROMPT_ID_HEADER,
};

const FILLER: &[&str] = &[
    "the",
    "a",
    "then",
    "and",
    "he",
    "she",
    "they",
    "walks",
    "runs",
    "picks",
    "up",
    "down",
    "slowly",
    "quickly",
    "ball",
    "rope",
    "water",
    "camera",
    "continues",
    "shows",
    "into",
    "over",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflightEntry {
    pub t_s: f64,
    pub inflight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflightLog {
    pub capacity: u32,
    pub max_inflight: u32,
    pub entries: Vec<InflightEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub watts: f64,
    pub inflight: u32,
    pub capacity: u32,
}

#[derive(Debug, Default)]
struct Slots {
    inflight: u32,
    queued: u32,
    max_inflight: u32,
    log: Vec<InflightEntry>,
}

/// Shared state of one mock server. All slot accounting goes through one lock.
#[derive(Debug)]
pub struct MockState {
    cfg: MockConfig,
    permits: Arc<Semaphore>,
    slots: Mutex<Slots>,
    arrivals: AtomicU64,
}

impl MockState {
    pub fn new(cfg: MockConfig) -> Result<Self, MockConfigError> {
        cfg.validate()?;
        Ok(Self {
            permits: Arc::new(Semaphore::new(cfg.capacity as usize)),
            cfg,
            slots: Mutex::new(Slots::default()),
            arrivals: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &MockConfig {
        &self.cfg
    }

    fn lock(&self) -> MutexGuard<'_, Slots> {
        self.slots.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn inflight(&self) -> u32 {
        self.lock().inflight
    }

    pub fn queued(&self) -> u32 {
        self.lock().queued
    }

    pub fn power_watts(&self) -> f64 {
        self.cfg.power_at(self.inflight())
    }

    pub fn power_report(&self) -> PowerReport {
        let inflight = self.inflight();
        PowerReport {
            watts: self.cfg.power_at(inflight),
            inflight,
            capacity: self.cfg.capacity,
        }
    }

    pub fn inflight_log(&self) -> InflightLog {
        let s = self.lock();
        InflightLog {
            capacity: self.cfg.capacity,
            max_inflight: s.max_inflight,
            entries: s.log.clone(),
        }
    }

    /// Clears the inflight history and the arrival counter.
    pub fn reset(&self) {
        let mut s = self.lock();
        s.log.clear();
        s.max_inflight = s.inflight;
        self.arrivals.store(0, Ordering::SeqCst);
    }

    /// Serves one completion: waits for a slot, holds it for the service time.
    pub async fn serve(&self, req: &CompletionRequest, prompt_id: Option<u64>) -> Response {
        let arrival = self.arrivals.fetch_add(1, Ordering::SeqCst);
        let index = prompt_id.unwrap_or(arrival);

        let queued = QueueGuard::enter(self);
        let permit = self
            .permits
            .clone()
            .acquire_owned()
            .await
            .expect("semaphore is never closed");
        drop(queued);
        let slot = SlotGuard::enter(self, permit);
        tokio::time::sleep(Duration::from_secs_f64(self.cfg.per_request_duration_s)).await;
        drop(slot);

        if self
            .cfg
            .fault_schedule
            .as_ref()
            .is_some_and(|f| f.hits(index))
        {
            return (
                StatusCode::INTERNAL_SERVER_ERROR,
                Json(serde_json::json!({"error": {"message": "injected fault", "index": index}})),
            )
                .into_response();
        }
        Json(self.completion_body(req, index)).into_response()
    }

    /// Deterministic response for a request: same prompt and seed, same text.
    pub fn completion_body(&self, req: &CompletionRequest, index: u64) -> CompletionResponse {
        let g = self.cfg.tokens_per_response;
        let mut h = Sha256::new();
        h.update(self.cfg.seed.to_le_bytes());
        h.update(req.prompt.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        let words: Vec<&str> = (0..g)
            .map(|_| *FILLER.choose(&mut rng).expect("non-empty vocabulary"))
            .collect();
        let prompt_tokens = req.prompt.split_whitespace().count() as u64;
        CompletionResponse {
            id: format!("cmpl-mock-{index}"),
            object: "text_completion".into(),
            created: 0,
            model: req.model.clone(),
            choices: vec![CompletionChoice {
                text: format!(" {}", words.join(" ")),
                index: 0,
                finish_reason: Some("length".into()),
            }],
            usage: Usage {
                prompt_tokens,
                completion_tokens: g as u64,
                total_tokens: prompt_tokens + g as u64,
            },
        }
    }
}

struct QueueGuard<'a>(&'a MockState);

impl<'a> QueueGuard<'a> {
    fn enter(state: &'a MockState) -> Self {
        state.lock().queued += 1;
        Self(state)
    }
}

impl Drop for QueueGuard<'_> {
    fn drop(&mut self) {
        self.0.lock().queued -= 1;
    }
}

/// Occupies one execution slot; releases the count before the permit so the
/// logged inflight never exceeds capacity.
struct SlotGuard<'a> {
    state: &'a MockState,
    permit: Option<OwnedSemaphorePermit>,
}

impl<'a> SlotGuard<'a> {
    fn enter(state: &'a MockState, permit: OwnedSemaphorePermit) -> Self {
        let mut s = state.lock();
        s.inflight += 1;
        s.max_inflight = s.max_inflight.max(s.inflight);
        let entry = InflightEntry {
            t_s: clock::now(),
            inflight: s.inflight,
        };
        s.log.push(entry);
        drop(s);
        Self {
            state,
            permit: Some(permit),
        }
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut s = self.state.lock();
        s.inflight -= 1;
        let entry = InflightEntry {
            t_s: clock::now(),
            inflight: s.inflight,
        };
        s.log.push(entry);
        drop(s);
        self.permit.take();
    }
}

/// Reads the mock's synthetic power draw directly from its state.
pub struct MockPowerSource {
    state: Arc<MockState>,
}

impl MockPowerSource {
    pub fn new(state: Arc<MockState>) -> Self {
        Self { state }
    }
}

impl PowerSource for MockPowerSource {
    fn id(&self) -> &str {
        "mock"
    }

    fn read_watts(&self) -> Result<f64, SourceError> {
        Ok(self.state.power_watts())
    }
}

async fn completions(
    State(state): State<Arc<MockState>>,
    headers: HeaderMap,
    Json(req): Json<CompletionRequest>,
) -> Response {
    if req.prompt.is_empty() || req.max_tokens == 0 {
        return (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({"error": {"message": "empty prompt or max_tokens = 0"}})),
        )
            .into_response();
    }
    let prompt_id = headers
        .get(PROMPT_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok());
    state.serve(&req, prompt_id).await
}

async fn models() -> Json<serde_json::Value> {
    Json(serde_json::json!({"object": "list", "data": [{"id": "mock", "object": "model"}]}))
}

async fn power(State(state): State<Arc<MockState>>) -> Json<PowerReport> {
    Json(state.power_report())
}

async fn inflight_log(State(state): State<Arc<MockState>>) -> Json<InflightLog> {
    Json(state.inflight_log())
}

async fn reset(State(state): State<Arc<MockState>>) -> StatusCode {
    state.reset();
    StatusCode::NO_CONTENT
}

pub fn router(state: Arc<MockState>) -> Router {
    Router::new()
        .route("/v1/completions", post(completions))
        .route("/v1/models", get(models))
        .route("/mock/power", get(power))
        .route("/mock/inflight_log", get(inflight_log))
        .route("/mock/reset", post(reset))
        .with_state(state)
}

/// A mock server running on the current tokio runtime.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<std::io::Result<()>>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub async fn start(cfg: MockConfig, addr: SocketAddr) -> anyhow::Result<Self> {
        let state = Arc::new(MockState::new(cfg)?);
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = router(state.clone());
        let task = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        });
        Ok(Self {
            addr,
            state,
            shutdown: Some(tx),
            task: Some(task),
        })
    }

    /// Binds to an ephemeral localhost port.
    pub async fn start_local(cfg: MockConfig) -> anyhow::Result<Self> {
        Self::start(cfg, SocketAddr::from(([127, 0, 0, 1], 0))).await
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn state(&self) -> &Arc<MockState> {
        &self.state
    }

    pub fn power_source(&self) -> Arc<dyn PowerSource> {
        Arc::new(MockPowerSource::new(self.state.clone()))
    }

    /// Waits until the server exits on its own (it only does so on error).
    pub async fn wait(mut self) -> std::io::Result<()> {
        match self.task.take() {
            Some(t) => t.await.unwrap_or_else(|e| Err(std::io::Error::other(e))),
            None => Ok(()),
        }
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.task.take() {
            let _ = t.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> CompletionRequest {
        CompletionRequest {
            model: "m".into(),
            prompt: prompt.into(),
            max_tokens: 16,
            temperature: 0.0,
        }
    }

    #[test]
    fn body_is_deterministic() {
        let s = MockState::new(MockConfig::default()).unwrap();
        let a = s.completion_body(&req("A man is sitting on a roof."), 3);
        let b = s.completion_body(&req("A man is sitting on a roof."), 3);
        assert_eq!(a, b);
        assert_eq!(a.usage.completion_tokens, 16);
        assert_eq!(a.choices[0].text.split_whitespace().count(), 16);
        let other = s.completion_body(&req("Something else entirely"), 3);
        assert_ne!(a.choices[0].text, other.choices[0].text);
    }

    #[tokio::test(start_paused = true)]
    async fn capacity_bounds_inflight() {
        let cfg = MockConfig {
            capacity: 2,
            per_request_duration_s: 1.0,
            ..Default::default()
        };
        let state = Arc::new(MockState::new(cfg).unwrap());
        let mut tasks = Vec::new();
        for i in 0..5 {
            let s = state.clone();
            tasks.push(tokio::spawn(async move {
                s.serve(&req("x"), Some(i)).await.status()
            }));
        }
        for t in tasks {
            assert_eq!(t.await.unwrap(), StatusCode::OK);
        }
        let log = state.inflight_log();
        assert_eq!(log.max_inflight, 2);
        assert!(log.entries.iter().all(|e| e.inflight <= 2));
        assert_eq!(state.inflight(), 0);
        assert_eq!(state.queued(), 0);
        // 5 enters + 5 exits
        assert_eq!(log.entries.len(), 10);
    }

    #[tokio::test(start_paused = true)]
    async fn fault_schedule_by_prompt_id() {
        let cfg = MockConfig {
            per_request_duration_s: 0.01,
            fault_schedule: Some(super::super::FaultSchedule::EveryNth(3)),
            ..Default::default()
        };
        let state = MockState::new(cfg).unwrap();
        let mut failed = Vec::new();
        for i in [5u64, 0, 2, 1, 4, 3] {
            if state.serve(&req("x"), Some(i)).await.status() == StatusCode::INTERNAL_SERVER_ERROR {
                failed.push(i);
            }
        }
        failed.sort();
        assert_eq!(failed, vec![2, 5]);
    }
}
