//! Completion client, warm-up and request dispatch.
//!
//! Measured requests are either fired as one unpaced burst or spaced at a
//! fixed rate. Every request ends in a [`RequestRecord`]; failures are kept
//! in the record's status, never dropped.

pub mod wire;

use std::sync::Arc;
use std::time::Duration;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;

use crate::clock;
use crate::config::{DispatchMode, RunSpec};
use crate::dataset::Prompt;
use wire::{CompletionRequest, CompletionResponse, PROMPT_ID_HEADER};

/// Environment variable holding an optional bearer token for the endpoint.
pub const API_KEY_ENV: &str = "LLM_BENCH_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Ok,
    HttpError(u16),
    Timeout,
    TransportError,
}

impl RequestStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RequestStatus::Ok)
    }
}

/// Outcome and timing of one request, on the harness clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub prompt_id: usize,
    pub send_time_s: f64,
    pub completion_time_s: f64,
    /// As reported by the endpoint's usage section; 0 on failure.
    pub output_token_count: u64,
    pub status: RequestStatus,
}

#[derive(Debug, Error)]
pub enum LoadgenError {
    #[error("endpoint {url} is unreachable")]
    EndpointUnreachable { url: String },
    #[error("run {run_id}: all {attempted} requests failed")]
    AllRequestsFailed { run_id: String, attempted: usize },
    #[error("prompt id {0} is not in the dataset")]
    UnknownPrompt(usize),
    #[error("fixed-rate dispatch needs a rate > 0")]
    InvalidRate,
    #[error("building HTTP client: {0}")]
    Client(#[from] reqwest::Error),
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout: Duration,
    pub api_key: Option<String>,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            max_tokens: crate::config::DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: 0.0,
            timeout: Duration::from_secs_f64(crate::config::DEFAULT_REQUEST_TIMEOUT_S),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

/// Client for an OpenAI-compatible `/v1/completions` endpoint.
#[derive(Debug, Clone)]
pub struct CompletionClient {
    http: reqwest::Client,
    url: String,
    opts: Arc<ClientOptions>,
}

impl CompletionClient {
    /// `endpoint` may be the server root or the full completions URL.
    pub fn new(endpoint: &str, opts: ClientOptions) -> Result<Self, LoadgenError> {
        let endpoint = endpoint.trim_end_matches('/');
        let url = if endpoint.ends_with("/completions") {
            endpoint.to_string()
        } else if endpoint.ends_with("/v1") {
            format!("{endpoint}/completions")
        } else {
            format!("{endpoint}/v1/completions")
        };
        let http = reqwest::Client::builder()
            .timeout(opts.timeout)
            .pool_idle_timeout(Duration::from_secs(90))
            .build()?;
        Ok(Self {
            http,
            url,
            opts: Arc::new(opts),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Sends one request and waits for it to reach a terminal state.
    ///
    /// `prompt_id` is forwarded in a header when given so servers can key
    /// behaviour on it.
    pub async fn complete(
        &self,
        model: &str,
        prompt_id: Option<usize>,
        prompt: &str,
    ) -> RequestRecord {
        let body = CompletionRequest {
            model: model.to_string(),
            prompt: prompt.to_string(),
            max_tokens: self.opts.max_tokens,
            temperature: self.opts.temperature,
        };
        let mut req = self.http.post(&self.url).json(&body);
        if let Some(id) = prompt_id {
            req = req.header(PROMPT_ID_HEADER, id.to_string());
        }
        if let Some(key) = &self.opts.api_key {
            req = req.bearer_auth(key);
        }

        let send_time_s = clock::now();
        let outcome = async {
            let resp = req.send().await?;
            let status = resp.status();
            if !status.is_success() {
                return Ok(Err(status.as_u16()));
            }
            let parsed: CompletionResponse = resp.json().await?;
            Ok::<_, reqwest::Error>(Ok(parsed.usage.completion_tokens))
        }
        .await;
        let completion_time_s = clock::now();

        let (status, tokens) = match outcome {
            Ok(Ok(tokens)) => (RequestStatus::Ok, tokens),
            Ok(Err(code)) => (RequestStatus::HttpError(code), 0),
            Err(e) if e.is_timeout() => (RequestStatus::Timeout, 0),
            Err(e) => {
                debug!("request to {} failed: {e}", self.url);
                (RequestStatus::TransportError, 0)
            }
        };
        RequestRecord {
            prompt_id: prompt_id.unwrap_or(usize::MAX),
            send_time_s,
            completion_time_s,
            output_token_count: tokens,
            status,
        }
    }
}

/// What the warm-up phase did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupSummary {
    pub sent: u32,
    pub failures: u32,
    pub start_s: f64,
    pub end_s: f64,
}

/// Sends `count` unmeasured requests, cycling through `prompts` in order,
/// and returns once all of them have finished.
pub async fn warmup(
    client: &CompletionClient,
    model: &str,
    prompts: &[Prompt],
    count: u32,
) -> Result<WarmupSummary, LoadgenError> {
    let start_s = clock::now();
    if count == 0 || prompts.is_empty() {
        return Ok(WarmupSummary {
            sent: 0,
            failures: 0,
            start_s,
            end_s: start_s,
        });
    }
    let mut set = JoinSet::new();
    for i in 0..count as usize {
        let c = client.clone();
        let model = model.to_string();
        let text = prompts[i % prompts.len()].text.clone();
        set.spawn(async move { c.complete(&model, None, &text).await.status });
    }
    let mut failures = 0;
    let mut transport = 0;
    while let Some(res) = set.join_next().await {
        let status = res.expect("request task panicked");
        if !status.is_ok() {
            failures += 1;
        }
        if status == RequestStatus::TransportError {
            transport += 1;
        }
    }
    if transport == count {
        return Err(LoadgenError::EndpointUnreachable {
            url: client.url().to_string(),
        });
    }
    Ok(WarmupSummary {
        sent: count,
        failures,
        start_s,
        end_s: clock::now(),
    })
}

fn prompt_text(prompts: &[Prompt], id: usize) -> Result<String, LoadgenError> {
    prompts
        .get(id)
        .filter(|p| p.id == id)
        .or_else(|| prompts.iter().find(|p| p.id == id))
        .map(|p| p.text.clone())
        .ok_or(LoadgenError::UnknownPrompt(id))
}

async fn collect(
    mut set: JoinSet<RequestRecord>,
    spec: &RunSpec,
    client: &CompletionClient,
) -> Result<Vec<RequestRecord>, LoadgenError> {
    let mut records = Vec::with_capacity(spec.prompt_ids.len());
    while let Some(res) = set.join_next().await {
        records.push(res.expect("request task panicked"));
    }
    records.sort_by_key(|r| r.prompt_id);
    check_outcome(spec, client, &records)?;
    Ok(records)
}

fn check_outcome(
    spec: &RunSpec,
    client: &CompletionClient,
    records: &[RequestRecord],
) -> Result<(), LoadgenError> {
    if records.is_empty() || records.iter().any(|r| r.status.is_ok()) {
        return Ok(());
    }
    if records
        .iter()
        .all(|r| r.status == RequestStatus::TransportError)
    {
        return Err(LoadgenError::EndpointUnreachable {
            url: client.url().to_string(),
        });
    }
    Err(LoadgenError::AllRequestsFailed {
        run_id: spec.run_id.clone(),
        attempted: records.len(),
    })
}

/// Submits every request of `spec` without pacing and waits for all of them.
pub async fn dispatch_burst(
    client: &CompletionClient,
    spec: &RunSpec,
    prompts: &[Prompt],
) -> Result<Vec<RequestRecord>, LoadgenError> {
    let texts: Vec<(usize, String)> = spec
        .prompt_ids
        .iter()
        .map(|&id| prompt_text(prompts, id).map(|t| (id, t)))
        .collect::<Result<_, _>>()?;

    let mut set = JoinSet::new();
    for (id, text) in texts {
        let c = client.clone();
        let model = spec.model.clone();
        set.spawn(async move { c.complete(&model, Some(id), &text).await });
    }
    collect(set, spec, client).await
}

/// Submits the requests of `spec` spaced `1 / rate` seconds apart.
pub async fn dispatch_rate(
    client: &CompletionClient,
    spec: &RunSpec,
    prompts: &[Prompt],
    rate: f64,
) -> Result<Vec<RequestRecord>, LoadgenError> {
    if !(rate > 0.0) {
        return Err(LoadgenError::InvalidRate);
    }
    let texts: Vec<(usize, String)> = spec
        .prompt_ids
        .iter()
        .map(|&id| prompt_text(prompts, id).map(|t| (id, t)))
        .collect::<Result<_, _>>()?;

    let t0 = tokio::time::Instant::now();
    let mut set = JoinSet::new();
    for (i, (id, text)) in texts.into_iter().enumerate() {
        if rate.is_finite() {
            tokio::time::sleep_until(t0 + Duration::from_secs_f64(i as f64 / rate)).await;
        }
        let c = client.clone();
        let model = spec.model.clone();
        set.spawn(async move { c.complete(&model, Some(id), &text).await });
    }
    collect(set, spec, client).await
}

/// Dispatches according to the run's dispatch policy.
pub async fn dispatch(
    client: &CompletionClient,
    spec: &RunSpec,
    prompts: &[Prompt],
) -> Result<Vec<RequestRecord>, LoadgenError> {
    match spec.dispatch.mode {
        DispatchMode::Burst => dispatch_burst(client, spec, prompts).await,
        DispatchMode::FixedRate => {
            let rate = spec.dispatch.rate.ok_or(LoadgenError::InvalidRate)?;
            dispatch_rate(client, spec, prompts, rate).await
        }
    }
}

/// Largest minus smallest send time.
pub fn submission_spread(records: &[RequestRecord]) -> f64 {
    let (lo, hi) = records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.send_time_s), hi.max(r.send_time_s))
        });
    if records.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_forms() {
        let o = ClientOptions::default;
        assert_eq!(
            CompletionClient::new("http://h:1", o()).unwrap().url(),
            "http://h:1/v1/completions"
        );
        assert_eq!(
            CompletionClient::new("http://h:1/v1/", o()).unwrap().url(),
            "http://h:1/v1/completions"
        );
        assert_eq!(
            CompletionClient::new("http://h:1/v1/completions", o())
                .unwrap()
                .url(),
            "http://h:1/v1/completions"
        );
    }

    #[test]
    fn spread() {
        let r = |t: f64| RequestRecord {
            prompt_id: 0,
            send_time_s: t,
            completion_time_s: t + 1.0,
            output_token_count: 0,
            status: RequestStatus::Ok,
        };
        assert_eq!(submission_spread(&[]), 0.0);
        assert_eq!(submission_spread(&[r(3.0), r(1.0), r(2.5)]), 2.0);
    }

    #[test]
    fn status_serde() {
        let s = serde_json::to_string(&RequestStatus::HttpError(500)).unwrap();
        assert_eq!(s, r#"{"http_error":500}"#);
        assert_eq!(
            serde_json::to_string(&RequestStatus::Ok).unwrap(),
            r#""ok""#
        );
    }

    #[tokio::test]
    async fn unreachable_endpoint() {
        let client = CompletionClient::new("http://127.0.0.1:9", ClientOptions::default()).unwrap();
        let prompts = vec![Prompt {
            id: 0,
            text: "hi".into(),
        }];
        let err = warmup(&client, "m", &prompts, 3).await.unwrap_err();
        assert!(matches!(err, LoadgenError::EndpointUnreachable { .. }));
        let spec = RunSpec {
            run_id: "r".into(),
            model: "m".into(),
            request_count: 1,
            dispatch: crate::config::DispatchPolicy::burst(),
            warmup_count: 0,
            repeat_index: 0,
            prompt_ids: vec![0],
        };
        let err = dispatch_burst(&client, &spec, &prompts).await.unwrap_err();
        assert!(matches!(err, LoadgenError::EndpointUnreachable { .. }));
    }

    #[tokio::test]
    async fn zero_warmup_sends_nothing() {
        let client = CompletionClient::new("http://127.0.0.1:9", ClientOptions::default()).unwrap();
        let s = warmup(&client, "m", &[], 0).await.unwrap();
        assert_eq!(s.sent, 0);
        assert_eq!(s.failures, 0);
    }
}
