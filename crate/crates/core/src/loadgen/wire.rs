//! OpenAI-compatible `/v1/completions` wire types.

use serde::{Deserialize, Serialize};

/// Header carrying the dataset index of a measured request.
pub const PROMPT_ID_HEADER: &str = "x-prompt-id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionChoice {
    pub text: String,
    #[serde(default)]
    pub index: u32,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub id: String,
    #[serde(default)]
    pub object: String,
    #[serde(default)]
    pub created: u64,
    pub model: String,
    pub choices: Vec<CompletionChoice>,
    #[serde(default)]
    pub usage: Usage,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_shape() {
        let r = CompletionRequest {
            model: "m".into(),
            prompt: "Hello".into(),
            max_tokens: 128,
            temperature: 0.0,
        };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"model": "m", "prompt": "Hello", "max_tokens": 128, "temperature": 0.0})
        );
    }

    #[test]
    fn parses_server_response_with_extra_fields() {
        let body = r#"{
            "id": "cmpl-1", "object": "text_completion", "created": 1700000000,
            "model": "EleutherAI/pythia-70m",
            "choices": [{"index": 0, "text": " and then", "logprobs": null,
                         "finish_reason": "length", "stop_reason": null}],
            "usage": {"prompt_tokens": 9, "total_tokens": 25, "completion_tokens": 16}
        }"#;
        let r: CompletionResponse = serde_json::from_str(body).unwrap();
        assert_eq!(r.usage.completion_tokens, 16);
        assert_eq!(r.choices[0].text, " and then");
    }
}
