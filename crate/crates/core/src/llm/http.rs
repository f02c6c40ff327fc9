//! Chat-completions backend over HTTP.

use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmBackend, LlmConfig, Needed, ProviderRequest, ProviderResponse, CLARIFY_TOOL};
use crate::error::{ProviderError, ProviderErrorKind};

#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base_url: base_url.into(), model: model.into(), api_key, agent }
    }

    pub fn from_config(c: &LlmConfig) -> Option<Self> {
        let base = c.base_url.clone()?;
        Some(Self::new(base, c.model.clone(), c.api_key.clone(), Duration::from_secs(c.timeout_secs)))
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

fn clarify_schema() -> Value {
    json!({
        "type": "function",
        "function": {
            "name": CLARIFY_TOOL,
            "description": "Ask the user to resolve an ambiguity before continuing.",
            "parameters": {
                "type": "object",
                "properties": {
                    "question": {"type": "string"},
                    "candidates": {"type": "array", "items": {"type": "string"}},
                    "needed": {"type": "string", "enum": ["selection", "parameters", "upload"]}
                },
                "required": ["question", "needed"],
                "additionalProperties": false
            }
        }
    })
}

/// Request body for `req`.
pub fn request_body(model: &str, req: &ProviderRequest) -> Value {
    let mut body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": req.prompt.system},
            {"role": "user", "content": req.prompt.user},
        ],
    });
    if req.template_id.expects_tools() {
        let mut tools: Vec<Value> = req.tools.iter().map(|t| t.function_schema()).collect();
        tools.push(clarify_schema());
        body["tools"] = json!(tools);
    } else {
        body["response_format"] = json!({"type": "json_object"});
    }
    body
}

/// Interpret a chat-completions response body.
pub fn parse_completion(req: &ProviderRequest, body: &Value) -> Result<ProviderResponse, ProviderError> {
    let malformed = |m: &str| ProviderError::malformed(m.to_string());
    let msg = body
        .pointer("/choices/0/message")
        .ok_or_else(|| malformed("response has no choices[0].message"))?;
    if let Some(call) = msg.pointer("/tool_calls/0/function") {
        let name = call["name"].as_str().ok_or_else(|| malformed("tool call without a name"))?;
        let args: Value = match &call["arguments"] {
            Value::String(s) => serde_json::from_str(s).map_err(|e| malformed(&format!("tool arguments: {e}")))?,
            Value::Null => json!({}),
            other => other.clone(),
        };
        if name == CLARIFY_TOOL {
            let question = args["question"].as_str().ok_or_else(|| malformed("clarify without question"))?;
            let needed: Needed = serde_json::from_value(args["needed"].clone())
                .map_err(|_| malformed("clarify `needed` is not selection, parameters or upload"))?;
            let candidates = match &args["candidates"] {
                Value::Null => Vec::new(),
                v => serde_json::from_value(v.clone()).map_err(|_| malformed("clarify candidates are not object ids"))?,
            };
            return Ok(ProviderResponse::Clarify { question: question.to_string(), candidates, needed });
        }
        let rationale = msg["content"].as_str().map(str::trim).filter(|s| !s.is_empty()).map(String::from);
        return Ok(ProviderResponse::ToolCall { name: name.to_string(), args, rationale });
    }
    let content = msg["content"].as_str().ok_or_else(|| malformed("message has neither content nor tool call"))?;
    if req.template_id.expects_tools() {
        Ok(ProviderResponse::AssistantText { text: content.to_string() })
    } else {
        let document = serde_json::from_str(content).map_err(|e| malformed(&format!("expected JSON: {e}")))?;
        Ok(ProviderResponse::Structured { document })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let mut call = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(request_body(&self.model, req)).map_err(transport_error)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError::new(ProviderErrorKind::Network, format!("HTTP {status}")));
        }
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::malformed(format!("response body: {e}")))?;
        parse_completion(req, &body)
    }
}

fn transport_error(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::new(ProviderErrorKind::Timeout, e.to_string()),
        other => ProviderError::new(ProviderErrorKind::Network, other.to_string()),
    }
}
