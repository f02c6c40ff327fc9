//! Language-model access: request/response types, the validation wall
//! between provider output and the rest of the engine, prompt templates, a
//! scripted mock and an HTTP chat-completions backend.

pub mod http;
pub mod mock;
pub mod prompt;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use http::HttpBackend;
pub use mock::MockProvider;
pub use prompt::{assemble_prompt, PromptDocument};

use crate::context::AgentContext;
use crate::error::ProviderError;
use crate::id::ObjectId;
use crate::meta::MetaRegistry;
use crate::tools::{validate_args, ToolDescriptor};

/// Name of the reserved tool a model calls to ask the user a question.
pub const CLARIFY_TOOL: &str = "clarify";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    IntentComprehension,
    SemanticMatching,
    ElementModification,
    TextRefinement,
    ClipStrategy,
    InstructionSuggestions,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::IntentComprehension,
        TemplateId::SemanticMatching,
        TemplateId::ElementModification,
        TemplateId::TextRefinement,
        TemplateId::ClipStrategy,
        TemplateId::InstructionSuggestions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IntentComprehension => "intent_comprehension",
            Self::SemanticMatching => "semantic_matching",
            Self::ElementModification => "element_modification",
            Self::TextRefinement => "text_refinement",
            Self::ClipStrategy => "clip_strategy",
            Self::InstructionSuggestions => "instruction_suggestions",
        }
    }

    /// Whether the template answers with tool calls (otherwise a structured
    /// document).
    pub fn expects_tools(self) -> bool {
        matches!(self, Self::IntentComprehension | Self::ElementModification)
    }
}

/// Restricts one field of a structured answer to an enumerated set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub field: String,
    pub allowed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub template_id: TemplateId,
    pub context: AgentContext,
    pub tools: Vec<ToolDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Constraint>,
    /// Rendered prompt, filled in by the gateway.
    pub prompt: PromptDocument,
}

impl ProviderRequest {
    pub fn new(template_id: TemplateId, context: AgentContext) -> Self {
        let prompt = assemble_prompt(template_id, &context);
        Self { template_id, context, tools: Vec::new(), constraints: None, prompt }
    }

    pub fn with_tools(mut self, tools: Vec<ToolDescriptor>) -> Self {
        self.tools = tools;
        self
    }

    pub fn with_constraint(mut self, field: &str, allowed: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.constraints = Some(Constraint {
            field: field.to_string(),
            allowed: allowed.into_iter().map(Into::into).collect(),
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Needed {
    Selection,
    Parameters,
    Upload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderResponse {
    ToolCall {
        name: String,
        args: Value,
        /// Model's explanation accompanying the call, when it gave one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rationale: Option<String>,
    },
    AssistantText { text: String },
    Clarify { question: String, candidates: Vec<ObjectId>, needed: Needed },
    Structured { document: Value },
}

impl ProviderResponse {
    pub fn tool_call(name: &str, args: Value) -> Self {
        Self::ToolCall { name: name.to_string(), args, rationale: None }
    }
}

/// Something that can answer a request. Implementations return raw model
/// output; validation happens in [`Gateway`].
pub trait LlmBackend: Send + Sync {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(req)
    }
}

/// Validating front for a backend.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Gateway")
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Self { backend }
    }

    /// Complete `req` and reject any answer that does not fit it.
    pub fn complete(
        &self,
        reg: &MetaRegistry,
        req: &ProviderRequest,
    ) -> Result<ProviderResponse, ProviderError> {
        let resp = self.backend.complete(req)?;
        check_response(reg, req, &resp)?;
        Ok(resp)
    }
}

/// The validation wall.
pub fn check_response(
    reg: &MetaRegistry,
    req: &ProviderRequest,
    resp: &ProviderResponse,
) -> Result<(), ProviderError> {
    let bad = |msg: String| Err(ProviderError::malformed(msg));
    match (req.template_id.expects_tools(), resp) {
        (true, ProviderResponse::ToolCall { name, args, .. }) => {
            if !req.tools.iter().any(|t| &t.name == name) {
                return bad(format!("tool `{name}` was not offered"));
            }
            validate_args(reg, name, args)
                .map_err(|e| ProviderError::malformed(format!("arguments for `{name}`: {e}")))
        }
        (true, ProviderResponse::AssistantText { text }) => {
            if text.trim().is_empty() {
                return bad("empty assistant text".into());
            }
            Ok(())
        }
        (true, ProviderResponse::Clarify { question, candidates, needed }) => {
            if question.trim().is_empty() {
                return bad("clarify without a question".into());
            }
            if *needed == Needed::Selection && candidates.is_empty() {
                return bad("selection clarify without candidates".into());
            }
            if let Some(c) = candidates.iter().find(|c| !req.context.knows(c)) {
                return bad(format!("clarify candidate {c} does not exist"));
            }
            Ok(())
        }
        (false, ProviderResponse::Structured { document }) => {
            if !document.is_object() {
                return bad("structured output must be an object".into());
            }
            if let Some(c) = &req.constraints {
                let value = document.get(&c.field).and_then(Value::as_str);
                match value {
                    Some(v) if c.allowed.iter().any(|a| a == v) => {}
                    other => {
                        return bad(format!(
                            "`{}` = {other:?} is not one of {:?}",
                            c.field, c.allowed
                        ))
                    }
                }
            }
            Ok(())
        }
        (_, other) => bad(format!(
            "{} template cannot answer with {}",
            req.template_id.as_str(),
            match other {
                ProviderResponse::ToolCall { .. } => "a tool call",
                ProviderResponse::AssistantText { .. } => "plain text",
                ProviderResponse::Clarify { .. } => "a clarification",
                ProviderResponse::Structured { .. } => "a structured document",
            }
        )),
    }
}

/// Backend selection from the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub base_url: Option<String>,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub offline: bool,
}

pub const DEFAULT_TIMEOUT_SECS: u64 = 30;

impl LlmConfig {
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Self {
        Self {
            base_url: get("TAE_LLM_BASE_URL").filter(|s| !s.is_empty()),
            model: get("TAE_LLM_MODEL").unwrap_or_else(|| "gpt-4o".into()),
            api_key: get("TAE_LLM_API_KEY").filter(|s| !s.is_empty()),
            timeout_secs: get("TAE_LLM_TIMEOUT_SECONDS")
                .and_then(|s| s.parse().ok())
                .unwrap_or(DEFAULT_TIMEOUT_SECS),
            offline: get("TAE_OFFLINE").is_some_and(|v| v == "1"),
        }
    }

    /// Whether agents should talk to a real model.
    pub fn online(&self) -> bool {
        !self.offline && self.base_url.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ProviderErrorKind;
    use crate::catalog::builtin_registry;
    use crate::tools::derive_tools;
    use serde_json::json;

    fn chat_request() -> ProviderRequest {
        let reg = builtin_registry();
        let tools = derive_tools(&reg).into_iter().filter(|t| t.name == "update_clip").collect();
        ProviderRequest::new(TemplateId::IntentComprehension, AgentContext::default()).with_tools(tools)
    }

    #[test]
    fn offered_tool_with_valid_args_passes() {
        let reg = builtin_registry();
        let resp = ProviderResponse::tool_call("update_clip", json!({"id": "clip_00000000", "start": 1.0}));
        assert!(check_response(&reg, &chat_request(), &resp).is_ok());
    }

    #[test]
    fn foreign_tool_or_bad_args_are_malformed() {
        let reg = builtin_registry();
        for resp in [
            ProviderResponse::tool_call("delete_clip", json!({"id": "clip_00000000"})),
            ProviderResponse::tool_call("update_clip", json!({"id": 3})),
            ProviderResponse::Structured { document: json!({}) },
        ] {
            let err = check_response(&reg, &chat_request(), &resp).unwrap_err();
            assert_eq!(err.kind, ProviderErrorKind::MalformedOutput);
        }
    }

    #[test]
    fn constraints_are_enforced() {
        let reg = builtin_registry();
        let req = ProviderRequest::new(TemplateId::ClipStrategy, AgentContext::default())
            .with_constraint("strategy", ["sequential_same_track", "parallel_new_track"]);
        let ok = ProviderResponse::Structured { document: json!({"strategy": "parallel_new_track"}) };
        assert!(check_response(&reg, &req, &ok).is_ok());
        let off = ProviderResponse::Structured { document: json!({"strategy": "4"}) };
        assert!(check_response(&reg, &req, &off).is_err());
    }

    #[test]
    fn config_from_lookup() {
        let c = LlmConfig::from_lookup(|k| match k {
            "TAE_LLM_BASE_URL" => Some("http://x".into()),
            "TAE_LLM_TIMEOUT_SECONDS" => Some("5".into()),
            _ => None,
        });
        assert!(c.online());
        assert_eq!(c.timeout_secs, 5);
        let c = LlmConfig::from_lookup(|k| (k == "TAE_OFFLINE").then(|| "1".into()));
        assert!(!c.online() && c.offline);
        assert_eq!(c.timeout_secs, DEFAULT_TIMEOUT_SECS);
    }
}
