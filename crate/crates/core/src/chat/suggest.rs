//! Context-aware instruction suggestions for the chat box.

use serde_json::Value;

use crate::agents::{pending, Agents};
use crate::context::AgentContext;
use crate::llm::{ProviderRequest, ProviderResponse, TemplateId};
use crate::meta::MetaRegistry;
use crate::model::{ClipPayload, Project, TrackKind};
use crate::tools::Outcome;

pub const MAX_INSTRUCTIONS: usize = 5;
pub const MAX_INSTRUCTION_CHARS: usize = 120;

fn fit(s: String) -> String {
    if s.chars().count() <= MAX_INSTRUCTION_CHARS {
        return s;
    }
    let mut t: String = s.chars().take(MAX_INSTRUCTION_CHARS - 3).collect();
    t.push_str("...");
    t
}

/// The fixed rule table, first match first.
pub fn rule_instructions(p: &Project) -> Vec<String> {
    let text_clips: Vec<_> = p.clips.values().filter(|c| c.text().is_some()).collect();
    let mut out = Vec::new();
    if text_clips.is_empty() {
        out.push("Create a draft from the script: one text clip per line".to_string());
    }
    let bare = text_clips.iter().filter(|c| p.animations_of(&c.id).next().is_none()).count();
    if bare > 0 {
        let lines = if bare == 1 { "line" } else { "lines" };
        out.push(format!("Add entrance animations to the {bare} {lines} without one"));
    }
    let waiting = pending(p).len();
    if waiting > 0 {
        out.push(format!("Review the {waiting} pending suggestions in the script"));
    }
    let used = |id| p.clips.values().any(|c| matches!(&c.payload, ClipPayload::Media { asset_ref, .. } if asset_ref == id));
    if let Some(a) = p.assets.values().find(|a| !used(&a.id)) {
        out.push(format!("Place the asset \"{}\" on the timeline", a.name));
    }
    let backdrop = p.tracks.values().any(|t| matches!(t.kind, TrackKind::Image | TrackKind::Video));
    if !text_clips.is_empty() && !backdrop {
        out.push("Add a background image or video behind the text".to_string());
    }
    if let Some(e) = p.operation_log.last().filter(|e| e.outcome == Outcome::Error) {
        out.push(format!("Retry the last failed edit ({})", e.tool));
    }
    out.push("Preview the timeline and adjust clip timing".to_string());
    out.into_iter().take(MAX_INSTRUCTIONS).map(fit).collect()
}

fn parse(doc: &Value) -> Option<Vec<String>> {
    let items = doc["suggestions"].as_array()?;
    if items.is_empty() || items.len() > MAX_INSTRUCTIONS {
        return None;
    }
    items
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::trim)
                .filter(|s| !s.is_empty() && s.chars().count() <= MAX_INSTRUCTION_CHARS)
                .map(String::from)
        })
        .collect()
}

/// Suggestions for what to ask next. Model failures fall back to the rules.
pub fn suggest_instructions(agents: &Agents, reg: &MetaRegistry, p: &Project) -> Vec<String> {
    let Some(gw) = agents.gateway() else { return rule_instructions(p) };
    let req = ProviderRequest::new(TemplateId::InstructionSuggestions, AgentContext::from_project(p));
    match gw.complete(reg, &req) {
        Ok(ProviderResponse::Structured { document }) => parse(&document).unwrap_or_else(|| {
            tracing::warn!("instruction suggestions out of shape, using rules");
            rule_instructions(p)
        }),
        Ok(_) => rule_instructions(p),
        Err(e) => {
            tracing::warn!(error = %e, "instruction suggestions failed, using rules");
            rule_instructions(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use serde_json::json;

    use super::*;
    use crate::catalog::builtin_registry;
    use crate::llm::{Gateway, MockProvider};

    #[test]
    fn empty_project_asks_for_a_draft() {
        let p = Project::new("s", 2);
        let s = rule_instructions(&p);
        assert!(s.iter().any(|x| x.contains("draft")));
        assert!(!s.is_empty() && s.len() <= MAX_INSTRUCTIONS);
        assert!(s.iter().all(|x| x.chars().count() <= MAX_INSTRUCTION_CHARS));
        assert_eq!(s, rule_instructions(&p));
    }

    #[test]
    fn long_asset_names_are_cut() {
        let mut p = Project::new("s", 2);
        p.add_asset(crate::model::AssetKind::Image, "x".repeat(300), "", None).unwrap();
        assert!(rule_instructions(&p).iter().all(|x| x.chars().count() <= MAX_INSTRUCTION_CHARS));
    }

    #[test]
    fn llm_mode_uses_model_or_falls_back() {
        let reg = builtin_registry();
        let p = Project::new("s", 2);
        let ok = ProviderResponse::Structured { document: json!({"suggestions": ["Add a title"]}) };
        let bad = ProviderResponse::Structured { document: json!({"suggestions": [1]}) };
        let agents = Agents::llm(Gateway::new(Arc::new(MockProvider::new([ok, bad]))));
        assert_eq!(suggest_instructions(&agents, &reg, &p), vec!["Add a title".to_string()]);
        assert_eq!(suggest_instructions(&agents, &reg, &p), rule_instructions(&p));
        // script exhausted: provider error, still rules
        assert_eq!(suggest_instructions(&agents, &reg, &p), rule_instructions(&p));
    }
}
