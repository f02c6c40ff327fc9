//! Inline agents: text revision suggester, animation recommender and clip
//! placement strategist. Suggestions are inert until accepted.

pub mod placement;
pub mod semantics;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub use placement::propose_clip_placement;
pub use semantics::{analyze_semantics, map_to_directive, AnimationDirective, CharRange, SemanticFeatures, Tone};

use crate::context::AgentContext;
use crate::error::{Error, ProviderError, Result};
use crate::id::{IdKind, ObjectId};
use crate::llm::{Gateway, ProviderRequest, ProviderResponse, TemplateId};
use crate::meta::{Category, FieldMap, FieldValue, MetaRegistry};
use crate::model::{Clip, Phase, Project};
use crate::timeline::presets;
use crate::tools::{dispatch, tool_name, validate_args, Actor, DispatchCtx, Verb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    TextRevision,
    AnimationRecommendation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionStatus {
    Pending,
    Accepted,
    Dismissed,
    /// The target clip changed before the suggestion was accepted.
    Stale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionTarget {
    pub clip_id: ObjectId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_range: Option<CharRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SuggestionAction {
    /// Replace the target range (or the whole line) with `replacement`.
    ReplaceText { replacement: String },
    /// Attach `preset` with these tool arguments.
    AttachAnimation { preset: String, params: Map<String, Value>, phase: Phase },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: ObjectId,
    pub kind: SuggestionKind,
    pub target: SuggestionTarget,
    pub action: SuggestionAction,
    pub reason: String,
    pub status: SuggestionStatus,
    /// The target clip as it was when the suggestion was made.
    pub basis: Clip,
    pub created_revision: u64,
}

impl Suggestion {
    /// The tool call that accepting this suggestion performs.
    pub fn tool_call(&self) -> (String, Value) {
        match &self.action {
            SuggestionAction::ReplaceText { replacement } => {
                let text = self.basis.text().unwrap_or_default();
                let content = match self.target.char_range {
                    Some(r) => replace_chars(text, r, replacement),
                    None => replacement.clone(),
                };
                ("update_clip".into(), json!({ "id": self.target.clip_id, "content": content }))
            }
            SuggestionAction::AttachAnimation { preset, params, phase } => {
                let mut args = params.clone();
                args.insert("clip_id".into(), json!(self.target.clip_id));
                args.insert("phase".into(), json!(phase));
                (tool_name(Verb::Create, preset, false), Value::Object(args))
            }
        }
    }
}

pub(crate) fn replace_chars(text: &str, r: CharRange, replacement: &str) -> String {
    let mut out: String = text.chars().take(r.start).collect();
    out.push_str(replacement);
    out.extend(text.chars().skip(r.end));
    out
}

/// Where inline agents get their answers: fixed rules, or a language model.
#[derive(Debug, Clone, Default)]
pub struct Agents {
    gateway: Option<Gateway>,
}

impl Agents {
    pub fn rule() -> Self {
        Self { gateway: None }
    }

    pub fn llm(gateway: Gateway) -> Self {
        Self { gateway: Some(gateway) }
    }

    pub fn gateway(&self) -> Option<&Gateway> {
        self.gateway.as_ref()
    }

    pub fn is_rule_mode(&self) -> bool {
        self.gateway.is_none()
    }
}

fn text_clip<'p>(p: &'p Project, clip: &ObjectId) -> Result<(&'p Clip, &'p str)> {
    let c = p.clip(clip)?;
    let text = c.text().ok_or_else(|| Error::NotTextClip(clip.clone()))?;
    Ok((c, text))
}

fn line_context(p: &Project, clip: &Clip, text: &str) -> AgentContext {
    AgentContext::from_project(p).with_focus(format!("line {}: {text:?}", clip.id))
}

/// A suggestion proposal before it receives an id.
struct Draft {
    kind: SuggestionKind,
    char_range: Option<CharRange>,
    action: SuggestionAction,
    reason: String,
}

/// Store drafts as pending suggestions, replacing earlier pending ones of the
/// same kind on the clip. Does not change the revision.
fn commit(p: &mut Project, clip: &Clip, kind: SuggestionKind, drafts: Vec<Draft>) -> Vec<Suggestion> {
    p.suggestions
        .retain(|_, s| !(s.target.clip_id == clip.id && s.kind == kind && s.status == SuggestionStatus::Pending));
    let mut out = Vec::new();
    for d in drafts {
        assert!(!d.reason.trim().is_empty(), "suggestion without a reason");
        let s = Suggestion {
            id: p.alloc_id(IdKind::Sugg),
            kind: d.kind,
            target: SuggestionTarget { clip_id: clip.id.clone(), char_range: d.char_range },
            action: d.action,
            reason: d.reason,
            status: SuggestionStatus::Pending,
            basis: clip.clone(),
            created_revision: p.revision,
        };
        p.suggestions.insert(s.id.clone(), s.clone());
        out.push(s);
    }
    out
}

/// Rule-mode revisions: a small deterministic linter.
pub fn lint_line(text: &str) -> Vec<(CharRange, String, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut found: Vec<(CharRange, String, String)> = Vec::new();
    let push = |r: CharRange, rep: String, why: String, found: &mut Vec<(CharRange, String, String)>| {
        if !found.iter().any(|(o, _, _)| o.overlaps(&r) || *o == r) {
            found.push((r, rep, why));
        }
    };
    let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
    if lead > 0 && lead < chars.len() {
        push(CharRange::new(0, lead), String::new(), "Remove leading whitespace".into(), &mut found);
    }
    let trail = chars.iter().rev().take_while(|c| c.is_whitespace()).count();
    if trail > 0 && trail < chars.len() {
        let n = chars.len();
        push(CharRange::new(n - trail, n), String::new(), "Remove trailing whitespace".into(), &mut found);
    }
    let mut i = lead;
    while i < chars.len() - trail.min(chars.len()) {
        if chars[i] == ' ' {
            let j = (i..chars.len()).find(|&j| chars[j] != ' ').unwrap_or(chars.len());
            if j - i > 1 && j < chars.len() - trail {
                push(CharRange::new(i, j), " ".into(), "Collapse repeated spaces".into(), &mut found);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    // repeated words: "the the"
    let mut words: Vec<(usize, usize)> = Vec::new();
    let mut s = None;
    for (k, c) in chars.iter().enumerate().chain(std::iter::once((chars.len(), &' '))) {
        match (s, c.is_alphanumeric() || *c == '\'') {
            (None, true) => s = Some(k),
            (Some(a), false) => {
                words.push((a, k));
                s = None;
            }
            _ => {}
        }
    }
    let word = |w: (usize, usize)| chars[w.0..w.1].iter().collect::<String>().to_lowercase();
    for pair in words.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let gap = &chars[a.1..b.0];
        if word(a) == word(b) && gap.iter().all(|c| c.is_whitespace()) {
            let w: String = chars[a.0..a.1].iter().collect();
            push(CharRange::new(a.1, b.1), String::new(), format!("Remove the repeated word \"{w}\""), &mut found);
        }
    }
    if let Some(&(a, _)) = words.first() {
        if chars[a].is_lowercase() && a == lead {
            let up: String = chars[a].to_uppercase().collect();
            push(CharRange::new(a, a + 1), up, "Capitalize the first word of the line".into(), &mut found);
        }
    }
    found.sort_by_key(|(r, _, _)| *r);
    found
}

fn parse_revisions(doc: &Value, len: usize) -> Result<Vec<Draft>, ProviderError> {
    let bad = |m: &str| ProviderError::malformed(m.to_string());
    let items = doc["suggestions"].as_array().ok_or_else(|| bad("expected a `suggestions` array"))?;
    let mut out = Vec::new();
    for it in items {
        let replacement = it["replacement"].as_str().ok_or_else(|| bad("suggestion without `replacement` text"))?;
        let reason = it["reason"].as_str().filter(|r| !r.trim().is_empty()).ok_or_else(|| bad("suggestion without a reason"))?;
        let char_range = match &it["char_range"] {
            Value::Null => None,
            v => {
                let r: [usize; 2] = serde_json::from_value(v.clone()).map_err(|_| bad("`char_range` must be [start, end]"))?;
                let r = CharRange::new(r[0], r[1]);
                if !r.is_within(len) {
                    return Err(bad("`char_range` lies outside the line"));
                }
                Some(r)
            }
        };
        out.push(Draft {
            kind: SuggestionKind::TextRevision,
            char_range,
            action: SuggestionAction::ReplaceText { replacement: replacement.to_string() },
            reason: reason.to_string(),
        });
    }
    Ok(out)
}

/// Propose revisions of one script line and store them as pending.
pub fn suggest_text_revisions(agents: &Agents, reg: &MetaRegistry, p: &mut Project, clip: &ObjectId) -> Result<Vec<Suggestion>> {
    let (c, text) = text_clip(p, clip)?;
    let (c, text) = (c.clone(), text.to_string());
    let drafts = match agents.gateway() {
        None => lint_line(&text)
            .into_iter()
            .map(|(r, rep, why)| Draft {
                kind: SuggestionKind::TextRevision,
                char_range: Some(r),
                action: SuggestionAction::ReplaceText { replacement: rep },
                reason: why,
            })
            .collect(),
        Some(gw) => {
            let req = ProviderRequest::new(TemplateId::TextRefinement, line_context(p, &c, &text));
            match gw.complete(reg, &req)? {
                ProviderResponse::Structured { document } => parse_revisions(&document, text.chars().count())?,
                _ => return Err(ProviderError::malformed("expected a structured document").into()),
            }
        }
    };
    Ok(commit(p, &c, SuggestionKind::TextRevision, drafts))
}

/// Complete tool arguments for attaching `preset` with `overrides`.
fn animation_params(reg: &MetaRegistry, preset: &str, overrides: &FieldMap) -> Result<Map<String, Value>> {
    let fields = reg.resolve_fields(preset, overrides)?;
    Ok(fields.into_iter().map(|(k, v)| (k, v.to_json())).collect())
}

fn is_animation(reg: &MetaRegistry, preset: &str) -> bool {
    reg.get(preset).is_ok_and(|c| c.category == Category::AnimationEffect)
}

/// Recommend one animation for a line and store it as pending.
pub fn recommend_animation(agents: &Agents, reg: &MetaRegistry, p: &mut Project, clip: &ObjectId) -> Result<Suggestion> {
    let (c, text) = text_clip(p, clip)?;
    let (c, text) = (c.clone(), text.to_string());
    let draft = match agents.gateway() {
        None => {
            let f = analyze_semantics(&text);
            let d = map_to_directive(&f);
            let preset = d.dynamic.preset_category.clone();
            let speed = (d.dynamic.velocity_scale * 1000.0).round() / 1000.0;
            let mut overrides = FieldMap::new();
            overrides.insert("speed".into(), FieldValue::Number(speed));
            let params = animation_params(reg, &preset, &overrides)?;
            let phase = presets::natural_phase(&preset).unwrap_or(Phase::Enter);
            Draft {
                kind: SuggestionKind::AnimationRecommendation,
                char_range: None,
                reason: format!(
                    "{} tone with importance {:.2}: {preset} ({}) at speed {speed}",
                    f.tone.as_str(),
                    f.importance,
                    presets::description(&preset).unwrap_or("preset"),
                ),
                action: SuggestionAction::AttachAnimation { preset, params, phase },
            }
        }
        Some(gw) => {
            let req = ProviderRequest::new(TemplateId::SemanticMatching, line_context(p, &c, &text));
            let doc = match gw.complete(reg, &req)? {
                ProviderResponse::Structured { document } => document,
                _ => return Err(ProviderError::malformed("expected a structured document").into()),
            };
            let preset = doc["preset"].as_str().ok_or_else(|| ProviderError::malformed("missing `preset`"))?;
            if !is_animation(reg, preset) {
                return Err(Error::UnknownPreset(preset.to_string()));
            }
            let reason = doc["reason"]
                .as_str()
                .filter(|r| !r.trim().is_empty())
                .ok_or_else(|| ProviderError::malformed("recommendation without a reason"))?;
            let phase = match &doc["phase"] {
                Value::Null => presets::natural_phase(preset).unwrap_or(Phase::Enter),
                v => serde_json::from_value(v.clone()).map_err(|_| ProviderError::malformed("bad `phase`"))?,
            };
            let given = match &doc["params"] {
                Value::Null => Map::new(),
                Value::Object(m) => m.clone(),
                _ => return Err(ProviderError::malformed("`params` must be an object").into()),
            };
            let mut probe = given.clone();
            probe.insert("clip_id".into(), json!(c.id));
            validate_args(reg, &tool_name(Verb::Create, preset, false), &Value::Object(probe))
                .map_err(|e| ProviderError::malformed(format!("animation params: {e}")))?;
            let class = reg.get(preset)?;
            let mut overrides = FieldMap::new();
            for (k, v) in &given {
                let f = class.field(k).expect("validated above");
                overrides.insert(k.clone(), f.parse_json(v).map_err(|e| e.into_error(k))?);
            }
            Draft {
                kind: SuggestionKind::AnimationRecommendation,
                char_range: None,
                reason: reason.to_string(),
                action: SuggestionAction::AttachAnimation {
                    preset: preset.to_string(),
                    params: animation_params(reg, preset, &overrides)?,
                    phase,
                },
            }
        }
    };
    let mut out = commit(p, &c, SuggestionKind::AnimationRecommendation, vec![draft]);
    Ok(out.pop().expect("one draft"))
}

pub fn pending(p: &Project) -> Vec<&Suggestion> {
    p.suggestions.values().filter(|s| s.status == SuggestionStatus::Pending).collect()
}

/// Mark pending suggestions whose clip changed as stale. Returns their ids.
pub fn mark_stale(p: &mut Project) -> Vec<ObjectId> {
    let clips = &p.clips;
    let mut out = Vec::new();
    for s in p.suggestions.values_mut() {
        if s.status == SuggestionStatus::Pending && clips.get(&s.target.clip_id) != Some(&s.basis) {
            s.status = SuggestionStatus::Stale;
            out.push(s.id.clone());
        }
    }
    out
}

fn pending_suggestion<'p>(p: &'p Project, id: &ObjectId) -> Result<&'p Suggestion> {
    let s = p.suggestions.get(id).ok_or_else(|| Error::UnknownSuggestion(id.clone()))?;
    if s.status != SuggestionStatus::Pending {
        return Err(Error::SuggestionNotPending(id.clone()));
    }
    Ok(s)
}

/// Apply a pending suggestion through tool dispatch.
pub fn accept_suggestion(reg: &MetaRegistry, p: &mut Project, id: &ObjectId) -> Result<Value> {
    let s = pending_suggestion(p, id)?;
    if p.clips.get(&s.target.clip_id) != Some(&s.basis) {
        p.suggestions.get_mut(id).expect("looked up").status = SuggestionStatus::Stale;
        return Err(Error::StaleSuggestion(id.clone()));
    }
    let (tool, args) = s.tool_call();
    let out = dispatch(reg, p, &DispatchCtx::new(Actor::InlineAgent), &tool, &args)?;
    p.suggestions.get_mut(id).expect("looked up").status = SuggestionStatus::Accepted;
    mark_stale(p);
    Ok(out)
}

pub fn dismiss_suggestion(p: &mut Project, id: &ObjectId) -> Result<()> {
    pending_suggestion(p, id)?;
    p.suggestions.get_mut(id).expect("looked up").status = SuggestionStatus::Dismissed;
    Ok(())
}
