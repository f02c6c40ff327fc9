//! The chat agent: a one-step plan-and-execute loop with approval gates,
//! clarification prompts and element references.
//!
//! A round is split in three so callers can release the project while the
//! model thinks: [`prepare_plan`] builds the request from a snapshot, the
//! caller runs it through a [`Gateway`], and [`apply_plan`] folds the answer
//! back in. [`drive`] does all three in a loop.

pub mod refs;
pub mod suggest;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use refs::{resolve_references, ReferenceToken};
pub use suggest::{rule_instructions, suggest_instructions, MAX_INSTRUCTION_CHARS, MAX_INSTRUCTIONS};

use crate::context::{AgentContext, DialogMessage, Role};
use crate::error::{Error, ProviderError, Result};
use crate::id::{IdKind, ObjectId};
use crate::llm::{Gateway, Needed, ProviderRequest, ProviderResponse, TemplateId};
use crate::meta::{FieldSchema, MetaRegistry};
use crate::model::{AssetKind, ClipPayload, Project};
use crate::tools::{derive_tools, dispatch, validate_args, Actor, DispatchCtx};

/// Tool calls one user message may lead to before the loop gives up.
pub const MAX_STEPS_PER_MESSAGE: usize = 25;
/// Consecutive failed or rejected steps before the session fails.
pub const FAILURE_BUDGET: u32 = 3;
/// Dialog messages carried into each planning request.
pub const DIALOG_WINDOW: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Planning,
    AwaitingApproval,
    AwaitingPromptAnswer,
    Executing,
    Done,
    Failed,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Idle => "idle",
            Self::Planning => "planning",
            Self::AwaitingApproval => "awaiting_approval",
            Self::AwaitingPromptAnswer => "awaiting_prompt_answer",
            Self::Executing => "executing",
            Self::Done => "done",
            Self::Failed => "failed",
        }
    }

    /// States in which a new user message may start a loop.
    pub fn accepts_message(self) -> bool {
        matches!(self, Self::Idle | Self::Done | Self::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Edit,
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Proposed,
    Approved,
    Modified,
    Rejected,
    Executed,
    Failed,
}

/// How a step got past the approval gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approval {
    /// Approved as proposed.
    User,
    /// Approved with edited arguments.
    Modified,
    /// Query step or auto-skip.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub id: ObjectId,
    pub tool: String,
    pub args: Value,
    pub rationale: String,
    pub kind: StepKind,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approval: Option<Approval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorOption {
    pub id: ObjectId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptPayload {
    Selector { options: Vec<SelectorOption> },
    ParameterForm { class: String, fields: Vec<FieldSchema> },
    UploadButton { accepted_kinds: Vec<AssetKind> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UIPrompt {
    pub id: ObjectId,
    pub question: String,
    #[serde(flatten)]
    pub payload: PromptPayload,
    /// Most recent step of the current message, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_step: Option<ObjectId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PlanProposed,
    AwaitingApproval,
    Prompt,
    StepResult,
    AssistantText,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEvent {
    pub seq: u64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: ObjectId,
    pub project_id: ObjectId,
    pub messages: Vec<DialogMessage>,
    pub steps: Vec<PlanStep>,
    pub auto_skip: bool,
    pub pending_prompt: Option<UIPrompt>,
    #[serde(default)]
    pub answered_prompts: Vec<UIPrompt>,
    pub state: SessionState,
    #[serde(default)]
    pub events: Vec<ChatEvent>,
    #[serde(default)]
    pub consecutive_failures: u32,
    /// Steps proposed since the last user message.
    #[serde(default)]
    pub message_steps: usize,
}

impl ChatSession {
    pub fn owns_id(&self, id: &ObjectId) -> bool {
        self.steps.iter().any(|s| &s.id == id) || self.prompts().any(|p| &p.id == id)
    }

    pub fn prompts(&self) -> impl Iterator<Item = &UIPrompt> {
        self.pending_prompt.iter().chain(self.answered_prompts.iter())
    }

    /// The step waiting at the approval gate.
    pub fn proposed_step(&self) -> Option<&PlanStep> {
        self.steps.iter().rev().find(|s| s.status == StepStatus::Proposed)
    }

    pub fn step(&self, id: &ObjectId) -> Option<&PlanStep> {
        self.steps.iter().find(|s| &s.id == id)
    }

    /// Events after `seq`.
    pub fn events_since(&self, seq: u64) -> &[ChatEvent] {
        let start = self.events.partition_point(|e| e.seq <= seq);
        &self.events[start..]
    }

    fn emit(&mut self, out: &mut Vec<ChatEvent>, kind: EventKind, payload: Value) {
        let ev = ChatEvent { seq: self.events.last().map_or(1, |e| e.seq + 1), kind, payload };
        self.events.push(ev.clone());
        out.push(ev);
    }

    fn note(&mut self, role: Role, text: impl Into<String>) {
        self.messages.push(DialogMessage::new(role, text));
    }

    fn expect(&self, state: SessionState) -> Result<()> {
        if self.state != state {
            return Err(Error::WrongState { expected: state.as_str().into(), actual: self.state.as_str().into() });
        }
        Ok(())
    }

    fn fail(&mut self, out: &mut Vec<ChatEvent>, reason: String) {
        self.state = SessionState::Failed;
        self.note(Role::System, format!("Session failed: {reason}"));
        self.emit(out, EventKind::Failed, json!({ "reason": reason }));
    }
}

/// Run `f` with the session taken out of the project, putting it back
/// afterwards whatever happens.
fn with_session<T>(
    p: &mut Project,
    sid: &ObjectId,
    f: impl FnOnce(&mut Project, &mut ChatSession) -> Result<T>,
) -> Result<T> {
    let mut s = p.sessions.remove(sid).ok_or_else(|| Error::UnknownSession(sid.clone()))?;
    let out = f(p, &mut s);
    p.sessions.insert(sid.clone(), s);
    out
}

/// An id unused by the project and by `s`, which is outside it right now.
fn alloc(p: &mut Project, s: &ChatSession, kind: IdKind) -> ObjectId {
    loop {
        let id = p.alloc_id(kind);
        if !s.owns_id(&id) && id != s.id {
            return id;
        }
    }
}

pub fn start_session(p: &mut Project, auto_skip: bool) -> ChatSession {
    let s = ChatSession {
        id: p.alloc_id(IdKind::Sess),
        project_id: p.id.clone(),
        messages: Vec::new(),
        steps: Vec::new(),
        auto_skip,
        pending_prompt: None,
        answered_prompts: Vec::new(),
        state: SessionState::Idle,
        events: Vec::new(),
        consecutive_failures: 0,
        message_steps: 0,
    };
    p.sessions.insert(s.id.clone(), s.clone());
    s
}

pub fn session<'p>(p: &'p Project, sid: &ObjectId) -> Result<&'p ChatSession> {
    p.sessions.get(sid).ok_or_else(|| Error::UnknownSession(sid.clone()))
}

pub fn set_auto_skip(p: &mut Project, sid: &ObjectId, on: bool) -> Result<()> {
    p.sessions.get_mut(sid).ok_or_else(|| Error::UnknownSession(sid.clone()))?.auto_skip = on;
    Ok(())
}

/// Short human description of a live object, for prompts and references.
pub fn describe_object(p: &Project, id: &ObjectId) -> String {
    if let Some(c) = p.clips.get(id) {
        let what = match &c.payload {
            ClipPayload::Text { content, .. } => format!("text clip {content:?}"),
            ClipPayload::Media { asset_ref, .. } => {
                let name = p.assets.get(asset_ref).map_or("?", |a| a.name.as_str());
                format!("media clip of {name:?}")
            }
            ClipPayload::Element { element_kind, .. } => format!("{element_kind} element"),
        };
        let track = p.tracks.get(&c.track_id).map_or("?", |t| t.name.as_str());
        return format!("{what} on {track:?} at {}s-{}s", c.start, c.end());
    }
    if let Some(t) = p.tracks.get(id) {
        return format!("{} track {:?}", t.kind.as_str(), t.name);
    }
    if let Some(a) = p.assets.get(id) {
        return format!("{} asset {:?}", a.kind.as_str(), a.name);
    }
    if let Some(a) = p.animations.get(id) {
        return format!("{} animation ({}) on {}", a.preset, a.phase.as_str(), a.clip_id);
    }
    id.to_string()
}

/// Accept a user message and start planning. Every `@{kind:id}` token must
/// resolve and every attachment must be an asset.
pub fn submit_message(p: &mut Project, sid: &ObjectId, text: &str, attachments: &[ObjectId]) -> Result<Vec<ReferenceToken>> {
    let tokens = resolve_references(text, p);
    with_session(p, sid, |p, s| {
        if !s.state.accepts_message() {
            return Err(Error::SessionBusy);
        }
        if let Some(bad) = tokens.iter().find(|t| t.resolved.is_none()) {
            return Err(Error::DanglingReference(bad.raw.clone()));
        }
        if let Some(bad) = attachments.iter().find(|a| !p.assets.contains_key(a)) {
            return Err(Error::DanglingReference(bad.to_string()));
        }
        s.note(Role::User, text);
        let mut notes: Vec<String> = tokens
            .iter()
            .filter_map(|t| t.resolved.as_ref())
            .map(|id| format!("{id}: {}", describe_object(p, id)))
            .collect();
        notes.extend(attachments.iter().map(|id| format!("attached {id}: {}", describe_object(p, id))));
        if !notes.is_empty() {
            s.note(Role::System, format!("Referenced objects:\n{}", notes.join("\n")));
        }
        s.state = SessionState::Planning;
        s.consecutive_failures = 0;
        s.message_steps = 0;
        Ok(())
    })?;
    Ok(tokens)
}

/// The planning request for a session in `planning`, or `None` when the
/// session is waiting on something else.
pub fn prepare_plan(reg: &MetaRegistry, p: &Project, sid: &ObjectId) -> Result<Option<ProviderRequest>> {
    let s = session(p, sid)?;
    if s.state != SessionState::Planning {
        return Ok(None);
    }
    let skip = s.messages.len().saturating_sub(DIALOG_WINDOW);
    let ctx = AgentContext::from_project(p).with_dialog(s.messages[skip..].to_vec());
    Ok(Some(ProviderRequest::new(TemplateId::IntentComprehension, ctx).with_tools(derive_tools(reg))))
}

fn kind_of(reg: &MetaRegistry, tool: &str) -> StepKind {
    let query = derive_tools(reg).iter().any(|t| t.name == tool && t.is_query());
    if query {
        StepKind::Query
    } else {
        StepKind::Edit
    }
}

/// Fold one planning answer into the session.
pub fn apply_plan(
    reg: &MetaRegistry,
    p: &mut Project,
    sid: &ObjectId,
    response: std::result::Result<ProviderResponse, ProviderError>,
) -> Result<Vec<ChatEvent>> {
    with_session(p, sid, |p, s| {
        s.expect(SessionState::Planning)?;
        let mut out = Vec::new();
        match response {
            Err(e) => s.fail(&mut out, e.to_string()),
            Ok(ProviderResponse::AssistantText { text }) => {
                s.note(Role::Assistant, text.clone());
                s.emit(&mut out, EventKind::AssistantText, json!({ "text": text }));
                s.state = SessionState::Done;
                s.emit(&mut out, EventKind::Completed, json!({}));
            }
            Ok(ProviderResponse::ToolCall { name, args, rationale }) => {
                if let Err(e) = validate_args(reg, &name, &args) {
                    s.fail(&mut out, format!("model proposed an invalid call to {name}: {e}"));
                    return Ok(out);
                }
                if s.message_steps >= MAX_STEPS_PER_MESSAGE {
                    s.fail(&mut out, format!("step budget of {MAX_STEPS_PER_MESSAGE} exhausted"));
                    return Ok(out);
                }
                let kind = kind_of(reg, &name);
                let rationale = rationale.filter(|r| !r.trim().is_empty()).unwrap_or_else(|| {
                    let desc = derive_tools(reg).into_iter().find(|t| t.name == name).map(|t| t.description);
                    format!("Call {name}: {}", desc.unwrap_or_default())
                });
                let step = PlanStep {
                    id: alloc(p, s, IdKind::Step),
                    tool: name,
                    args,
                    rationale,
                    kind,
                    status: StepStatus::Proposed,
                    approval: None,
                    result: None,
                    error: None,
                };
                s.message_steps += 1;
                s.note(Role::Assistant, format!("Proposed step {}: {} {}", step.id, step.tool, step.args));
                s.emit(&mut out, EventKind::PlanProposed, json!({ "step": step }));
                let id = step.id.clone();
                s.steps.push(step);
                if kind == StepKind::Query || s.auto_skip {
                    execute(reg, p, s, &mut out, Approval::Auto);
                } else {
                    s.state = SessionState::AwaitingApproval;
                    s.emit(&mut out, EventKind::AwaitingApproval, json!({ "step_id": id }));
                }
            }
            Ok(ProviderResponse::Clarify { question, candidates, needed }) => {
                let payload = match prompt_payload(reg, p, &candidates, needed) {
                    Ok(pl) => pl,
                    Err(reason) => {
                        s.fail(&mut out, reason);
                        return Ok(out);
                    }
                };
                let prompt = UIPrompt {
                    id: alloc(p, s, IdKind::Prompt),
                    question: question.clone(),
                    payload,
                    bound_step: s.steps.last().filter(|_| s.message_steps > 0).map(|x| x.id.clone()),
                };
                s.note(Role::Assistant, question);
                s.emit(&mut out, EventKind::Prompt, json!({ "prompt": prompt }));
                s.pending_prompt = Some(prompt);
                s.state = SessionState::AwaitingPromptAnswer;
            }
            Ok(ProviderResponse::Structured { .. }) => {
                s.fail(&mut out, "model answered with a document instead of a tool call".into())
            }
        }
        Ok(out)
    })
}

fn class_of(p: &Project, id: &ObjectId) -> Option<String> {
    match id.kind() {
        IdKind::Clip => Some(crate::catalog::CLIP.into()),
        IdKind::Track => Some(crate::catalog::TRACK.into()),
        IdKind::Asset => Some(crate::catalog::ASSET.into()),
        IdKind::Anim => p.animations.get(id).map(|a| a.preset.0.clone()),
        _ => None,
    }
}

fn prompt_payload(
    reg: &MetaRegistry,
    p: &Project,
    candidates: &[ObjectId],
    needed: Needed,
) -> std::result::Result<PromptPayload, String> {
    if let Some(gone) = candidates.iter().find(|c| !refs::is_live(p, c)) {
        return Err(format!("clarification names {gone}, which no longer exists"));
    }
    Ok(match needed {
        Needed::Selection => {
            if candidates.is_empty() {
                return Err("selection prompt without options".into());
            }
            PromptPayload::Selector {
                options: candidates
                    .iter()
                    .map(|id| SelectorOption { id: id.clone(), label: describe_object(p, id) })
                    .collect(),
            }
        }
        Needed::Parameters => {
            let class = candidates
                .first()
                .and_then(|c| class_of(p, c))
                .unwrap_or_else(|| crate::catalog::CLIP.to_string());
            let schema = reg.reflect_schema(&class).map_err(|e| e.to_string())?;
            PromptPayload::ParameterForm { class, fields: schema.fields }
        }
        Needed::Upload => PromptPayload::UploadButton {
            accepted_kinds: vec![AssetKind::Image, AssetKind::Audio, AssetKind::Video],
        },
    })
}

fn execute(reg: &MetaRegistry, p: &mut Project, s: &mut ChatSession, out: &mut Vec<ChatEvent>, how: Approval) {
    s.state = SessionState::Executing;
    let step = s.steps.iter_mut().rev().find(|x| x.status == StepStatus::Proposed).expect("a proposed step");
    step.approval = Some(how);
    step.status = if how == Approval::Modified { StepStatus::Modified } else { StepStatus::Approved };
    let ctx = DispatchCtx { actor: Actor::ChatAgent, step_id: Some(step.id.clone()) };
    let result = dispatch(reg, p, &ctx, &step.tool, &step.args);
    let (note, payload) = match result {
        Ok(v) => {
            step.status = StepStatus::Executed;
            step.result = Some(v.clone());
            (
                format!("Step {} ({}) succeeded: {}", step.id, step.tool, clip_text(&v.to_string(), 2000)),
                json!({ "step_id": step.id, "status": step.status, "result": v }),
            )
        }
        Err(e) => {
            step.status = StepStatus::Failed;
            step.error = Some(format!("{}: {e}", e.code()));
            (
                format!("Step {} ({}) failed with {}: {e}", step.id, step.tool, e.code()),
                json!({ "step_id": step.id, "status": step.status, "error": { "code": e.code(), "message": e.to_string() } }),
            )
        }
    };
    let failed = step.status == StepStatus::Failed;
    s.note(Role::System, note);
    s.emit(out, EventKind::StepResult, payload);
    if failed {
        s.consecutive_failures += 1;
    } else {
        s.consecutive_failures = 0;
    }
    after_step(s, out);
}

fn after_step(s: &mut ChatSession, out: &mut Vec<ChatEvent>) {
    if s.consecutive_failures >= FAILURE_BUDGET {
        s.fail(out, format!("{FAILURE_BUDGET} consecutive steps failed or were rejected"));
    } else {
        s.state = SessionState::Planning;
    }
}

fn clip_text(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(max).collect();
        t.push('…');
        t
    }
}

pub fn approve_step(reg: &MetaRegistry, p: &mut Project, sid: &ObjectId) -> Result<Vec<ChatEvent>> {
    with_session(p, sid, |p, s| {
        s.expect(SessionState::AwaitingApproval)?;
        let mut out = Vec::new();
        execute(reg, p, s, &mut out, Approval::User);
        Ok(out)
    })
}

/// Replace the proposed step's arguments and run it. Invalid arguments
/// leave the step waiting.
pub fn modify_step(reg: &MetaRegistry, p: &mut Project, sid: &ObjectId, new_args: Value) -> Result<Vec<ChatEvent>> {
    with_session(p, sid, |p, s| {
        s.expect(SessionState::AwaitingApproval)?;
        let step = s.steps.iter_mut().rev().find(|x| x.status == StepStatus::Proposed).expect("a proposed step");
        validate_args(reg, &step.tool, &new_args)?;
        step.args = new_args;
        let mut out = Vec::new();
        execute(reg, p, s, &mut out, Approval::Modified);
        Ok(out)
    })
}

pub fn reject_step(p: &mut Project, sid: &ObjectId, reason: Option<&str>) -> Result<Vec<ChatEvent>> {
    with_session(p, sid, |_, s| {
        s.expect(SessionState::AwaitingApproval)?;
        let step = s.steps.iter_mut().rev().find(|x| x.status == StepStatus::Proposed).expect("a proposed step");
        step.status = StepStatus::Rejected;
        let mut note = format!("The user rejected step {} ({} {}).", step.id, step.tool, step.args);
        if let Some(r) = reason.filter(|r| !r.trim().is_empty()) {
            note.push_str(&format!(" Reason: {r}"));
        }
        let payload = json!({ "step_id": step.id, "status": step.status });
        let mut out = Vec::new();
        s.note(Role::System, note);
        s.emit(&mut out, EventKind::StepResult, payload);
        s.consecutive_failures += 1;
        after_step(s, &mut out);
        Ok(out)
    })
}

/// Answer the pending prompt: an option id for selectors, an object of field
/// values for forms, an asset id for uploads.
pub fn answer_prompt(reg: &MetaRegistry, p: &mut Project, sid: &ObjectId, answer: &Value) -> Result<()> {
    with_session(p, sid, |p, s| {
        s.expect(SessionState::AwaitingPromptAnswer)?;
        let prompt = s.pending_prompt.clone().expect("awaiting an answer");
        let invalid = |m: String| Error::InvalidAnswer(m);
        let note = match &prompt.payload {
            PromptPayload::Selector { options } => {
                let picked = answer
                    .as_str()
                    .and_then(|a| options.iter().find(|o| o.id.as_str() == a))
                    .ok_or_else(|| invalid(format!("{answer} is not one of the offered options")))?;
                format!("Selected {}: {}", picked.id, picked.label)
            }
            PromptPayload::ParameterForm { class, fields } => {
                let obj = answer.as_object().filter(|o| !o.is_empty()).ok_or_else(|| invalid("expected field values".into()))?;
                let def = reg.get(class)?;
                for (k, v) in obj {
                    if !fields.iter().any(|f| &f.name == k) {
                        return Err(invalid(format!("`{k}` is not a field of the form")));
                    }
                    let f = def.field(k).ok_or_else(|| invalid(format!("`{k}` is not a field of {class}")))?;
                    f.parse_json(v).map_err(|e| invalid(format!("`{k}`: {}", e.into_error(k))))?;
                }
                format!("Provided values for {class}: {answer}")
            }
            PromptPayload::UploadButton { accepted_kinds } => {
                let asset = answer
                    .as_str()
                    .and_then(|a| a.parse::<ObjectId>().ok())
                    .and_then(|id| p.assets.get(&id))
                    .ok_or_else(|| invalid(format!("{answer} is not an uploaded asset")))?;
                if !accepted_kinds.contains(&asset.kind) {
                    return Err(invalid(format!("{} assets are not accepted here", asset.kind.as_str())));
                }
                format!("Uploaded {}: {}", asset.id, describe_object(p, &asset.id))
            }
        };
        s.note(Role::User, format!("Answer to \"{}\": {note}", prompt.question));
        s.answered_prompts.push(prompt);
        s.pending_prompt = None;
        s.state = SessionState::Planning;
        Ok(())
    })
}

/// Plan until the session needs the user or stops.
pub fn drive(gw: &Gateway, reg: &MetaRegistry, p: &mut Project, sid: &ObjectId) -> Result<Vec<ChatEvent>> {
    let mut out = Vec::new();
    while let Some(req) = prepare_plan(reg, p, sid)? {
        let resp = gw.complete(reg, &req);
        out.extend(apply_plan(reg, p, sid, resp)?);
    }
    Ok(out)
}
