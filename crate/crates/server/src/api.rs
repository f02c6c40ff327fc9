//! HTTP routes. Each endpoint maps onto one engine operation.

use std::collections::{BTreeSet, VecDeque};
use std::convert::Infallible;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, patch, post, put};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tae_core::agents::{self, Suggestion};
use tae_core::chat::{self, ChatEvent, ChatSession};
use tae_core::meta::{Category, FieldMap, ParameterSchema};
use tae_core::model::{Asset, AssetKind, Canvas, Clip, ClipPayload, Phase, StyleDelta, TextStyle, TrackKind};
use tae_core::persist::{from_document, to_document};
use tae_core::script::{self, Anchor, PlacementStrategy, ScriptDelta, ScriptDocument};
use tae_core::timeline::{self, eval};
use tae_core::tools::{self, derive_tools, record_operation, DispatchCtx, OperationLogEntry, ToolDescriptor, Verb};
use tae_core::{Error, ObjectId, Project, Result, Time};
use tokio::sync::broadcast::error::RecvError;

use crate::error::ApiResult;
use crate::state::{AppState, Event};

type Body<T> = std::result::Result<Json<T>, JsonRejection>;
type Q<T> = std::result::Result<Query<T>, QueryRejection>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tools", get(list_tools))
        .route("/classes", get(list_classes))
        .route("/classes/{name}/schema", get(class_schema))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{pid}", get(get_project).put(put_project).delete(delete_project))
        .route("/projects/{pid}/events", get(project_events))
        .route("/projects/{pid}/tools/{tool}", post(call_tool))
        .route("/projects/{pid}/tracks", post(create_track))
        .route("/projects/{pid}/tracks/{tid}", patch(update_track).delete(delete_track))
        .route("/projects/{pid}/clips", post(create_clip))
        .route("/projects/{pid}/clips/merge", post(merge_clips))
        .route("/projects/{pid}/clips/{cid}", get(get_clip).patch(update_clip).delete(delete_clip))
        .route("/projects/{pid}/clips/{cid}/split", post(split_clip))
        .route("/projects/{pid}/clips/{cid}/state", get(clip_state))
        .route("/projects/{pid}/clips/{cid}/animations", post(attach_animation))
        .route("/projects/{pid}/animations/{aid}", patch(update_animation).delete(detach_animation))
        .route("/projects/{pid}/frame", get(frame))
        .route("/projects/{pid}/script", get(get_script))
        .route("/projects/{pid}/script/tracks", put(set_script_tracks))
        .route("/projects/{pid}/script/lines", post(add_line))
        .route("/projects/{pid}/script/lines/merge", post(merge_lines))
        .route("/projects/{pid}/script/lines/{cid}", put(edit_line))
        .route("/projects/{pid}/script/lines/{cid}/split", post(split_line))
        .route("/projects/{pid}/script/style", post(style_batch))
        .route("/projects/{pid}/suggestions", get(pending_suggestions))
        .route("/projects/{pid}/suggestions/refresh", post(refresh_suggestions))
        .route("/projects/{pid}/suggestions/{sid}/accept", post(accept_suggestion))
        .route("/projects/{pid}/suggestions/{sid}/dismiss", post(dismiss_suggestion))
        .route("/projects/{pid}/chat", post(create_session))
        .route("/projects/{pid}/chat/instructions", get(instructions))
        .route("/projects/{pid}/chat/references", get(references))
        .route("/projects/{pid}/chat/{sid}", get(get_session))
        .route("/projects/{pid}/chat/{sid}/auto_skip", put(set_auto_skip))
        .route("/projects/{pid}/chat/{sid}/messages", post(post_message))
        .route("/projects/{pid}/chat/{sid}/approve", post(approve_step))
        .route("/projects/{pid}/chat/{sid}/modify", post(modify_step))
        .route("/projects/{pid}/chat/{sid}/reject", post(reject_step))
        .route("/projects/{pid}/chat/{sid}/answer", post(answer_prompt))
        .route("/projects/{pid}/chat/{sid}/events", get(chat_events))
        .route("/projects/{pid}/assets", get(list_assets).post(upload_asset))
        .route("/projects/{pid}/assets/{aid}", get(asset_content).delete(delete_asset))
        .layer(DefaultBodyLimit::max(256 * 1024 * 1024))
        .with_state(state)
}

fn oid(s: &str) -> Result<ObjectId> {
    s.parse().map_err(|_| Error::SchemaViolation(format!("malformed id `{s}`")))
}

/// Run a direct edit and record it in the operation log.
fn logged<T>(p: &mut Project, op: &str, args: &impl Serialize, f: impl FnOnce(&mut Project) -> Result<T>) -> Result<T> {
    let r = f(p);
    let args = serde_json::to_value(args).unwrap_or(Value::Null);
    record_operation(p, &DispatchCtx::user(), op, &args, &r);
    r
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_tools(State(st): State<AppState>) -> Json<Vec<ToolDescriptor>> {
    Json(derive_tools(&st.reg))
}

async fn list_classes(State(st): State<AppState>) -> Json<Vec<Value>> {
    Json(st.reg.classes().map(|c| json!({ "name": c.name, "category": c.category })).collect())
}

async fn class_schema(State(st): State<AppState>, Path(name): Path<String>) -> ApiResult<Json<ParameterSchema>> {
    Ok(Json(st.reg.reflect_schema(&name)?))
}

// projects

#[derive(Debug, Deserialize)]
struct NewProject {
    name: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    fps: Option<u32>,
    #[serde(default)]
    canvas: Option<Canvas>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: ObjectId,
    pub name: String,
    pub revision: u64,
}

async fn create_project(State(st): State<AppState>, body: Body<NewProject>) -> ApiResult<(StatusCode, Json<Value>)> {
    let body = body?.0;
    let mut seed = body.seed.unwrap_or_else(|| {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64)
    });
    let mut p = Project::new(body.name.clone(), seed);
    while st.exists(&p.id) {
        seed = seed.wrapping_add(1);
        p = Project::new(body.name.clone(), seed);
    }
    if let Some(fps) = body.fps {
        p.fps = fps;
    }
    if let Some(c) = body.canvas {
        p.canvas = c;
    }
    p.validate()?;
    let doc = to_document(&p);
    st.create(p)?;
    Ok((StatusCode::CREATED, Json(doc)))
}

async fn list_projects(State(st): State<AppState>) -> ApiResult<Json<Vec<ProjectSummary>>> {
    let mut out = Vec::new();
    for id in st.store.list()? {
        let s = st
            .read(id.as_str(), |p| Ok(ProjectSummary { id: p.id.clone(), name: p.name.clone(), revision: p.revision }))
            .await;
        match s {
            Ok(s) => out.push(s),
            Err(e) => tracing::warn!(project = %id, error = %e, "skipping unreadable project"),
        }
    }
    Ok(Json(out))
}

async fn get_project(State(st): State<AppState>, Path(pid): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(st.read(&pid, |p| Ok(to_document(p))).await?))
}

/// Replace the whole document. The revision keeps increasing across the
/// replacement so clients can tell it happened.
async fn put_project(State(st): State<AppState>, Path(pid): Path<String>, body: Body<Value>) -> ApiResult<Json<Value>> {
    let mut new = from_document(&body?.0)?;
    if new.id.as_str() != pid {
        return Err(Error::CorruptDocument(format!("document id {} does not match {pid}", new.id)).into());
    }
    let doc = st
        .write(&pid, |p, _| {
            new.revision = new.revision.max(p.revision + 1);
            *p = new;
            Ok(to_document(p))
        })
        .await?;
    Ok(Json(doc))
}

async fn delete_project(State(st): State<AppState>, Path(pid): Path<String>) -> ApiResult<StatusCode> {
    st.delete(&pid).await?;
    Ok(StatusCode::NO_CONTENT)
}

fn sse_event(name: &str, id: Option<u64>, data: &impl Serialize) -> SseEvent {
    let ev = SseEvent::default().event(name).json_data(data).expect("events serialize");
    match id {
        Some(id) => ev.id(id.to_string()),
        None => ev,
    }
}

/// Everything that happens to a project, in commit order. A subscriber that
/// falls more than the buffer behind gets a `resync` event and should reload
/// the document.
async fn project_events(
    State(st): State<AppState>,
    Path(pid): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = std::result::Result<SseEvent, Infallible>>>> {
    let rx = st.subscribe(&pid)?;
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let ev = match rx.recv().await {
            Ok(ev) => sse_event(&ev.kind, Some(ev.seq), &ev),
            Err(RecvError::Lagged(n)) => sse_event("resync", None, &json!({ "type": "resync", "missed": n })),
            Err(RecvError::Closed) => return None,
        };
        Some((Ok(ev), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn call_tool(
    State(st): State<AppState>,
    Path((pid, tool)): Path<(String, String)>,
    body: Body<Value>,
) -> ApiResult<Json<Value>> {
    let args = body?.0;
    let out = st
        .write(&pid, |p, _| tools::dispatch(&st.reg, p, &DispatchCtx::user(), &tool, &args))
        .await?;
    Ok(Json(out))
}

// timeline

#[derive(Debug, Serialize, Deserialize)]
struct NewTrack {
    kind: TrackKind,
    name: String,
    #[serde(default)]
    order_index: Option<u32>,
}

async fn create_track(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    body: Body<NewTrack>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let b = body?.0;
    let t = st
        .write(&pid, |p, _| {
            logged(p, "create_track", &b, |p| match b.order_index {
                Some(i) => p.add_track_at(b.kind, b.name.clone(), i),
                None => Ok(p.add_track(b.kind, b.name.clone())),
            })
        })
        .await?;
    Ok((StatusCode::CREATED, Json(json!(t))))
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackPatch {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    order_index: Option<u32>,
}

async fn update_track(
    State(st): State<AppState>,
    Path((pid, tid)): Path<(String, String)>,
    body: Body<TrackPatch>,
) -> ApiResult<Json<Value>> {
    let b = body?.0;
    let tid = oid(&tid)?;
    let t = st
        .write(&pid, |p, _| {
            logged(p, "update_track", &json!({ "id": tid, "patch": b }), |p| {
                let mut t = p.track(&tid)?.clone();
                if let Some(n) = &b.name {
                    t.name = n.clone();
                }
                if let Some(i) = b.order_index {
                    t.order_index = i;
                }
                timeline::replace_track(p, t)
            })
        })
        .await?;
    Ok(Json(json!(t)))
}

async fn delete_track(State(st): State<AppState>, Path((pid, tid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    let tid = oid(&tid)?;
    st.write(&pid, |p, _| logged(p, "delete_track", &json!({ "id": tid }), |p| timeline::remove_track(p, &tid)))
        .await?;
    Ok(StatusCode::NO_CONTENT)
}

fn zero() -> Time {
    Time::ZERO
}

/// Clip payload as clients send it; style and trim may be left out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum PayloadIn {
    Text {
        content: String,
        #[serde(default)]
        style: TextStyle,
    },
    Media {
        asset_ref: ObjectId,
        #[serde(default = "zero")]
        trim_in: Time,
    },
    Element {
        element_kind: String,
        #[serde(default)]
        params: FieldMap,
    },
}

impl From<PayloadIn> for ClipPayload {
    fn from(p: PayloadIn) -> Self {
        match p {
            PayloadIn::Text { content, style } => ClipPayload::Text { content, style },
            PayloadIn::Media { asset_ref, trim_in } => ClipPayload::Media { asset_ref, trim_in },
            PayloadIn::Element { element_kind, params } => ClipPayload::Element { element_kind, params },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NewClip {
    track_id: ObjectId,
    start: Time,
    duration: Time,
    payload: PayloadIn,
}

async fn create_clip(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    body: Body<NewClip>,
) -> ApiResult<(StatusCode, Json<Clip>)> {
    let b = body?.0;
    let c = st
        .write(&pid, |p, _| {
            logged(p, "create_clip", &b, |p| {
                timeline::add_clip(p, &b.track_id, b.start, b.duration, b.payload.clone().into())
            })
        })
        .await?;
    Ok((StatusCode::CREATED, Json(c)))
}

async fn get_clip(State(st): State<AppState>, Path((pid, cid)): Path<(String, String)>) -> ApiResult<Json<Clip>> {
    let cid = oid(&cid)?;
    Ok(Json(st.read(&pid, |p| p.clip(&cid).cloned()).await?))
}

#[derive(Debug, Serialize, Deserialize)]
struct ClipPatch {
    #[serde(default)]
    track_id: Option<ObjectId>,
    #[serde(default)]
    start: Option<Time>,
    #[serde(default)]
    duration: Option<Time>,
    #[serde(default)]
    payload: Option<PayloadIn>,
}

async fn update_clip(
    State(st): State<AppState>,
    Path((pid, cid)): Path<(String, String)>,
    body: Body<ClipPatch>,
) -> ApiResult<Json<Clip>> {
    let b = body?.0;
    let cid = oid(&cid)?;
    let c = st
        .write(&pid, |p, _| {
            logged(p, "update_clip", &json!({ "id": cid, "patch": b }), |p| {
                let mut c = p.clip(&cid)?.clone();
                if let Some(t) = &b.track_id {
                    c.track_id = t.clone();
                }
                c.start = b.start.unwrap_or(c.start);
                c.duration = b.duration.unwrap_or(c.duration);
                if let Some(pl) = &b.payload {
                    c.payload = pl.clone().into();
                }
                timeline::replace_clip(p, c)
            })
        })
        .await?;
    Ok(Json(c))
}

async fn delete_clip(State(st): State<AppState>, Path((pid, cid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    let cid = oid(&cid)?;
    st.write(&pid, |p, _| logged(p, "delete_clip", &json!({ "id": cid }), |p| timeline::remove_clip(p, &cid)))
        .await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitAt {
    at: Time,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitResult {
    pub first: Clip,
    pub second: Clip,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<ScriptDelta>,
}

async fn split_clip(
    State(st): State<AppState>,
    Path((pid, cid)): Path<(String, String)>,
    body: Body<SplitAt>,
) -> ApiResult<Json<SplitResult>> {
    let b = body?.0;
    let cid = oid(&cid)?;
    let (first, second) = st
        .write(&pid, |p, _| {
            logged(p, "split_clip", &json!({ "id": cid, "at": b.at }), |p| timeline::split_clip(p, &cid, b.at))
        })
        .await?;
    Ok(Json(SplitResult { first, second, delta: None }))
}

#[derive(Debug, Serialize, Deserialize)]
struct Pair {
    a: ObjectId,
    b: ObjectId,
}

async fn merge_clips(State(st): State<AppState>, Path(pid): Path<String>, body: Body<Pair>) -> ApiResult<Json<Clip>> {
    let b = body?.0;
    let c = st
        .write(&pid, |p, _| logged(p, "merge_clips", &b, |p| timeline::merge_clips(p, &b.a, &b.b)))
        .await?;
    Ok(Json(c))
}

#[derive(Debug, Deserialize)]
struct AtTime {
    t: f64,
}

async fn clip_state(
    State(st): State<AppState>,
    Path((pid, cid)): Path<(String, String)>,
    q: Q<AtTime>,
) -> ApiResult<Json<eval::RenderState>> {
    let t = q?.0.t;
    let cid = oid(&cid)?;
    Ok(Json(st.read(&pid, |p| eval::evaluate(p, &cid, t)).await?))
}

async fn frame(State(st): State<AppState>, Path(pid): Path<String>, q: Q<AtTime>) -> ApiResult<Json<eval::Frame>> {
    let t = q?.0.t;
    let states = st.read(&pid, |p| Ok(eval::snapshot_frame(p, t))).await?;
    Ok(Json(eval::Frame { t, states }))
}

fn animation_class(st: &AppState, preset: &str) -> Result<()> {
    match st.reg.get(preset) {
        Ok(c) if c.category == Category::AnimationEffect => Ok(()),
        _ => Err(Error::UnknownPreset(preset.to_string())),
    }
}

#[derive(Debug, Deserialize)]
struct NewAnimation {
    preset: String,
    #[serde(default)]
    params: serde_json::Map<String, Value>,
    #[serde(default)]
    phase: Option<Phase>,
}

/// Attach through the derived `create_<preset>` tool, so parameters get the
/// same validation an agent's call would.
async fn attach_animation(
    State(st): State<AppState>,
    Path((pid, cid)): Path<(String, String)>,
    body: Body<NewAnimation>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let b = body?.0;
    animation_class(&st, &b.preset)?;
    let mut args = b.params;
    args.insert("clip_id".into(), json!(cid));
    if let Some(ph) = b.phase {
        args.insert("phase".into(), json!(ph));
    }
    let tool = tools::tool_name(Verb::Create, &b.preset, false);
    let out = st
        .write(&pid, |p, _| tools::dispatch(&st.reg, p, &DispatchCtx::user(), &tool, &Value::Object(args)))
        .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn update_animation(
    State(st): State<AppState>,
    Path((pid, aid)): Path<(String, String)>,
    body: Body<serde_json::Map<String, Value>>,
) -> ApiResult<Json<Value>> {
    let mut args = body?.0;
    let aid = oid(&aid)?;
    args.insert("id".into(), json!(aid));
    let out = st
        .write(&pid, |p, _| {
            let preset = p.animation(&aid)?.preset.as_str().to_string();
            let tool = tools::tool_name(Verb::Update, &preset, false);
            tools::dispatch(&st.reg, p, &DispatchCtx::user(), &tool, &Value::Object(args))
        })
        .await?;
    Ok(Json(out))
}

async fn detach_animation(
    State(st): State<AppState>,
    Path((pid, aid)): Path<(String, String)>,
) -> ApiResult<StatusCode> {
    let aid = oid(&aid)?;
    st.write(&pid, |p, _| {
        let preset = p.animation(&aid)?.preset.as_str().to_string();
        let tool = tools::tool_name(Verb::Delete, &preset, false);
        tools::dispatch(&st.reg, p, &DispatchCtx::user(), &tool, &json!({ "id": aid }))
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

// script

#[derive(Debug, Deserialize)]
struct ScriptQuery {
    /// Comma-separated track ids; defaults to the saved selection.
    #[serde(default)]
    tracks: Option<String>,
}

async fn get_script(State(st): State<AppState>, Path(pid): Path<String>, q: Q<ScriptQuery>) -> ApiResult<Json<ScriptDocument>> {
    let q = q?.0;
    let sel: Option<BTreeSet<ObjectId>> = match q.tracks.as_deref() {
        None => None,
        Some(s) => Some(s.split(',').filter(|x| !x.is_empty()).map(oid).collect::<Result<_>>()?),
    };
    let doc = st
        .read(&pid, |p| script::project_script(p, &sel.unwrap_or_else(|| p.script_selection())))
        .await?;
    Ok(Json(doc))
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackSelection {
    track_ids: BTreeSet<ObjectId>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScriptUpdate {
    pub document: ScriptDocument,
    pub delta: ScriptDelta,
}

async fn set_script_tracks(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    body: Body<TrackSelection>,
) -> ApiResult<Json<ScriptUpdate>> {
    let b = body?.0;
    let (document, delta) = st
        .write(&pid, |p, _| logged(p, "set_script_tracks", &b, |p| script::set_script_tracks(p, &b.track_ids)))
        .await?;
    Ok(Json(ScriptUpdate { document, delta }))
}

#[derive(Debug, Serialize, Deserialize)]
struct TextEdit {
    text: String,
}

async fn edit_line(
    State(st): State<AppState>,
    Path((pid, cid)): Path<(String, String)>,
    body: Body<TextEdit>,
) -> ApiResult<Json<ScriptDelta>> {
    let b = body?.0;
    let cid = oid(&cid)?;
    let delta = st
        .write(&pid, |p, _| {
            logged(p, "edit_line", &json!({ "clip_id": cid, "text": b.text }), |p| {
                script::apply_text_edit(p, &cid, &b.text)
            })
        })
        .await?;
    st.schedule_suggestions(&pid, vec![cid]);
    Ok(Json(delta))
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitOffset {
    offset: usize,
}

async fn split_line(
    State(st): State<AppState>,
    Path((pid, cid)): Path<(String, String)>,
    body: Body<SplitOffset>,
) -> ApiResult<Json<SplitResult>> {
    let b = body?.0;
    let cid = oid(&cid)?;
    let (first, second, delta) = st
        .write(&pid, |p, _| {
            logged(p, "split_line", &json!({ "clip_id": cid, "offset": b.offset }), |p| {
                script::split_line(p, &cid, b.offset)
            })
        })
        .await?;
    st.schedule_suggestions(&pid, vec![first.id.clone(), second.id.clone()]);
    Ok(Json(SplitResult { first, second, delta: Some(delta) }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MergeResult {
    pub clip: Clip,
    pub delta: ScriptDelta,
}

async fn merge_lines(State(st): State<AppState>, Path(pid): Path<String>, body: Body<Pair>) -> ApiResult<Json<MergeResult>> {
    let b = body?.0;
    let (clip, delta) = st
        .write(&pid, |p, _| logged(p, "merge_lines", &b, |p| script::merge_lines(p, &b.a, &b.b)))
        .await?;
    st.schedule_suggestions(&pid, vec![clip.id.clone()]);
    Ok(Json(MergeResult { clip, delta }))
}

#[derive(Debug, Serialize, Deserialize)]
struct NewLine {
    anchor: Anchor,
    text: String,
    /// Forces a strategy; otherwise the placement agent decides.
    #[serde(default)]
    strategy: Option<PlacementStrategy>,
    #[serde(default)]
    track_id: Option<ObjectId>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AddLineResult {
    pub clip: Clip,
    pub delta: ScriptDelta,
    pub decision: script::PlacementDecision,
}

async fn add_line(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    body: Body<NewLine>,
) -> ApiResult<(StatusCode, Json<AddLineResult>)> {
    let b = body?.0;
    // the placement agent may call a model, so it works on a snapshot and
    // its log entries are copied over afterwards
    let agent_pick = match b.strategy {
        Some(_) => None,
        None => {
            let snap = st.read(&pid, |p| Ok(p.clone())).await?;
            let st2 = st.clone();
            let (text, anchor) = (b.text.clone(), b.anchor.clone());
            let pick = tokio::task::spawn_blocking(move || {
                let mut snap = snap;
                let before = snap.operation_log.len();
                let sel = snap.script_selection();
                let d = tae_core::agents::placement::propose_clip_placement(&st2.agents, &st2.reg, &mut snap, &sel, &text, &anchor);
                d.map(|d| (d, snap.operation_log.split_off(before)))
            })
            .await
            .map_err(|e| Error::Io(e.to_string()))??;
            Some(pick)
        }
    };
    let out = st
        .write(&pid, |p, _| {
            let sel = p.script_selection();
            let decision = match (&agent_pick, b.strategy) {
                (Some((d, entries)), _) => {
                    append_entries(p, entries);
                    d.clone()
                }
                (None, Some(s)) => script::plan_placement(p, &sel, &b.anchor, s, b.track_id.as_ref())?,
                (None, None) => unreachable!("one of the two is set"),
            };
            let (clip, delta) = logged(p, "add_line", &json!({ "line": b, "decision": decision }), |p| {
                script::add_line(p, &sel, &b.anchor, &b.text, &decision)
            })?;
            Ok(AddLineResult { clip, delta, decision })
        })
        .await?;
    st.schedule_suggestions(&pid, vec![out.clip.id.clone()]);
    Ok((StatusCode::CREATED, Json(out)))
}

fn append_entries(p: &mut Project, entries: &[OperationLogEntry]) {
    for e in entries {
        let seq = p.operation_log.last().map_or(1, |l| l.seq + 1);
        p.operation_log.push(OperationLogEntry { seq, ..e.clone() });
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StyleBatch {
    start: usize,
    end: usize,
    delta: StyleDelta,
}

async fn style_batch(State(st): State<AppState>, Path(pid): Path<String>, body: Body<StyleBatch>) -> ApiResult<Json<Value>> {
    let b = body?.0;
    let (count, delta) = st
        .write(&pid, |p, _| {
            logged(p, "style_batch", &b, |p| {
                let sel = p.script_selection();
                script::apply_style_batch(p, &sel, b.start..b.end, &b.delta)
            })
        })
        .await?;
    Ok(Json(json!({ "count": count, "delta": delta })))
}

// suggestions

async fn pending_suggestions(State(st): State<AppState>, Path(pid): Path<String>) -> ApiResult<Json<Vec<Suggestion>>> {
    Ok(Json(st.read(&pid, |p| Ok(agents::pending(p).into_iter().cloned().collect())).await?))
}

#[derive(Debug, Deserialize)]
struct RefreshRequest {
    clip_id: ObjectId,
}

async fn refresh_suggestions(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    body: Body<RefreshRequest>,
) -> ApiResult<Json<Vec<Suggestion>>> {
    let b = body?.0;
    Ok(Json(st.refresh_suggestions(&pid, &b.clip_id).await?))
}

#[derive(Debug, Default, Deserialize)]
struct AcceptRequest {
    /// Revision the client saw; informational, staleness is decided by the
    /// target clip itself.
    #[serde(default)]
    #[allow(dead_code)]
    revision: Option<u64>,
}

async fn accept_suggestion(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    body: Option<Json<AcceptRequest>>,
) -> ApiResult<Json<Value>> {
    let _ = body.map(|b| b.0).unwrap_or_default();
    let sid = oid(&sid)?;
    let out = st
        .write(&pid, |p, out| {
            let r = agents::accept_suggestion(&st.reg, p, &sid);
            if let Some(s) = p.suggestions.get(&sid) {
                out.push("suggestion", json!({ "suggestion": s, "project_revision": p.revision }));
            }
            let result = r?;
            Ok(json!({ "result": result, "revision": p.revision, "suggestion": p.suggestions[&sid] }))
        })
        .await?;
    Ok(Json(out))
}

async fn dismiss_suggestion(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
) -> ApiResult<Json<Suggestion>> {
    let sid = oid(&sid)?;
    let s = st
        .write(&pid, |p, out| {
            agents::dismiss_suggestion(p, &sid)?;
            let s = p.suggestions[&sid].clone();
            out.push("suggestion", json!({ "suggestion": s, "project_revision": p.revision }));
            Ok(s)
        })
        .await?;
    Ok(Json(s))
}

// chat

#[derive(Debug, Default, Deserialize)]
struct NewSession {
    #[serde(default)]
    auto_skip: bool,
}

async fn create_session(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    body: Option<Json<NewSession>>,
) -> ApiResult<(StatusCode, Json<ChatSession>)> {
    let b = body.map(|b| b.0).unwrap_or_default();
    let s = st.write(&pid, |p, _| Ok(chat::start_session(p, b.auto_skip))).await?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn get_session(State(st): State<AppState>, Path((pid, sid)): Path<(String, String)>) -> ApiResult<Json<ChatSession>> {
    let sid = oid(&sid)?;
    Ok(Json(st.read(&pid, |p| chat::session(p, &sid).cloned()).await?))
}

#[derive(Debug, Deserialize)]
struct AutoSkip {
    auto_skip: bool,
}

async fn set_auto_skip(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    body: Body<AutoSkip>,
) -> ApiResult<Json<ChatSession>> {
    let b = body?.0;
    let sid = oid(&sid)?;
    let s = st
        .write(&pid, |p, _| {
            chat::set_auto_skip(p, &sid, b.auto_skip)?;
            chat::session(p, &sid).cloned()
        })
        .await?;
    Ok(Json(s))
}

#[derive(Debug, Deserialize)]
struct Message {
    text: String,
    #[serde(default)]
    attachments: Vec<ObjectId>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageResult {
    pub references: Vec<chat::refs::ReferenceToken>,
    pub session: ChatSession,
}

/// Submit a message and plan until the session needs the user again.
async fn post_message(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    body: Body<Message>,
) -> ApiResult<Json<MessageResult>> {
    let b = body?.0;
    let sid = oid(&sid)?;
    let references = st.chat_op(&pid, &sid, |p| chat::submit_message(p, &sid, &b.text, &b.attachments)).await?;
    let session = st.run_chat(&pid, &sid).await?;
    Ok(Json(MessageResult { references, session }))
}

async fn approve_step(State(st): State<AppState>, Path((pid, sid)): Path<(String, String)>) -> ApiResult<Json<ChatSession>> {
    let sid = oid(&sid)?;
    st.chat_op(&pid, &sid, |p| chat::approve_step(&st.reg, p, &sid)).await?;
    Ok(Json(st.run_chat(&pid, &sid).await?))
}

#[derive(Debug, Deserialize)]
struct Modify {
    args: Value,
}

async fn modify_step(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    body: Body<Modify>,
) -> ApiResult<Json<ChatSession>> {
    let b = body?.0;
    let sid = oid(&sid)?;
    st.chat_op(&pid, &sid, |p| chat::modify_step(&st.reg, p, &sid, b.args)).await?;
    Ok(Json(st.run_chat(&pid, &sid).await?))
}

#[derive(Debug, Default, Deserialize)]
struct Reject {
    #[serde(default)]
    reason: Option<String>,
}

async fn reject_step(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    body: Option<Json<Reject>>,
) -> ApiResult<Json<ChatSession>> {
    let b = body.map(|b| b.0).unwrap_or_default();
    let sid = oid(&sid)?;
    st.chat_op(&pid, &sid, |p| chat::reject_step(p, &sid, b.reason.as_deref())).await?;
    Ok(Json(st.run_chat(&pid, &sid).await?))
}

#[derive(Debug, Deserialize)]
struct Answer {
    answer: Value,
}

async fn answer_prompt(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    body: Body<Answer>,
) -> ApiResult<Json<ChatSession>> {
    let b = body?.0;
    let sid = oid(&sid)?;
    st.chat_op(&pid, &sid, |p| chat::answer_prompt(&st.reg, p, &sid, &b.answer)).await?;
    Ok(Json(st.run_chat(&pid, &sid).await?))
}

#[derive(Debug, Default, Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

struct ChatFeed {
    rx: tokio::sync::broadcast::Receiver<Event>,
    replay: VecDeque<ChatEvent>,
    last: u64,
    sid: ObjectId,
}

/// One session's events: first those after `since`, then live ones.
async fn chat_events(
    State(st): State<AppState>,
    Path((pid, sid)): Path<(String, String)>,
    q: Q<Since>,
) -> ApiResult<Sse<impl Stream<Item = std::result::Result<SseEvent, Infallible>>>> {
    let since = q?.0.since;
    let sid = oid(&sid)?;
    let rx = st.subscribe(&pid)?;
    let replay: VecDeque<ChatEvent> =
        st.read(&pid, |p| Ok(chat::session(p, &sid)?.events_since(since).to_vec())).await?.into();
    let feed = ChatFeed { rx, replay, last: since, sid };
    let stream = futures::stream::unfold(feed, |mut f| async move {
        loop {
            if let Some(e) = f.replay.pop_front() {
                f.last = e.seq;
                let name = serde_json::to_value(e.kind).ok()?.as_str()?.to_string();
                return Some((Ok(sse_event(&name, Some(e.seq), &e)), f));
            }
            match f.rx.recv().await {
                Ok(ev) if ev.kind == "chat" && ev.payload["session_id"] == json!(f.sid) => {
                    let Ok(e) = serde_json::from_value::<ChatEvent>(ev.payload["event"].clone()) else { continue };
                    if e.seq > f.last {
                        f.replay.push_back(e);
                    }
                }
                Ok(_) => {}
                Err(RecvError::Lagged(n)) => {
                    return Some((Ok(sse_event("resync", None, &json!({ "type": "resync", "missed": n }))), f))
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn instructions(State(st): State<AppState>, Path(pid): Path<String>) -> ApiResult<Json<Value>> {
    let snap = st.read(&pid, |p| Ok(p.clone())).await?;
    let st2 = st.clone();
    let list = tokio::task::spawn_blocking(move || chat::suggest::suggest_instructions(&st2.agents, &st2.reg, &snap))
        .await
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(Json(json!({ "instructions": list })))
}

#[derive(Debug, Deserialize)]
struct RefQuery {
    text: String,
}

async fn references(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    q: Q<RefQuery>,
) -> ApiResult<Json<Vec<chat::refs::ReferenceToken>>> {
    let text = q?.0.text;
    Ok(Json(st.read(&pid, |p| Ok(chat::refs::resolve_references(&text, p))).await?))
}

// assets

fn kind_for(content_type: &str) -> Option<AssetKind> {
    let major = content_type.split('/').next()?.trim();
    AssetKind::parse(&major.to_ascii_lowercase())
}

/// Multipart upload: a `file` part (its content type picks the asset kind),
/// optional `name` and, for audio and video, `duration` in seconds.
async fn upload_asset(
    State(st): State<AppState>,
    Path(pid): Path<String>,
    mut form: Multipart,
) -> ApiResult<(StatusCode, Json<Asset>)> {
    let mut file: Option<(String, Option<String>, Bytes)> = None;
    let mut name = None;
    let mut duration = None;
    while let Some(field) = form.next_field().await? {
        match field.name() {
            Some("file") => {
                let ct = field.content_type().unwrap_or("application/octet-stream").to_string();
                let fname = field.file_name().map(str::to_string);
                file = Some((ct, fname, field.bytes().await?));
            }
            Some("name") => name = Some(field.text().await?),
            Some("duration") => {
                let raw = field.text().await?;
                let secs: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::SchemaViolation(format!("duration `{raw}` is not a number")))?;
                duration = Some(Time::from_secs(secs));
            }
            _ => {}
        }
    }
    let (ct, fname, bytes) = file.ok_or_else(|| Error::SchemaViolation("missing `file` part".into()))?;
    let kind = kind_for(&ct).ok_or_else(|| Error::SchemaViolation(format!("unsupported content type `{ct}`")))?;
    let name = name.or(fname).unwrap_or_else(|| kind.as_str().to_string());
    let args = json!({ "kind": kind, "name": name, "content_type": ct, "bytes": bytes.len() });
    let asset = st
        .write(&pid, |p, out| {
            let a = logged(p, "upload_asset", &args, |p| {
                p.transact(|p| {
                    let a = p.add_asset(kind, name.clone(), "", duration)?;
                    st.store.write_asset(&a.id, &bytes)?;
                    Ok(a)
                })
            })?;
            out.push("asset", json!({ "asset": a }));
            Ok(a)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(asset)))
}

async fn list_assets(State(st): State<AppState>, Path(pid): Path<String>) -> ApiResult<Json<Vec<Asset>>> {
    Ok(Json(st.read(&pid, |p| Ok(p.assets.values().cloned().collect())).await?))
}

async fn asset_content(
    State(st): State<AppState>,
    Path((pid, aid)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let aid = oid(&aid)?;
    let kind = st.read(&pid, |p| Ok(p.asset(&aid)?.kind)).await?;
    let bytes = std::fs::read(st.store.asset_path(&aid)).map_err(Error::from)?;
    let ct = match kind {
        AssetKind::Image => "image/*",
        AssetKind::Audio => "audio/*",
        AssetKind::Video => "video/*",
    };
    Ok(([(header::CONTENT_TYPE, ct)], bytes))
}

async fn delete_asset(State(st): State<AppState>, Path((pid, aid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    let aid = oid(&aid)?;
    st.write(&pid, |p, _| {
        logged(p, "delete_asset", &json!({ "id": aid }), |p| timeline::remove_asset(p, &aid))?;
        let _ = std::fs::remove_file(st.store.asset_path(&aid));
        Ok(())
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

