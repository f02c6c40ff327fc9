use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::{
    batch_items, param_specs, parse_args, resolve_tool, Actor, Args, OperationLogEntry, Outcome,
    Target, ToolRef, Verb,
};
use crate::error::{Error, Result};
use crate::id::ObjectId;
use crate::meta::{FieldValue, MetaRegistry};
use crate::model::{
    Alignment, AssetKind, Clip, ClipPayload, Project, TextStyle, TrackKind,
};
use crate::time::Time;
use crate::timeline;

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchCtx {
    pub actor: Actor,
    pub step_id: Option<ObjectId>,
}

impl DispatchCtx {
    pub fn new(actor: Actor) -> Self {
        Self { actor, step_id: None }
    }

    pub fn user() -> Self {
        Self::new(Actor::User)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchError {
    pub index: usize,
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchResult {
    pub applied: usize,
    pub rolled_back: bool,
    pub first_error: Option<BatchError>,
    /// Per-item results when the batch committed.
    pub results: Vec<Value>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

pub(crate) fn append_log(p: &mut Project, ctx: &DispatchCtx, tool: &str, args: &Value, outcome: Outcome, detail: String) {
    let seq = p.operation_log.last().map_or(1, |e| e.seq + 1);
    p.operation_log.push(OperationLogEntry {
        seq,
        timestamp: now_ms(),
        actor: ctx.actor,
        tool: tool.to_string(),
        args: args.clone(),
        outcome,
        detail,
        step_id: ctx.step_id.clone(),
    });
}

/// Log an operation performed outside tool dispatch (direct edits).
pub fn record_operation<T>(p: &mut Project, ctx: &DispatchCtx, op: &str, args: &Value, result: &Result<T>) {
    match result {
        Ok(_) => append_log(p, ctx, op, args, Outcome::Ok, String::new()),
        Err(e) => append_log(p, ctx, op, args, Outcome::Error, format!("{}: {e}", e.code())),
    }
}

/// Run one tool call (single, query or batch) and log it. A batch that rolls
/// back reports its first item error.
pub fn dispatch(
    reg: &MetaRegistry,
    p: &mut Project,
    ctx: &DispatchCtx,
    tool: &str,
    args: &Value,
) -> Result<Value> {
    let result = resolve_tool(reg, tool).and_then(|t| {
        if t.batch {
            let r = run_batch(reg, p, &t, args)?;
            match &r.first_error {
                Some(e) => Err(e.error.clone()),
                None => Ok(serde_json::to_value(&r).expect("batch result serializes")),
            }
        } else {
            apply(reg, p, &t, args)
        }
    });
    match &result {
        Ok(_) => append_log(p, ctx, tool, args, Outcome::Ok, String::new()),
        Err(e) => append_log(p, ctx, tool, args, Outcome::Error, format!("{}: {e}", e.code())),
    }
    result
}

/// Run a batch tool. `tool` may name the batch tool or its single-mode
/// counterpart. Item errors are reported in the result, not as `Err`.
pub fn dispatch_batch(
    reg: &MetaRegistry,
    p: &mut Project,
    ctx: &DispatchCtx,
    tool: &str,
    items: Vec<Value>,
) -> Result<BatchResult> {
    let args = json!({ "items": items });
    let resolved = resolve_tool(reg, tool).and_then(|t| {
        if t.verb == Verb::Query {
            return Err(Error::UnknownTool(format!("{tool} has no batch mode")));
        }
        Ok(ToolRef { batch: true, ..t })
    });
    let batch_name = match &resolved {
        Ok(t) => super::tool_name(t.verb, &t.class.name, true),
        Err(_) => tool.to_string(),
    };
    let result = resolved.and_then(|t| run_batch(reg, p, &t, &args));
    match &result {
        Ok(r) => match &r.first_error {
            None => append_log(p, ctx, &batch_name, &args, Outcome::Ok, format!("applied {}", r.applied)),
            Some(e) => append_log(
                p,
                ctx,
                &batch_name,
                &args,
                Outcome::Error,
                format!("item {}: {}: {}", e.index, e.code, e.message),
            ),
        },
        Err(e) => append_log(p, ctx, &batch_name, &args, Outcome::Error, format!("{}: {e}", e.code())),
    }
    result
}

fn run_batch(reg: &MetaRegistry, p: &mut Project, t: &ToolRef, args: &Value) -> Result<BatchResult> {
    let items = batch_items(args)?;
    let single = ToolRef { batch: false, ..t.clone() };
    let mut scratch = p.clone();
    let mut results = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        match apply(reg, &mut scratch, &single, item) {
            Ok(v) => results.push(v),
            Err(error) => {
                return Ok(BatchResult {
                    applied: 0,
                    rolled_back: true,
                    first_error: Some(BatchError {
                        index,
                        code: error.code(),
                        message: error.to_string(),
                        error,
                    }),
                    results: Vec::new(),
                });
            }
        }
    }
    // keep the live log; everything else comes from the scratch copy
    scratch.operation_log = std::mem::take(&mut p.operation_log);
    *p = scratch;
    Ok(BatchResult { applied: results.len(), rolled_back: false, first_error: None, results })
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("model types serialize")
}

fn apply(reg: &MetaRegistry, p: &mut Project, t: &ToolRef, args: &Value) -> Result<Value> {
    let specs = param_specs(t.class, t.target, t.verb);
    let a = parse_args(&specs, args)?;
    match t.target {
        Target::Asset => asset_tool(p, t.verb, &a),
        Target::Track => track_tool(p, t.verb, &a),
        Target::Clip => clip_tool(p, t.verb, &a),
        Target::Element => element_tool(reg, p, t, &a),
        Target::Animation => animation_tool(reg, p, t, &a),
    }
}

fn required<'a>(a: &'a Args, name: &str) -> &'a ObjectId {
    a.id(name).expect("required parameters are checked by parse_args")
}

fn query<T: Serialize>(
    a: &Args,
    one: impl Fn(&ObjectId) -> Result<Value>,
    all: impl Fn() -> Vec<T>,
) -> Result<Value> {
    match a.id("id") {
        Some(id) => one(id),
        None => Ok(to_json(&all())),
    }
}

fn asset_tool(p: &mut Project, verb: Verb, a: &Args) -> Result<Value> {
    let kind_of = |v: &FieldValue| v.as_str().and_then(AssetKind::parse).expect("enum is range-checked");
    let duration_of = |v: Option<&FieldValue>| v.and_then(|v| v.as_time()).filter(|d| *d > Time::ZERO);
    let text = |name: &str| a.fields.get(name).and_then(|v| v.as_str()).map(str::to_string);
    match verb {
        Verb::Create => {
            let kind = a.fields.get("kind").map_or(AssetKind::Image, kind_of);
            let asset = p.add_asset(
                kind,
                text("name").unwrap_or_default(),
                text("uri").unwrap_or_default(),
                duration_of(a.fields.get("media_duration")),
            )?;
            Ok(to_json(&asset))
        }
        Verb::Update => {
            let id = required(a, "id");
            let mut asset = p.asset(id)?.clone();
            if let Some(k) = a.fields.get("kind") {
                asset.kind = kind_of(k);
            }
            if let Some(n) = text("name") {
                asset.name = n;
            }
            if let Some(u) = text("uri") {
                asset.uri = u;
            }
            if a.fields.contains_key("media_duration") {
                asset.media_duration = duration_of(a.fields.get("media_duration"));
            }
            asset.validate()?;
            let mut next = p.clone();
            next.assets.insert(id.clone(), asset.clone());
            for c in next.clips.values() {
                if matches!(&c.payload, ClipPayload::Media { asset_ref, .. } if asset_ref == id) {
                    next.check_payload(next.track(&c.track_id)?, &c.payload, c.duration)?;
                }
            }
            p.assets.insert(id.clone(), asset.clone());
            p.commit();
            Ok(to_json(&asset))
        }
        Verb::Delete => {
            let id = required(a, "id");
            timeline::remove_asset(p, id)?;
            Ok(json!({ "deleted": id }))
        }
        Verb::Query => query(a, |id| Ok(to_json(p.asset(id)?)), || p.assets.values().collect()),
    }
}

fn track_tool(p: &mut Project, verb: Verb, a: &Args) -> Result<Value> {
    let kind_of = |v: &FieldValue| v.as_str().and_then(TrackKind::parse).expect("enum is range-checked");
    let order = |v: &FieldValue| match v {
        FieldValue::Integer(i) => *i as u32,
        _ => unreachable!("order_index is an integer field"),
    };
    let boolean = |name: &str| match a.fields.get(name) {
        Some(FieldValue::Boolean(b)) => Some(*b),
        _ => None,
    };
    match verb {
        Verb::Create => {
            let kind = a.fields.get("kind").map_or(TrackKind::Text, kind_of);
            let name = a.fields.get("name").and_then(|v| v.as_str()).unwrap_or_default().to_string();
            let index = a.fields.get("order_index").map_or_else(|| p.next_order_index(), order);
            let rev = p.revision;
            let mut track = p.add_track_at(kind, name, index)?;
            if let Some(v) = boolean("script_visible") {
                track.script_visible = v;
                p.tracks.insert(track.id.clone(), track.clone());
            }
            p.revision = rev + 1;
            Ok(to_json(&track))
        }
        Verb::Update => {
            let mut track = p.track(required(a, "id"))?.clone();
            if let Some(k) = a.fields.get("kind") {
                track.kind = kind_of(k);
            }
            if let Some(n) = a.fields.get("name").and_then(|v| v.as_str()) {
                track.name = n.to_string();
            }
            if let Some(o) = a.fields.get("order_index") {
                track.order_index = order(o);
            }
            if let Some(v) = boolean("script_visible") {
                track.script_visible = v;
            }
            Ok(to_json(&timeline::replace_track(p, track)?))
        }
        Verb::Delete => {
            let id = required(a, "id");
            timeline::remove_track(p, id)?;
            Ok(json!({ "deleted": id }))
        }
        Verb::Query => query(a, |id| Ok(to_json(p.track(id)?)), || p.tracks.values().collect()),
    }
}

const TEXT_FIELDS: [&str; 6] = ["content", "font_family", "font_size", "color", "position", "alignment"];
const MEDIA_FIELDS: [&str; 2] = ["asset", "trim_in"];
const ELEMENT_FIELDS: [&str; 1] = ["element_kind"];

fn apply_text_fields(a: &Args, content: &mut String, style: &mut TextStyle) {
    for (name, v) in &a.fields {
        match (name.as_str(), v) {
            ("content", FieldValue::String(s)) => *content = s.clone(),
            ("font_family", FieldValue::String(s)) => style.font_family = s.clone(),
            ("font_size", FieldValue::Number(n)) => style.font_size = *n,
            ("color", FieldValue::Color(c)) => style.color = *c,
            ("position", FieldValue::Point2dNormalized(pt)) => style.position = *pt,
            ("alignment", FieldValue::Enum(s)) => {
                style.alignment = match s.as_str() {
                    "left" => Alignment::Left,
                    "right" => Alignment::Right,
                    _ => Alignment::Center,
                }
            }
            _ => {}
        }
    }
}

/// Reject fields that do not apply to the payload kind.
fn check_applicable(a: &Args, payload_kind: &str) -> Result<()> {
    let allowed: &[&str] = match payload_kind {
        "text" => &TEXT_FIELDS,
        "media" => &MEDIA_FIELDS,
        _ => &ELEMENT_FIELDS,
    };
    let foreign = TEXT_FIELDS
        .iter()
        .chain(&MEDIA_FIELDS)
        .chain(&ELEMENT_FIELDS)
        .find(|f| a.fields.contains_key(**f) && !allowed.contains(f));
    match foreign {
        Some(f) => Err(Error::PayloadMismatch(format!("`{f}` does not apply to a {payload_kind} clip"))),
        None => Ok(()),
    }
}

fn apply_payload_fields(a: &Args, payload: &mut ClipPayload) -> Result<()> {
    check_applicable(a, payload.kind_name())?;
    match payload {
        ClipPayload::Text { content, style } => apply_text_fields(a, content, style),
        ClipPayload::Media { asset_ref, trim_in } => {
            match a.fields.get("asset") {
                Some(FieldValue::AssetRef(Some(id))) => *asset_ref = id.clone(),
                Some(_) => return Err(Error::PayloadMismatch("media clips need an asset".into())),
                None => {}
            }
            if let Some(t) = a.time("trim_in") {
                *trim_in = t;
            }
        }
        ClipPayload::Element { element_kind, .. } => {
            if let Some(FieldValue::String(k)) = a.fields.get("element_kind") {
                *element_kind = k.clone();
            }
        }
    }
    Ok(())
}

fn clip_tool(p: &mut Project, verb: Verb, a: &Args) -> Result<Value> {
    match verb {
        Verb::Create => {
            let track_id = required(a, "track_id");
            let track = p.track(track_id)?;
            let mut payload = match track.kind {
                TrackKind::Text => ClipPayload::text(""),
                TrackKind::Element => {
                    ClipPayload::Element { element_kind: "rect".into(), params: Default::default() }
                }
                _ => match a.fields.get("asset") {
                    Some(FieldValue::AssetRef(Some(id))) => {
                        ClipPayload::Media { asset_ref: id.clone(), trim_in: Time::ZERO }
                    }
                    _ => return Err(Error::PayloadMismatch("media clips need an asset".into())),
                },
            };
            apply_payload_fields(a, &mut payload)?;
            let start = a.time("start").unwrap_or(Time::ZERO);
            let duration = a.time("duration").unwrap_or(Time::from_millis(2000));
            Ok(to_json(&timeline::add_clip(p, track_id, start, duration, payload)?))
        }
        Verb::Update => {
            let mut c = p.clip(required(a, "id"))?.clone();
            if let Some(t) = a.id("track_id") {
                c.track_id = t.clone();
            }
            if let Some(s) = a.time("start") {
                c.start = s;
            }
            if let Some(d) = a.time("duration") {
                c.duration = d;
            }
            apply_payload_fields(a, &mut c.payload)?;
            Ok(to_json(&timeline::replace_clip(p, c)?))
        }
        Verb::Delete => {
            let id = required(a, "id");
            timeline::remove_clip(p, id)?;
            Ok(json!({ "deleted": id }))
        }
        Verb::Query => query(a, |id| Ok(to_json(p.clip(id)?)), || p.clips.values().collect()),
    }
}

fn is_element_of(c: &Clip, class: &str) -> bool {
    matches!(&c.payload, ClipPayload::Element { element_kind, .. } if element_kind == class)
}

fn element_clip<'p>(p: &'p Project, id: &ObjectId, class: &str) -> Result<&'p Clip> {
    let c = p.clip(id)?;
    if !is_element_of(c, class) {
        return Err(Error::PayloadMismatch(format!("clip {id} is not a {class}")));
    }
    Ok(c)
}

fn element_tool(reg: &MetaRegistry, p: &mut Project, t: &ToolRef, a: &Args) -> Result<Value> {
    let class = t.class.name.as_str();
    let own: crate::meta::FieldMap = a
        .fields
        .iter()
        .filter(|(k, _)| t.class.field(k).is_some())
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    match t.verb {
        Verb::Create => {
            let params = reg.resolve_fields(class, &own)?;
            let payload = ClipPayload::Element { element_kind: class.to_string(), params };
            let start = a.time("start").unwrap_or(Time::ZERO);
            let duration = a.time("duration").unwrap_or(Time::from_millis(2000));
            let c = timeline::add_clip(p, required(a, "track_id"), start, duration, payload)?;
            Ok(to_json(&c))
        }
        Verb::Update => {
            let mut c = element_clip(p, required(a, "id"), class)?.clone();
            if let Some(tr) = a.id("track_id") {
                c.track_id = tr.clone();
            }
            if let Some(s) = a.time("start") {
                c.start = s;
            }
            if let Some(d) = a.time("duration") {
                c.duration = d;
            }
            if let ClipPayload::Element { params, .. } = &mut c.payload {
                params.extend(own);
                *params = reg.resolve_fields(class, params)?;
            }
            Ok(to_json(&timeline::replace_clip(p, c)?))
        }
        Verb::Delete => {
            let id = required(a, "id");
            element_clip(p, id, class)?;
            timeline::remove_clip(p, id)?;
            Ok(json!({ "deleted": id }))
        }
        Verb::Query => query(
            a,
            |id| Ok(to_json(element_clip(p, id, class)?)),
            || p.clips.values().filter(|c| is_element_of(c, class)).collect(),
        ),
    }
}

fn animation_tool(reg: &MetaRegistry, p: &mut Project, t: &ToolRef, a: &Args) -> Result<Value> {
    let class = t.class.name.as_str();
    let check = |p: &Project, id: &ObjectId| -> Result<()> {
        let anim = p.animation(id)?;
        if anim.preset.as_str() != class {
            return Err(Error::PayloadMismatch(format!("animation {id} is a {}", anim.preset)));
        }
        Ok(())
    };
    match t.verb {
        Verb::Create => {
            let inst = timeline::attach_animation(p, reg, required(a, "clip_id"), class, &a.fields, a.phase)?;
            Ok(to_json(&inst))
        }
        Verb::Update => {
            let id = required(a, "id");
            check(p, id)?;
            Ok(to_json(&timeline::update_animation(p, reg, id, &a.fields, a.phase)?))
        }
        Verb::Delete => {
            let id = required(a, "id");
            check(p, id)?;
            timeline::detach_animation(p, id)?;
            Ok(json!({ "deleted": id }))
        }
        Verb::Query => query(
            a,
            |id| {
                check(p, id)?;
                Ok(to_json(p.animation(id)?))
            },
            || p.animations.values().filter(|x| x.preset.as_str() == class).collect(),
        ),
    }
}
