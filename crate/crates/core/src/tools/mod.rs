//! Function-calling tools derived from the meta-object registry.
//!
//! Each operable class gets `create_`, `update_`, `delete_` and `query_`
//! tools plus batch variants of the three mutating verbs. Parameter schemas
//! and argument parsing are both generated from the same [`ParamSpec`] list,
//! so anything the schema admits the parser accepts.

pub(crate) mod dispatch;

pub use dispatch::{dispatch, dispatch_batch, record_operation, BatchError, BatchResult, DispatchCtx};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::catalog;
use crate::error::{Error, Result};
use crate::id::{IdKind, ObjectId};
use crate::meta::{Category, FieldKind, FieldMap, FieldRange, MetaClass, MetaClassId, MetaField, MetaRegistry};
use crate::model::Phase;
use crate::time::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    User,
    InlineAgent,
    ChatAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationLogEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub actor: Actor,
    pub tool: String,
    pub args: Value,
    pub outcome: Outcome,
    pub detail: String,
    /// Chat plan step that issued the call, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_id: Option<ObjectId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Create,
    Update,
    Delete,
    Query,
}

impl Verb {
    pub const ALL: [Verb; 4] = [Verb::Create, Verb::Update, Verb::Delete, Verb::Query];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Create => "create",
            Verb::Update => "update",
            Verb::Delete => "delete",
            Verb::Query => "query",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    Batch,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub target_class: MetaClassId,
    pub verb: Verb,
    pub mode: Mode,
    pub description: String,
    /// JSON-schema object describing the arguments.
    pub parameters: Value,
}

impl ToolDescriptor {
    pub fn is_query(&self) -> bool {
        self.mode == Mode::Query
    }

    /// `{name, description, parameters}` as sent to a chat-completions API.
    pub fn function_schema(&self) -> Value {
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            }
        })
    }
}

/// How an operable class maps onto the project model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Target {
    Asset,
    Track,
    /// The built-in clip class.
    Clip,
    /// A custom timeline element class; instances are element clips.
    Element,
    Animation,
}

pub(crate) fn target_of(class: &MetaClass) -> Option<Target> {
    match (class.category, class.name.as_str()) {
        (Category::Asset, catalog::ASSET) => Some(Target::Asset),
        (Category::Asset, _) => None,
        (Category::TimelineElement, catalog::TRACK) => Some(Target::Track),
        (Category::TimelineElement, catalog::CLIP) => Some(Target::Clip),
        (Category::TimelineElement, _) if class.id_kind == IdKind::Clip => Some(Target::Element),
        (Category::TimelineElement, _) => None,
        (Category::AnimationEffect, _) => Some(Target::Animation),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ParamKind {
    Field(MetaField),
    Id(IdKind),
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub description: String,
}

impl ParamSpec {
    fn id(name: &str, kind: IdKind, required: bool, description: &str) -> Self {
        Self { name: name.into(), kind: ParamKind::Id(kind), required, description: description.into() }
    }

    fn field(f: &MetaField) -> Self {
        Self {
            name: f.name.clone(),
            kind: ParamKind::Field(f.clone()),
            required: false,
            description: f.description.clone(),
        }
    }

    fn schema(&self) -> Value {
        let mut s = match &self.kind {
            ParamKind::Id(kind) => json!({ "type": "string", "pattern": ObjectId::pattern(*kind) }),
            ParamKind::Phase => json!({ "type": "string", "enum": Phase::NAMES }),
            ParamKind::Field(f) => field_schema(f),
        };
        if !self.description.is_empty() {
            s["description"] = json!(self.description);
        }
        s
    }
}

fn field_schema(f: &MetaField) -> Value {
    let unit_items = json!({ "type": "number", "minimum": 0.0, "maximum": 1.0 });
    let mut s = match f.value_kind {
        FieldKind::Number | FieldKind::TimeSeconds => json!({ "type": "number" }),
        FieldKind::Integer => json!({ "type": "integer" }),
        FieldKind::String => json!({ "type": "string" }),
        FieldKind::Enum => json!({ "type": "string" }),
        FieldKind::Boolean => json!({ "type": "boolean" }),
        FieldKind::Color => {
            json!({ "type": "array", "items": unit_items, "minItems": 4, "maxItems": 4 })
        }
        FieldKind::Point2dNormalized => {
            json!({ "type": "array", "items": unit_items, "minItems": 2, "maxItems": 2 })
        }
        FieldKind::AssetRef => {
            json!({ "type": ["string", "null"], "pattern": ObjectId::pattern(IdKind::Asset) })
        }
    };
    match &f.range {
        Some(FieldRange::Interval { min, max }) => {
            s["minimum"] = json!(min);
            s["maximum"] = json!(max);
        }
        Some(FieldRange::Allowed(values)) => s["enum"] = json!(values),
        None => {}
    }
    s["default"] = f.default.to_json();
    if let Some(unit) = &f.unit {
        s["x-unit"] = json!(unit);
    }
    s
}

/// Parameters of a single-item call.
pub(crate) fn param_specs(class: &MetaClass, target: Target, verb: Verb) -> Vec<ParamSpec> {
    let own = match target {
        Target::Asset => IdKind::Asset,
        Target::Track => IdKind::Track,
        Target::Clip | Target::Element => IdKind::Clip,
        Target::Animation => IdKind::Anim,
    };
    let fields = || class.fields.iter().map(ParamSpec::field);
    let mut out = Vec::new();
    match verb {
        Verb::Create => {
            match target {
                Target::Clip | Target::Element => {
                    out.push(ParamSpec::id("track_id", IdKind::Track, true, "Track that receives the clip"))
                }
                Target::Animation => {
                    out.push(ParamSpec::id("clip_id", IdKind::Clip, true, "Clip to animate"));
                    out.push(phase_param());
                }
                _ => {}
            }
            out.extend(fields());
            if target == Target::Element {
                out.extend(placement_params(class));
            }
        }
        Verb::Update => {
            out.push(ParamSpec::id("id", own, true, "Object to update"));
            match target {
                Target::Clip | Target::Element => out.push(ParamSpec::id(
                    "track_id",
                    IdKind::Track,
                    false,
                    "Move the clip to this track",
                )),
                Target::Animation => out.push(phase_param()),
                _ => {}
            }
            out.extend(fields());
            if target == Target::Element {
                out.extend(placement_params(class));
            }
        }
        Verb::Delete => out.push(ParamSpec::id("id", own, true, "Object to delete")),
        Verb::Query => out.push(ParamSpec::id("id", own, false, "Object to read; omit to list all")),
    }
    out
}

fn phase_param() -> ParamSpec {
    ParamSpec {
        name: "phase".into(),
        kind: ParamKind::Phase,
        required: false,
        description: "When the effect plays: enter, emphasis or exit".into(),
    }
}

/// `start`/`duration` for custom element classes that do not declare them.
fn placement_params(class: &MetaClass) -> Vec<ParamSpec> {
    let clip = catalog::clip_class();
    ["start", "duration"]
        .into_iter()
        .filter(|n| class.field(n).is_none())
        .map(|n| ParamSpec::field(clip.field(n).expect("clip declares placement")))
        .collect()
}

fn object_schema(specs: &[ParamSpec]) -> Value {
    let mut props = Map::new();
    for s in specs {
        props.insert(s.name.clone(), s.schema());
    }
    let required: Vec<&str> = specs.iter().filter(|s| s.required).map(|s| s.name.as_str()).collect();
    json!({
        "type": "object",
        "properties": props,
        "required": required,
        "additionalProperties": false,
    })
}

fn describe(class: &MetaClass, verb: Verb, batch: bool) -> String {
    let what = match verb {
        Verb::Create => format!("Create a new {}", class.name),
        Verb::Update => format!("Change fields of an existing {}", class.name),
        Verb::Delete => format!("Delete a {}", class.name),
        Verb::Query => format!("Read one {0} by id, or every {0}", class.name),
    };
    let mut d = if batch {
        format!("{what}, for each item in order. All items apply or none do.")
    } else {
        format!("{what}.")
    };
    if verb != Verb::Delete && verb != Verb::Query {
        let fields: Vec<String> = class
            .fields
            .iter()
            .filter(|f| !f.description.is_empty())
            .map(|f| format!("{}: {}", f.name, f.description))
            .collect();
        if !fields.is_empty() {
            d.push_str(" Fields: ");
            d.push_str(&fields.join("; "));
            d.push('.');
        }
    }
    d
}

pub fn tool_name(verb: Verb, class: &str, batch: bool) -> String {
    if batch {
        format!("{}_{class}_batch", verb.as_str())
    } else {
        format!("{}_{class}", verb.as_str())
    }
}

/// Every tool for the registry, sorted by name.
pub fn derive_tools(reg: &MetaRegistry) -> Vec<ToolDescriptor> {
    let mut out = Vec::new();
    for class in reg.classes() {
        let Some(target) = target_of(class) else { continue };
        for verb in Verb::ALL {
            let single = object_schema(&param_specs(class, target, verb));
            let mode = if verb == Verb::Query { Mode::Query } else { Mode::Single };
            out.push(ToolDescriptor {
                name: tool_name(verb, &class.name, false),
                target_class: class.id(),
                verb,
                mode,
                description: describe(class, verb, false),
                parameters: single.clone(),
            });
            if verb != Verb::Query {
                out.push(ToolDescriptor {
                    name: tool_name(verb, &class.name, true),
                    target_class: class.id(),
                    verb,
                    mode: Mode::Batch,
                    description: describe(class, verb, true),
                    parameters: json!({
                        "type": "object",
                        "properties": {
                            "items": { "type": "array", "minItems": 1, "items": single }
                        },
                        "required": ["items"],
                        "additionalProperties": false,
                    }),
                });
            }
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// A resolved tool name.
#[derive(Debug, Clone)]
pub(crate) struct ToolRef<'r> {
    pub class: &'r MetaClass,
    pub target: Target,
    pub verb: Verb,
    pub batch: bool,
}

pub(crate) fn resolve_tool<'r>(reg: &'r MetaRegistry, name: &str) -> Result<ToolRef<'r>> {
    let unknown = || Error::UnknownTool(name.to_string());
    let (verb_str, rest) = name.split_once('_').ok_or_else(unknown)?;
    let verb = Verb::ALL.into_iter().find(|v| v.as_str() == verb_str).ok_or_else(unknown)?;
    let lookup = |class: &str| {
        reg.get(class).ok().and_then(|c| target_of(c).map(|t| (c, t)))
    };
    if let Some(base) = rest.strip_suffix("_batch") {
        if verb != Verb::Query {
            if let Some((class, target)) = lookup(base) {
                return Ok(ToolRef { class, target, verb, batch: true });
            }
        }
    }
    let (class, target) = lookup(rest).ok_or_else(unknown)?;
    Ok(ToolRef { class, target, verb, batch: false })
}

/// Parsed single-call arguments.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Args {
    pub ids: std::collections::BTreeMap<String, ObjectId>,
    pub phase: Option<Phase>,
    pub fields: FieldMap,
}

impl Args {
    pub fn id(&self, name: &str) -> Option<&ObjectId> {
        self.ids.get(name)
    }

    pub fn time(&self, name: &str) -> Option<Time> {
        self.fields.get(name).and_then(|v| v.as_time())
    }
}

pub(crate) fn parse_args(specs: &[ParamSpec], args: &Value) -> Result<Args> {
    let obj = args
        .as_object()
        .ok_or_else(|| Error::SchemaViolation("arguments must be an object".into()))?;
    for key in obj.keys() {
        if !specs.iter().any(|s| &s.name == key) {
            return Err(Error::SchemaViolation(format!("unexpected argument `{key}`")));
        }
    }
    let mut out = Args::default();
    for spec in specs {
        let Some(v) = obj.get(&spec.name) else {
            if spec.required {
                return Err(Error::SchemaViolation(format!("missing argument `{}`", spec.name)));
            }
            continue;
        };
        match &spec.kind {
            ParamKind::Id(kind) => {
                let id = v
                    .as_str()
                    .and_then(|s| s.parse::<ObjectId>().ok())
                    .filter(|id| id.is_kind(*kind))
                    .ok_or_else(|| {
                        Error::SchemaViolation(format!("`{}` must be a {} id", spec.name, kind.prefix()))
                    })?;
                out.ids.insert(spec.name.clone(), id);
            }
            ParamKind::Phase => {
                let phase = v.as_str().and_then(Phase::parse).ok_or_else(|| {
                    Error::SchemaViolation(format!("`{}` must be one of {:?}", spec.name, Phase::NAMES))
                })?;
                out.phase = Some(phase);
            }
            ParamKind::Field(f) => {
                let value = f.parse_json(v).map_err(|e| e.into_error(&spec.name))?;
                out.fields.insert(spec.name.clone(), value);
            }
        }
    }
    Ok(out)
}

/// Validate arguments of `tool` without touching any project.
pub fn validate_args(reg: &MetaRegistry, tool: &str, args: &Value) -> Result<()> {
    let t = resolve_tool(reg, tool)?;
    let specs = param_specs(t.class, t.target, t.verb);
    if t.batch {
        for item in batch_items(args)? {
            parse_args(&specs, item)?;
        }
    } else {
        parse_args(&specs, args)?;
    }
    Ok(())
}

pub(crate) fn batch_items(args: &Value) -> Result<&Vec<Value>> {
    let obj = args
        .as_object()
        .ok_or_else(|| Error::SchemaViolation("arguments must be an object".into()))?;
    if let Some(k) = obj.keys().find(|k| *k != "items") {
        return Err(Error::SchemaViolation(format!("unexpected argument `{k}`")));
    }
    let items = obj
        .get("items")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::SchemaViolation("`items` must be an array".into()))?;
    if items.is_empty() {
        return Err(Error::SchemaViolation("`items` must not be empty".into()));
    }
    Ok(items)
}
