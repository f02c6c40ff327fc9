//! Reflective class definitions for every editable object kind.
//!
//! A [`MetaClass`] lists typed, range-checked fields with defaults and
//! human-readable descriptions. The same definitions drive instance creation,
//! inspector schemas ([`MetaRegistry::reflect_schema`]) and the function-calling
//! tool schemas derived in [`crate::tools`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::id::{IdKind, ObjectId};
use crate::time::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Number,
    Integer,
    String,
    Color,
    Enum,
    TimeSeconds,
    Point2dNormalized,
    AssetRef,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRange {
    /// Closed interval, in seconds for `time_seconds` fields.
    Interval { min: f64, max: f64 },
    Allowed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FieldValue {
    Number(f64),
    Integer(i64),
    String(String),
    Color([f64; 4]),
    Enum(String),
    TimeSeconds(Time),
    Point2dNormalized([f64; 2]),
    AssetRef(Option<ObjectId>),
    Boolean(bool),
}

pub type FieldMap = BTreeMap<String, FieldValue>;

impl FieldValue {
    pub fn kind(&self) -> FieldKind {
        match self {
            Self::Number(_) => FieldKind::Number,
            Self::Integer(_) => FieldKind::Integer,
            Self::String(_) => FieldKind::String,
            Self::Color(_) => FieldKind::Color,
            Self::Enum(_) => FieldKind::Enum,
            Self::TimeSeconds(_) => FieldKind::TimeSeconds,
            Self::Point2dNormalized(_) => FieldKind::Point2dNormalized,
            Self::AssetRef(_) => FieldKind::AssetRef,
            Self::Boolean(_) => FieldKind::Boolean,
        }
    }

    /// Plain JSON form used in tool arguments and schemas.
    pub fn to_json(&self) -> Value {
        match self {
            Self::Number(v) => json!(v),
            Self::Integer(v) => json!(v),
            Self::String(v) | Self::Enum(v) => json!(v),
            Self::Color(c) => json!(c),
            Self::TimeSeconds(t) => json!(t.secs()),
            Self::Point2dNormalized(p) => json!(p),
            Self::AssetRef(r) => json!(r),
            Self::Boolean(b) => json!(b),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Number(v) => Some(*v),
            Self::Integer(v) => Some(*v as f64),
            Self::TimeSeconds(t) => Some(t.secs()),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::String(s) | Self::Enum(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_time(&self) -> Option<Time> {
        match self {
            Self::TimeSeconds(t) => Some(*t),
            _ => None,
        }
    }
}

/// Why a JSON value could not become a field value.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldError {
    /// Wrong JSON shape for the field kind.
    Type(String),
    /// Right shape, outside the declared range.
    Range(String),
}

impl FieldError {
    pub fn into_error(self, field: &str) -> Error {
        match self {
            FieldError::Type(reason) => Error::SchemaViolation(format!("`{field}`: {reason}")),
            FieldError::Range(reason) => Error::range(field, reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaField {
    pub name: String,
    pub value_kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<FieldRange>,
    pub default: FieldValue,
    pub description: String,
    pub tooltip: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl MetaField {
    pub fn new(name: &str, value_kind: FieldKind, default: FieldValue) -> Self {
        Self {
            name: name.to_string(),
            value_kind,
            range: None,
            default,
            description: String::new(),
            tooltip: String::new(),
            unit: None,
        }
    }

    pub fn interval(mut self, min: f64, max: f64) -> Self {
        self.range = Some(FieldRange::Interval { min, max });
        self
    }

    pub fn allowed(mut self, values: &[&str]) -> Self {
        self.range = Some(FieldRange::Allowed(values.iter().map(|s| s.to_string()).collect()));
        self
    }

    pub fn describe(mut self, description: &str, tooltip: &str) -> Self {
        self.description = description.to_string();
        self.tooltip = tooltip.to_string();
        self
    }

    pub fn unit(mut self, unit: &str) -> Self {
        self.unit = Some(unit.to_string());
        self
    }

    pub fn allowed_values(&self) -> Option<&[String]> {
        match &self.range {
            Some(FieldRange::Allowed(v)) => Some(v),
            _ => None,
        }
    }

    /// Check a typed value against kind and range.
    pub fn check(&self, value: &FieldValue) -> std::result::Result<(), FieldError> {
        if value.kind() != self.value_kind {
            return Err(FieldError::Type(format!(
                "expected {:?}, got {:?}",
                self.value_kind,
                value.kind()
            )));
        }
        let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        match value {
            FieldValue::Number(v) if !v.is_finite() => {
                return Err(FieldError::Range("must be finite".into()))
            }
            FieldValue::Color(c) if !c.iter().all(|&x| unit(x)) => {
                return Err(FieldError::Range("color channels must lie in [0, 1]".into()))
            }
            FieldValue::Point2dNormalized(p) if !p.iter().all(|&x| unit(x)) => {
                return Err(FieldError::Range("point must lie in the unit square".into()))
            }
            _ => {}
        }
        match (&self.range, value) {
            (Some(FieldRange::Interval { min, max }), v) => {
                if let Some(x) = v.as_f64() {
                    if x < *min || x > *max {
                        return Err(FieldError::Range(format!("{x} not in [{min}, {max}]")));
                    }
                }
            }
            (Some(FieldRange::Allowed(allowed)), v) => {
                if let Some(s) = v.as_str() {
                    if !allowed.iter().any(|a| a == s) {
                        return Err(FieldError::Range(format!("`{s}` not one of {allowed:?}")));
                    }
                }
            }
            (None, _) => {}
        }
        Ok(())
    }

    /// Parse a plain JSON argument into a checked field value.
    pub fn parse_json(&self, v: &Value) -> std::result::Result<FieldValue, FieldError> {
        let ty = |what: &str| FieldError::Type(format!("expected {what}"));
        let num = |v: &Value| v.as_f64().ok_or_else(|| ty("a number"));
        let array = |v: &Value, n: usize| -> std::result::Result<Vec<f64>, FieldError> {
            let arr = v.as_array().filter(|a| a.len() == n).ok_or_else(|| {
                FieldError::Type(format!("expected an array of {n} numbers"))
            })?;
            arr.iter().map(|x| x.as_f64().ok_or_else(|| ty("numeric array items"))).collect()
        };
        let value = match self.value_kind {
            FieldKind::Number => FieldValue::Number(num(v)?),
            FieldKind::Integer => FieldValue::Integer(
                v.as_i64()
                    .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 9e15).map(|f| f as i64))
                    .ok_or_else(|| ty("an integer"))?,
            ),
            FieldKind::String => FieldValue::String(v.as_str().ok_or_else(|| ty("a string"))?.into()),
            FieldKind::Enum => FieldValue::Enum(v.as_str().ok_or_else(|| ty("a string"))?.into()),
            FieldKind::TimeSeconds => FieldValue::TimeSeconds(Time::from_secs(num(v)?)),
            FieldKind::Boolean => FieldValue::Boolean(v.as_bool().ok_or_else(|| ty("a boolean"))?),
            FieldKind::Color => {
                let c = array(v, 4)?;
                FieldValue::Color([c[0], c[1], c[2], c[3]])
            }
            FieldKind::Point2dNormalized => {
                let p = array(v, 2)?;
                FieldValue::Point2dNormalized([p[0], p[1]])
            }
            FieldKind::AssetRef => match v {
                Value::Null => FieldValue::AssetRef(None),
                Value::String(s) => {
                    let id: ObjectId =
                        s.parse().map_err(|_| ty("an asset id like `asset_xxxxxxxx`"))?;
                    if !id.is_kind(IdKind::Asset) {
                        return Err(ty("an asset id"));
                    }
                    FieldValue::AssetRef(Some(id))
                }
                _ => return Err(ty("an asset id or null")),
            },
        };
        // Range checks on the unrounded number so e.g. 0.0004 s does not
        // sneak past a 0.001 s minimum after rounding.
        if let (FieldKind::TimeSeconds, Some(FieldRange::Interval { min, max })) =
            (self.value_kind, &self.range)
        {
            let x = num(v)?;
            if x < *min || x > *max {
                return Err(FieldError::Range(format!("{x} not in [{min}, {max}]")));
            }
        }
        self.check(&value)?;
        Ok(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Asset,
    TimelineElement,
    AnimationEffect,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetaClassId(pub String);

impl MetaClassId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MetaClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MetaClassId {
    fn from(s: &str) -> Self {
        MetaClassId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaClass {
    pub name: String,
    pub category: Category,
    /// Prefix of ids allocated for instances of this class.
    pub id_kind: IdKind,
    pub fields: Vec<MetaField>,
}

impl MetaClass {
    pub fn new(name: &str, category: Category, fields: Vec<MetaField>) -> Self {
        let id_kind = match category {
            Category::Asset => IdKind::Asset,
            Category::TimelineElement => IdKind::Clip,
            Category::AnimationEffect => IdKind::Anim,
        };
        Self { name: name.to_string(), category, id_kind, fields }
    }

    pub fn with_id_kind(mut self, kind: IdKind) -> Self {
        self.id_kind = kind;
        self
    }

    pub fn field(&self, name: &str) -> Option<&MetaField> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn id(&self) -> MetaClassId {
        MetaClassId(self.name.clone())
    }

    fn validate(&self) -> Result<()> {
        let invalid = |field: &str, reason: &str| Error::InvalidField {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !is_identifier(&self.name) {
            return Err(invalid(&self.name, "class name must be an identifier"));
        }
        for (i, f) in self.fields.iter().enumerate() {
            if !is_identifier(&f.name) {
                return Err(invalid(&f.name, "field name must be an identifier"));
            }
            if self.fields[..i].iter().any(|g| g.name == f.name) {
                return Err(invalid(&f.name, "duplicate field name"));
            }
            if f.value_kind == FieldKind::Enum
                && f.allowed_values().map_or(true, |v| v.is_empty())
            {
                return Err(invalid(&f.name, "enum field needs a non-empty allowed-value list"));
            }
            if let Some(FieldRange::Interval { min, max }) = &f.range {
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    return Err(invalid(&f.name, "interval bounds must be finite and ordered"));
                }
            }
            f.check(&f.default).map_err(|e| match e {
                FieldError::Type(r) | FieldError::Range(r) => {
                    invalid(&f.name, &format!("default does not satisfy the field: {r}"))
                }
            })?;
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A validated, free-standing instance of a meta class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: ObjectId,
    pub class: MetaClassId,
    pub fields: FieldMap,
}

impl Instance {
    pub fn get(&self, field: &str) -> Option<&FieldValue> {
        self.fields.get(field)
    }
}

/// Inspector/tool-facing description of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<FieldRange>,
    pub default: Value,
    pub description: String,
    pub tooltip: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchema {
    pub class: MetaClassId,
    pub category: Category,
    pub fields: Vec<FieldSchema>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaRegistry {
    classes: BTreeMap<String, MetaClass>,
}

impl MetaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: MetaClass) -> Result<MetaClassId> {
        if self.classes.contains_key(&def.name) {
            return Err(Error::DuplicateClass(def.name));
        }
        def.validate()?;
        let id = def.id();
        self.classes.insert(def.name.clone(), def);
        Ok(id)
    }

    pub fn get(&self, class: &str) -> Result<&MetaClass> {
        self.classes.get(class).ok_or_else(|| Error::UnknownClass(class.to_string()))
    }

    pub fn contains(&self, class: &str) -> bool {
        self.classes.contains_key(class)
    }

    /// Classes in name order.
    pub fn classes(&self) -> impl Iterator<Item = &MetaClass> {
        self.classes.values()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Validate overrides against `class` and fill unset fields with defaults.
    pub fn resolve_fields(&self, class: &str, overrides: &FieldMap) -> Result<FieldMap> {
        let def = self.get(class)?;
        for (name, value) in overrides {
            let field = def.field(name).ok_or_else(|| Error::UnknownField {
                class: class.to_string(),
                field: name.clone(),
            })?;
            field.check(value).map_err(|e| match e {
                // a typed override of the wrong kind is as much a range
                // failure as an out-of-bounds number here
                FieldError::Type(r) | FieldError::Range(r) => Error::range(name, r),
            })?;
        }
        Ok(def
            .fields
            .iter()
            .map(|f| {
                let v = overrides.get(&f.name).cloned().unwrap_or_else(|| f.default.clone());
                (f.name.clone(), v)
            })
            .collect())
    }

    /// Factory: a fresh instance with defaults for every unset field.
    pub fn instantiate(
        &self,
        class: &str,
        overrides: &FieldMap,
        alloc: impl FnOnce(IdKind) -> ObjectId,
    ) -> Result<Instance> {
        let fields = self.resolve_fields(class, overrides)?;
        let def = self.get(class)?;
        Ok(Instance { id: alloc(def.id_kind), class: def.id(), fields })
    }

    pub fn reflect_schema(&self, class: &str) -> Result<ParameterSchema> {
        let def = self.get(class)?;
        Ok(ParameterSchema {
            class: def.id(),
            category: def.category,
            fields: def
                .fields
                .iter()
                .map(|f| FieldSchema {
                    name: f.name.clone(),
                    kind: f.value_kind,
                    range: f.range.clone(),
                    default: f.default.to_json(),
                    description: f.description.clone(),
                    tooltip: f.tooltip.clone(),
                    unit: f.unit.clone(),
                })
                .collect(),
        })
    }
}
