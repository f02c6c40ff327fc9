use std::fmt;

use serde::{Deserialize, Serialize};

use crate::id::ObjectId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Network,
    Timeout,
    MalformedOutput,
    /// The scripted mock ran out of responses.
    Exhausted,
}

impl fmt::Display for ProviderErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Network => "network",
            Self::Timeout => "timeout",
            Self::MalformedOutput => "malformed_output",
            Self::Exhausted => "exhausted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("provider error ({kind}): {message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::MalformedOutput, message)
    }
}

/// Every failure the engine can report. Each variant maps onto one stable
/// wire code (see [`Error::code`]).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("class `{0}` is already registered")]
    DuplicateClass(String),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` has no field `{field}`")]
    UnknownField { class: String, field: String },
    #[error("value for `{field}` out of range: {reason}")]
    RangeViolation { field: String, reason: String },
    #[error("corrupt document: {0}")]
    CorruptDocument(String),
    #[error("unsupported schema version `{0}`")]
    UnsupportedSchemaVersion(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("placement overlaps clip {conflict}")]
    Overlap { conflict: ObjectId },
    #[error("unknown track {0}")]
    UnknownTrack(ObjectId),
    #[error("unknown clip {0}")]
    UnknownClip(ObjectId),
    #[error("unknown asset {0}")]
    UnknownAsset(ObjectId),
    #[error("unknown animation {0}")]
    UnknownAnimation(ObjectId),
    #[error("asset {0} is referenced by clips")]
    AssetInUse(ObjectId),
    #[error("payload mismatch: {0}")]
    PayloadMismatch(String),
    #[error("duration must be positive")]
    InvalidDuration,
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("clips are not adjacent")]
    NotAdjacent,
    #[error("clips are on different tracks")]
    TrackMismatch,
    #[error("unknown animation preset `{0}`")]
    UnknownPreset(String),
    #[error("time {t}s is outside the clip")]
    OutOfClipRange { t: f64 },
    #[error("track order index {0} is already used")]
    OrderIndexTaken(u32),
    #[error("track {0} is not a text track")]
    NonTextTrack(ObjectId),
    #[error("clip {0} is not a text clip")]
    NotTextClip(ObjectId),
    #[error("character offset {offset} outside (0, {len})")]
    OffsetOutOfRange { offset: usize, len: usize },
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("line range is empty")]
    EmptyRange,
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("unknown session {0}")]
    UnknownSession(ObjectId),
    #[error("session is busy")]
    SessionBusy,
    #[error("wrong state: expected {expected}, session is {actual}")]
    WrongState { expected: String, actual: String },
    #[error("invalid answer: {0}")]
    InvalidAnswer(String),
    #[error("unknown suggestion {0}")]
    UnknownSuggestion(ObjectId),
    #[error("suggestion {0} is no longer pending")]
    SuggestionNotPending(ObjectId),
    #[error("suggestion {0} is stale: its target changed")]
    StaleSuggestion(ObjectId),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Self::DuplicateClass(_) => "duplicate_class",
            Self::InvalidField { .. } => "invalid_field",
            Self::UnknownClass(_) => "unknown_class",
            Self::UnknownField { .. } => "unknown_field",
            Self::RangeViolation { .. } => "range_violation",
            Self::CorruptDocument(_) => "corrupt_document",
            Self::UnsupportedSchemaVersion(_) => "unsupported_schema_version",
            Self::DanglingReference(_) => "dangling_reference",
            Self::DuplicateId(_) => "duplicate_id",
            Self::Overlap { .. } => "overlap",
            Self::UnknownTrack(_) => "unknown_track",
            Self::UnknownClip(_) => "unknown_clip",
            Self::UnknownAsset(_) => "unknown_asset",
            Self::UnknownAnimation(_) => "unknown_animation",
            Self::AssetInUse(_) => "asset_in_use",
            Self::PayloadMismatch(_) => "payload_mismatch",
            Self::InvalidDuration => "invalid_duration",
            Self::OutOfRange(_) => "out_of_range",
            Self::NotAdjacent => "not_adjacent",
            Self::TrackMismatch => "track_mismatch",
            Self::UnknownPreset(_) => "unknown_preset",
            Self::OutOfClipRange { .. } => "out_of_clip_range",
            Self::OrderIndexTaken(_) => "order_index_taken",
            Self::NonTextTrack(_) => "non_text_track",
            Self::NotTextClip(_) => "not_text_clip",
            Self::OffsetOutOfRange { .. } => "offset_out_of_range",
            Self::InvalidAnchor(_) => "invalid_anchor",
            Self::EmptyRange => "empty_range",
            Self::UnknownTool(_) => "unknown_tool",
            Self::SchemaViolation(_) => "schema_violation",
            Self::Provider(_) => "provider_error",
            Self::UnknownProject(_) => "unknown_project",
            Self::UnknownSession(_) => "unknown_session",
            Self::SessionBusy => "session_busy",
            Self::WrongState { .. } => "wrong_state",
            Self::InvalidAnswer(_) => "invalid_answer",
            Self::UnknownSuggestion(_) => "unknown_suggestion",
            Self::SuggestionNotPending(_) => "suggestion_not_pending",
            Self::StaleSuggestion(_) => "stale_suggestion",
            Self::Io(_) => "io_error",
        }
    }

    /// All wire codes, in declaration order.
    pub const CODES: &'static [&'static str] = &[
        "duplicate_class",
        "invalid_field",
        "unknown_class",
        "unknown_field",
        "range_violation",
        "corrupt_document",
        "unsupported_schema_version",
        "dangling_reference",
        "duplicate_id",
        "overlap",
        "unknown_track",
        "unknown_clip",
        "unknown_asset",
        "unknown_animation",
        "asset_in_use",
        "payload_mismatch",
        "invalid_duration",
        "out_of_range",
        "not_adjacent",
        "track_mismatch",
        "unknown_preset",
        "out_of_clip_range",
        "order_index_taken",
        "non_text_track",
        "not_text_clip",
        "offset_out_of_range",
        "invalid_anchor",
        "empty_range",
        "unknown_tool",
        "schema_violation",
        "provider_error",
        "unknown_project",
        "unknown_session",
        "session_busy",
        "wrong_state",
        "invalid_answer",
        "unknown_suggestion",
        "suggestion_not_pending",
        "stale_suggestion",
        "io_error",
    ];

    /// Structured detail for API error bodies.
    pub fn detail(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            Self::Overlap { conflict } => json!({ "conflict": conflict }),
            Self::UnknownField { class, field } => json!({ "class": class, "field": field }),
            Self::RangeViolation { field, .. } | Self::InvalidField { field, .. } => {
                json!({ "field": field })
            }
            Self::OffsetOutOfRange { offset, len } => json!({ "offset": offset, "len": len }),
            Self::Provider(e) => json!({ "kind": e.kind }),
            Self::WrongState { expected, actual } => {
                json!({ "expected": expected, "actual": actual })
            }
            Self::UnknownTrack(id)
            | Self::UnknownClip(id)
            | Self::UnknownAsset(id)
            | Self::UnknownAnimation(id)
            | Self::AssetInUse(id)
            | Self::NonTextTrack(id)
            | Self::NotTextClip(id)
            | Self::DuplicateId(id)
            | Self::UnknownSession(id)
            | Self::UnknownSuggestion(id)
            | Self::SuggestionNotPending(id)
            | Self::StaleSuggestion(id) => json!({ "id": id }),
            _ => json!({}),
        }
    }

    pub(crate) fn range(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::RangeViolation { field: field.into(), reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
