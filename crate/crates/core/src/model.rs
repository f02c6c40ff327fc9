//! The project document: assets, tracks, clips and animation instances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::Suggestion;
use crate::chat::ChatSession;
use crate::error::{Error, Result};
use crate::id::{IdGen, IdKind, ObjectId};
use crate::meta::{FieldMap, FieldValue, MetaClassId};
use crate::time::Time;
use crate::tools::OperationLogEntry;

pub type Rgba = [f64; 4];
pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Image,
    Audio,
    Video,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Image => "image",
            Self::Audio => "audio",
            Self::Video => "video",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "image" => Some(Self::Image),
            "audio" => Some(Self::Audio),
            "video" => Some(Self::Video),
            _ => None,
        }
    }

    pub fn is_timed(self) -> bool {
        matches!(self, Self::Audio | Self::Video)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: ObjectId,
    pub kind: AssetKind,
    pub name: String,
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_duration: Option<Time>,
}

impl Asset {
    pub fn validate(&self) -> Result<()> {
        match (self.kind.is_timed(), self.media_duration) {
            (true, Some(d)) if d > Time::ZERO => Ok(()),
            (true, Some(_)) => Err(Error::range("media_duration", "must be positive")),
            (true, None) => Err(Error::range("media_duration", "required for audio and video")),
            (false, Some(_)) => Err(Error::range("media_duration", "only audio and video have one")),
            (false, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Left,
    #[default]
    Center,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStyle {
    pub font_family: String,
    /// Points.
    pub font_size: f64,
    pub color: Rgba,
    /// Normalized canvas coordinates, origin top-left.
    pub position: Point2,
    pub alignment: Alignment,
}

impl Default for TextStyle {
    fn default() -> Self {
        Self {
            font_family: "sans-serif".into(),
            font_size: 48.0,
            color: [1.0, 1.0, 1.0, 1.0],
            position: [0.5, 0.5],
            alignment: Alignment::Center,
        }
    }
}

fn unit(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

impl TextStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.font_size.is_finite() && self.font_size > 0.0) {
            return Err(Error::range("font_size", "must be positive"));
        }
        if !self.color.iter().all(|&c| unit(c)) {
            return Err(Error::range("color", "channels must lie in [0, 1]"));
        }
        if !self.position.iter().all(|&c| unit(c)) {
            return Err(Error::range("position", "must lie in the unit square"));
        }
        Ok(())
    }
}

/// Partial style used by batch edits; `None` leaves a property untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StyleDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub font_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub font_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Rgba>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Alignment>,
}

impl StyleDelta {
    pub fn apply(&self, style: &TextStyle) -> TextStyle {
        TextStyle {
            font_family: self.font_family.clone().unwrap_or_else(|| style.font_family.clone()),
            font_size: self.font_size.unwrap_or(style.font_size),
            color: self.color.unwrap_or(style.color),
            position: self.position.unwrap_or(style.position),
            alignment: self.alignment.unwrap_or(style.alignment),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == StyleDelta::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    Text,
    Video,
    Image,
    Audio,
    Element,
}

impl TrackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Video => "video",
            Self::Image => "image",
            Self::Audio => "audio",
            Self::Element => "element",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(Self::Text),
            "video" => Some(Self::Video),
            "image" => Some(Self::Image),
            "audio" => Some(Self::Audio),
            "element" => Some(Self::Element),
            _ => None,
        }
    }

    pub fn media_kind(self) -> Option<AssetKind> {
        match self {
            Self::Video => Some(AssetKind::Video),
            Self::Image => Some(AssetKind::Image),
            Self::Audio => Some(AssetKind::Audio),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: ObjectId,
    pub kind: TrackKind,
    pub name: String,
    pub order_index: u32,
    pub script_visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClipPayload {
    Text { content: String, style: TextStyle },
    Media { asset_ref: ObjectId, trim_in: Time },
    Element { element_kind: String, params: FieldMap },
}

impl ClipPayload {
    pub fn text(content: impl Into<String>) -> Self {
        ClipPayload::Text { content: content.into(), style: TextStyle::default() }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Text { .. } => "text",
            Self::Media { .. } => "media",
            Self::Element { .. } => "element",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub id: ObjectId,
    pub track_id: ObjectId,
    pub start: Time,
    pub duration: Time,
    pub payload: ClipPayload,
}

impl Clip {
    pub fn end(&self) -> Time {
        self.start + self.duration
    }

    pub fn overlaps(&self, start: Time, end: Time) -> bool {
        self.start < end && start < self.end()
    }

    pub fn text(&self) -> Option<&str> {
        match &self.payload {
            ClipPayload::Text { content, .. } => Some(content),
            _ => None,
        }
    }

    pub fn style(&self) -> Option<&TextStyle> {
        match &self.payload {
            ClipPayload::Text { style, .. } => Some(style),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
    None,
}

impl Direction {
    pub const NAMES: [&'static str; 5] = ["left", "right", "up", "down", "none"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(Self::Left),
            "right" => Some(Self::Right),
            "up" => Some(Self::Up),
            "down" => Some(Self::Down),
            "none" => Some(Self::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    /// Unit vector in canvas space (y grows downward).
    pub fn vector(self) -> Point2 {
        match self {
            Self::Left => [-1.0, 0.0],
            Self::Right => [1.0, 0.0],
            Self::Up => [0.0, -1.0],
            Self::Down => [0.0, 1.0],
            Self::None => [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Easing {
    Linear,
    EaseIn,
    EaseOut,
    EaseInOut,
}

impl Easing {
    pub const ALL: [Easing; 4] = [Easing::Linear, Easing::EaseIn, Easing::EaseOut, Easing::EaseInOut];
    pub const NAMES: [&'static str; 4] = ["linear", "ease_in", "ease_out", "ease_in_out"];

    pub fn parse(s: &str) -> Option<Self> {
        Self::NAMES.iter().position(|n| *n == s).map(|i| Self::ALL[i])
    }

    pub fn as_str(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Enter,
    Emphasis,
    Exit,
}

impl Phase {
    pub const NAMES: [&'static str; 3] = ["enter", "emphasis", "exit"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "enter" => Some(Self::Enter),
            "emphasis" => Some(Self::Emphasis),
            "exit" => Some(Self::Exit),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

/// Standard preset parameters plus any class-specific extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationParams {
    pub duration: Time,
    pub delay: Time,
    pub speed: f64,
    pub direction: Direction,
    pub easing: Easing,
    #[serde(default, skip_serializing_if = "FieldMap::is_empty")]
    pub extra: FieldMap,
}

impl Default for AnimationParams {
    fn default() -> Self {
        Self {
            duration: Time::from_millis(1000),
            delay: Time::ZERO,
            speed: 1.0,
            direction: Direction::None,
            easing: Easing::Linear,
            extra: FieldMap::new(),
        }
    }
}

pub const STANDARD_PARAMS: [&str; 5] = ["duration", "delay", "speed", "direction", "easing"];

impl AnimationParams {
    /// Build from a fully resolved field map (see `MetaRegistry::resolve_fields`).
    pub fn from_fields(fields: &FieldMap) -> Result<Self> {
        let mut p = AnimationParams::default();
        for (name, value) in fields {
            let bad = || Error::range(name, format!("unexpected value {value:?}"));
            match name.as_str() {
                "duration" => p.duration = value.as_time().ok_or_else(bad)?,
                "delay" => p.delay = value.as_time().ok_or_else(bad)?,
                "speed" => p.speed = value.as_f64().ok_or_else(bad)?,
                "direction" => {
                    p.direction = value.as_str().and_then(Direction::parse).ok_or_else(bad)?
                }
                "easing" => p.easing = value.as_str().and_then(Easing::parse).ok_or_else(bad)?,
                _ => {
                    p.extra.insert(name.clone(), value.clone());
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_fields(&self) -> FieldMap {
        let mut m = self.extra.clone();
        m.insert("duration".into(), FieldValue::TimeSeconds(self.duration));
        m.insert("delay".into(), FieldValue::TimeSeconds(self.delay));
        m.insert("speed".into(), FieldValue::Number(self.speed));
        m.insert("direction".into(), FieldValue::Enum(self.direction.as_str().into()));
        m.insert("easing".into(), FieldValue::Enum(self.easing.as_str().into()));
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration <= Time::ZERO {
            return Err(Error::range("duration", "must be positive"));
        }
        if self.delay < Time::ZERO {
            return Err(Error::range("delay", "must not be negative"));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::range("speed", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationInstance {
    pub id: ObjectId,
    pub clip_id: ObjectId,
    pub preset: MetaClassId,
    pub params: AnimationParams,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for Canvas {
    fn default() -> Self {
        Self { width_px: 1920, height_px: 1080 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: ObjectId,
    pub name: String,
    pub canvas: Canvas,
    pub fps: u32,
    pub revision: u64,
    pub assets: BTreeMap<ObjectId, Asset>,
    pub tracks: BTreeMap<ObjectId, Track>,
    pub clips: BTreeMap<ObjectId, Clip>,
    pub animations: BTreeMap<ObjectId, AnimationInstance>,
    #[serde(default)]
    pub suggestions: BTreeMap<ObjectId, Suggestion>,
    #[serde(default)]
    pub sessions: BTreeMap<ObjectId, ChatSession>,
    #[serde(default)]
    pub operation_log: Vec<OperationLogEntry>,
    pub id_gen: IdGen,
}

impl Project {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        let mut id_gen = IdGen::new(seed);
        let id = id_gen.next(IdKind::Proj, |_| false);
        Project {
            id,
            name: name.into(),
            canvas: Canvas::default(),
            fps: 30,
            revision: 0,
            assets: BTreeMap::new(),
            tracks: BTreeMap::new(),
            clips: BTreeMap::new(),
            animations: BTreeMap::new(),
            suggestions: BTreeMap::new(),
            sessions: BTreeMap::new(),
            operation_log: Vec::new(),
            id_gen,
        }
    }

    pub fn contains_id(&self, id: &ObjectId) -> bool {
        *id == self.id
            || self.assets.contains_key(id)
            || self.tracks.contains_key(id)
            || self.clips.contains_key(id)
            || self.animations.contains_key(id)
            || self.suggestions.contains_key(id)
            || self.sessions.contains_key(id)
            || self.sessions.values().any(|s| s.owns_id(id))
    }

    pub fn alloc_id(&mut self, kind: IdKind) -> ObjectId {
        let mut gen = std::mem::replace(&mut self.id_gen, IdGen::new(0));
        let id = gen.next(kind, |id| self.contains_id(id));
        self.id_gen = gen;
        id
    }

    /// Mark one committed mutation.
    pub(crate) fn commit(&mut self) {
        self.revision += 1;
    }

    /// Run `f` against a scratch copy; keep the copy only if `f` succeeds,
    /// committing exactly one revision.
    pub fn transact<T>(&mut self, f: impl FnOnce(&mut Project) -> Result<T>) -> Result<T> {
        let base = self.revision;
        let mut scratch = self.clone();
        let out = f(&mut scratch)?;
        scratch.revision = base + 1;
        *self = scratch;
        Ok(out)
    }

    pub fn track(&self, id: &ObjectId) -> Result<&Track> {
        self.tracks.get(id).ok_or_else(|| Error::UnknownTrack(id.clone()))
    }

    pub fn clip(&self, id: &ObjectId) -> Result<&Clip> {
        self.clips.get(id).ok_or_else(|| Error::UnknownClip(id.clone()))
    }

    pub fn asset(&self, id: &ObjectId) -> Result<&Asset> {
        self.assets.get(id).ok_or_else(|| Error::UnknownAsset(id.clone()))
    }

    pub fn animation(&self, id: &ObjectId) -> Result<&AnimationInstance> {
        self.animations.get(id).ok_or_else(|| Error::UnknownAnimation(id.clone()))
    }

    pub fn clips_on_track<'a>(&'a self, track: &'a ObjectId) -> impl Iterator<Item = &'a Clip> + 'a {
        self.clips.values().filter(move |c| &c.track_id == track)
    }

    pub fn animations_of<'a>(
        &'a self,
        clip: &'a ObjectId,
    ) -> impl Iterator<Item = &'a AnimationInstance> + 'a {
        self.animations.values().filter(move |a| &a.clip_id == clip)
    }

    /// Text tracks flagged for display in the script panel.
    pub fn script_selection(&self) -> BTreeSet<ObjectId> {
        self.tracks
            .values()
            .filter(|t| t.kind == TrackKind::Text && t.script_visible)
            .map(|t| t.id.clone())
            .collect()
    }

    pub fn next_order_index(&self) -> u32 {
        self.tracks.values().map(|t| t.order_index + 1).max().unwrap_or(0)
    }

    /// End of the last clip, or zero for an empty timeline.
    pub fn span(&self) -> Time {
        self.clips.values().map(Clip::end).max().unwrap_or(Time::ZERO)
    }

    pub fn add_track(&mut self, kind: TrackKind, name: impl Into<String>) -> Track {
        let order_index = self.next_order_index();
        self.add_track_at(kind, name, order_index).expect("next order index is free")
    }

    pub fn add_track_at(
        &mut self,
        kind: TrackKind,
        name: impl Into<String>,
        order_index: u32,
    ) -> Result<Track> {
        if self.tracks.values().any(|t| t.order_index == order_index) {
            return Err(Error::OrderIndexTaken(order_index));
        }
        let track = Track {
            id: self.alloc_id(IdKind::Track),
            kind,
            name: name.into(),
            order_index,
            script_visible: kind == TrackKind::Text,
        };
        self.tracks.insert(track.id.clone(), track.clone());
        self.commit();
        Ok(track)
    }

    pub fn add_asset(
        &mut self,
        kind: AssetKind,
        name: impl Into<String>,
        uri: impl Into<String>,
        media_duration: Option<Time>,
    ) -> Result<Asset> {
        let mut asset = Asset {
            id: self.alloc_id(IdKind::Asset),
            kind,
            name: name.into(),
            uri: uri.into(),
            media_duration,
        };
        asset.validate()?;
        if asset.uri.is_empty() {
            asset.uri = format!("assets/{}", asset.id);
        }
        self.assets.insert(asset.id.clone(), asset.clone());
        self.commit();
        Ok(asset)
    }

    /// Full invariant scan.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let mut claim = |id: &ObjectId, kind: IdKind| -> Result<()> {
            if !id.is_kind(kind) {
                return Err(Error::CorruptDocument(format!("{id} is not a {} id", kind.prefix())));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id.clone()));
            }
            Ok(())
        };
        claim(&self.id, IdKind::Proj)?;
        if self.fps == 0 {
            return Err(Error::range("fps", "must be positive"));
        }
        for (key, a) in &self.assets {
            check_key(key, &a.id)?;
            claim(&a.id, IdKind::Asset)?;
            a.validate()?;
        }
        let mut orders = BTreeSet::new();
        for (key, t) in &self.tracks {
            check_key(key, &t.id)?;
            claim(&t.id, IdKind::Track)?;
            if !orders.insert(t.order_index) {
                return Err(Error::OrderIndexTaken(t.order_index));
            }
        }
        for (key, c) in &self.clips {
            check_key(key, &c.id)?;
            claim(&c.id, IdKind::Clip)?;
            let track = self.tracks.get(&c.track_id).ok_or_else(|| {
                Error::DanglingReference(format!("clip {} -> track {}", c.id, c.track_id))
            })?;
            if c.start < Time::ZERO {
                return Err(Error::range("start", "must not be negative"));
            }
            if c.duration <= Time::ZERO {
                return Err(Error::InvalidDuration);
            }
            self.check_payload(track, &c.payload, c.duration)?;
        }
        for (key, a) in &self.animations {
            check_key(key, &a.id)?;
            claim(&a.id, IdKind::Anim)?;
            if !self.clips.contains_key(&a.clip_id) {
                return Err(Error::DanglingReference(format!(
                    "animation {} -> clip {}",
                    a.id, a.clip_id
                )));
            }
            a.params.validate()?;
        }
        for (key, s) in &self.suggestions {
            check_key(key, &s.id)?;
            claim(&s.id, IdKind::Sugg)?;
            if !self.clips.contains_key(&s.target.clip_id) {
                return Err(Error::DanglingReference(format!(
                    "suggestion {} -> clip {}",
                    s.id, s.target.clip_id
                )));
            }
        }
        for (key, s) in &self.sessions {
            check_key(key, &s.id)?;
            claim(&s.id, IdKind::Sess)?;
            for step in &s.steps {
                claim(&step.id, IdKind::Step)?;
            }
            for p in s.prompts() {
                claim(&p.id, IdKind::Prompt)?;
            }
            if s.project_id != self.id {
                return Err(Error::DanglingReference(format!("session {} -> project", s.id)));
            }
        }
        self.check_non_overlap()
    }

    pub(crate) fn check_payload(
        &self,
        track: &Track,
        payload: &ClipPayload,
        duration: Time,
    ) -> Result<()> {
        let mismatch = || {
            Error::PayloadMismatch(format!(
                "{} payload on {} track {}",
                payload.kind_name(),
                track.kind.as_str(),
                track.id
            ))
        };
        match payload {
            ClipPayload::Text { style, .. } => {
                if track.kind != TrackKind::Text {
                    return Err(mismatch());
                }
                style.validate()
            }
            ClipPayload::Media { asset_ref, trim_in } => {
                let want = track.kind.media_kind().ok_or_else(mismatch)?;
                let asset = self.assets.get(asset_ref).ok_or_else(|| {
                    Error::DanglingReference(format!("media clip -> asset {asset_ref}"))
                })?;
                if asset.kind != want {
                    return Err(Error::PayloadMismatch(format!(
                        "{} asset on {} track",
                        asset.kind.as_str(),
                        track.kind.as_str()
                    )));
                }
                if *trim_in < Time::ZERO {
                    return Err(Error::range("trim_in", "must not be negative"));
                }
                if let Some(len) = asset.media_duration {
                    if *trim_in + duration > len {
                        return Err(Error::range("trim_in", "clip runs past the end of its media"));
                    }
                }
                Ok(())
            }
            ClipPayload::Element { .. } => {
                if track.kind != TrackKind::Element {
                    return Err(mismatch());
                }
                Ok(())
            }
        }
    }

    pub(crate) fn check_non_overlap(&self) -> Result<()> {
        let mut by_track: BTreeMap<&ObjectId, Vec<&Clip>> = BTreeMap::new();
        for c in self.clips.values() {
            by_track.entry(&c.track_id).or_default().push(c);
        }
        for clips in by_track.values_mut() {
            clips.sort_by_key(|c| (c.start, c.id.clone()));
            for w in clips.windows(2) {
                if w[1].start < w[0].end() {
                    return Err(Error::Overlap { conflict: w[0].id.clone() });
                }
            }
        }
        Ok(())
    }
}

fn check_key(key: &ObjectId, id: &ObjectId) -> Result<()> {
    if key != id {
        return Err(Error::CorruptDocument(format!("entry {key} holds object {id}")));
    }
    Ok(())
}
