//! Read-only agent context assembled from one project snapshot.

use serde::{Deserialize, Serialize};

use crate::id::ObjectId;
use crate::model::{AssetKind, ClipPayload, Phase, Project, TrackKind};
use crate::script::project_script;
use crate::tools::OperationLogEntry;

/// Operation-log entries carried into agent prompts.
pub const LOG_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
    /// Tool results, rejections and clarifications fed back to the planner.
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogMessage {
    pub role: Role,
    pub text: String,
}

impl DialogMessage {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Self { role, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub id: ObjectId,
    pub kind: TrackKind,
    pub name: String,
    pub order_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSummary {
    pub id: ObjectId,
    pub track_id: ObjectId,
    pub start: f64,
    pub duration: f64,
    /// Text content, asset id or element kind.
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationSummary {
    pub id: ObjectId,
    pub clip_id: ObjectId,
    pub preset: String,
    pub phase: Phase,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimelineSummary {
    pub tracks: Vec<TrackSummary>,
    pub clips: Vec<ClipSummary>,
    pub animations: Vec<AnimationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSummary {
    pub clip_id: ObjectId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub id: ObjectId,
    pub kind: AssetKind,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentContext {
    pub revision: u64,
    pub dialog: Vec<DialogMessage>,
    pub timeline_elements: TimelineSummary,
    pub text_content: Vec<LineSummary>,
    pub operation_log: Vec<OperationLogEntry>,
    pub assets: Vec<AssetSummary>,
    /// What this particular request is about (target line, anchor, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
}

impl AgentContext {
    /// Snapshot `p`. The script covers the tracks currently shown in the
    /// script panel.
    pub fn from_project(p: &Project) -> Self {
        let mut tracks: Vec<_> = p
            .tracks
            .values()
            .map(|t| TrackSummary {
                id: t.id.clone(),
                kind: t.kind,
                name: t.name.clone(),
                order_index: t.order_index,
            })
            .collect();
        tracks.sort_by_key(|t| t.order_index);
        let mut clips: Vec<_> = p
            .clips
            .values()
            .map(|c| ClipSummary {
                id: c.id.clone(),
                track_id: c.track_id.clone(),
                start: c.start.secs(),
                duration: c.duration.secs(),
                content: match &c.payload {
                    ClipPayload::Text { content, .. } => content.clone(),
                    ClipPayload::Media { asset_ref, .. } => asset_ref.to_string(),
                    ClipPayload::Element { element_kind, .. } => element_kind.clone(),
                },
            })
            .collect();
        clips.sort_by(|a, b| (a.start, &a.id).partial_cmp(&(b.start, &b.id)).expect("finite"));
        let animations = p
            .animations
            .values()
            .map(|a| AnimationSummary {
                id: a.id.clone(),
                clip_id: a.clip_id.clone(),
                preset: a.preset.0.clone(),
                phase: a.phase,
            })
            .collect();
        let text_content = project_script(p, &p.script_selection())
            .map(|doc| {
                doc.lines
                    .into_iter()
                    .map(|l| LineSummary { clip_id: l.clip_id, text: l.text })
                    .collect()
            })
            .unwrap_or_default();
        let skip = p.operation_log.len().saturating_sub(LOG_WINDOW);
        AgentContext {
            revision: p.revision,
            dialog: Vec::new(),
            timeline_elements: TimelineSummary { tracks, clips, animations },
            text_content,
            operation_log: p.operation_log[skip..].to_vec(),
            assets: p
                .assets
                .values()
                .map(|a| AssetSummary { id: a.id.clone(), kind: a.kind, name: a.name.clone() })
                .collect(),
            focus: None,
        }
    }

    pub fn with_dialog(mut self, dialog: Vec<DialogMessage>) -> Self {
        self.dialog = dialog;
        self
    }

    pub fn with_focus(mut self, focus: impl Into<String>) -> Self {
        self.focus = Some(focus.into());
        self
    }

    /// Whether `id` names an object visible in this snapshot.
    pub fn knows(&self, id: &ObjectId) -> bool {
        let t = &self.timeline_elements;
        t.tracks.iter().any(|x| &x.id == id)
            || t.clips.iter().any(|x| &x.id == id)
            || t.animations.iter().any(|x| &x.id == id)
            || self.assets.iter().any(|x| &x.id == id)
    }
}
