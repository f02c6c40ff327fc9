//! `@{kind:id}` reference tokens in chat messages.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::id::{IdKind, ObjectId};
use crate::model::Project;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceToken {
    pub raw: String,
    pub kind: IdKind,
    /// The id as written, which may not even be well formed.
    pub id: String,
    /// Set when the id names a live object of `kind`.
    pub resolved: Option<ObjectId>,
}

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\{([a-z]+):([^{}\s]+)\}").expect("valid pattern"))
}

/// Live objects that a message may point at.
pub(crate) fn is_live(p: &Project, id: &ObjectId) -> bool {
    match id.kind() {
        IdKind::Proj => *id == p.id,
        IdKind::Asset => p.assets.contains_key(id),
        IdKind::Track => p.tracks.contains_key(id),
        IdKind::Clip => p.clips.contains_key(id),
        IdKind::Anim => p.animations.contains_key(id),
        IdKind::Sugg => p.suggestions.contains_key(id),
        IdKind::Sess => p.sessions.contains_key(id),
        IdKind::Step | IdKind::Prompt => p.contains_id(id),
    }
}

/// Every well-formed token in `text`, in order. Unknown kinds and stray `@`
/// are left as plain text.
pub fn resolve_references(text: &str, p: &Project) -> Vec<ReferenceToken> {
    pattern()
        .captures_iter(text)
        .filter_map(|c| {
            let kind = IdKind::from_prefix(&c[1])?;
            let id = c[2].to_string();
            let resolved = id.parse::<ObjectId>().ok().filter(|o| o.kind() == kind && is_live(p, o));
            Some(ReferenceToken { raw: c[0].to_string(), kind, id, resolved })
        })
        .collect()
}
