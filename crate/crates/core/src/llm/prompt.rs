//! Prompt templates. Rendering is a pure function of the template and the
//! context.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{TemplateId, CLARIFY_TOOL};
use crate::agents::semantics::MAPPING_TABLE;
use crate::context::{AgentContext, LOG_WINDOW};

/// Script text budget, in characters. Older lines are dropped first.
pub const SCRIPT_CHAR_LIMIT: usize = 4000;

pub const MAPPING_HEADER: &str = "## Semantic-animation mapping";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub system: String,
    pub user: String,
}

fn instructions(t: TemplateId) -> &'static str {
    match t {
        TemplateId::IntentComprehension => {
            "You are the editing agent of a text-animation editor. Read the user's request and \
             the project state, then propose exactly one next step by calling one tool. Call a \
             query tool when you need information. When the request is ambiguous call the \
             `clarify` tool with a question, the candidate object ids and what you need \
             (selection, parameters or upload). When the request is fully done, answer with a \
             short plain-text summary and no tool call."
        }
        TemplateId::ElementModification => {
            "Continue the edit. Earlier steps, their results, rejections and clarifications are \
             in the dialog. Propose exactly one next tool call, ask with `clarify`, or reply with \
             plain text when the request is complete. Do not repeat a rejected step unchanged."
        }
        TemplateId::TextRefinement => {
            "Review the focused script line for spelling, grammar and clarity. Reply with JSON \
             {\"revisions\": [{\"start\": int, \"end\": int, \"replacement\": str, \"reason\": str}]} \
             where start/end are character offsets into the line. Return an empty list when the \
             line is fine."
        }
        TemplateId::SemanticMatching => {
            "Recommend one preset animation for the focused script line, following the mapping \
             below. Reply with JSON {\"preset\": str, \"params\": {...}, \"reason\": str}. The \
             preset must be one of the catalog names."
        }
        TemplateId::ClipStrategy => {
            "A new script line is being inserted next to the focused anchor. Choose how its clip \
             is placed: sequential_same_track (after the anchor on its track), \
             parallel_adjusted_timing (same start on another track, shifting that track) or \
             parallel_new_track (same start on a new track). Reply with JSON \
             {\"strategy\": str, \"reason\": str} and optionally \"track_id\"."
        }
        TemplateId::InstructionSuggestions => {
            "Suggest up to five short next instructions the user might give, tailored to the \
             project state. Reply with JSON {\"suggestions\": [str]}; each at most 120 characters."
        }
    }
}

/// The last `SCRIPT_CHAR_LIMIT` characters of the rendered script.
fn script_section(ctx: &AgentContext) -> String {
    let mut s = String::new();
    for line in &ctx.text_content {
        let _ = writeln!(s, "[{}] {}", line.clip_id, line.text);
    }
    let n = s.chars().count();
    if n <= SCRIPT_CHAR_LIMIT {
        return s;
    }
    let cut = s.char_indices().nth(n - SCRIPT_CHAR_LIMIT).map_or(0, |(i, _)| i);
    format!("(earlier lines omitted)\n{}", &s[cut..])
}

pub fn assemble_prompt(t: TemplateId, ctx: &AgentContext) -> PromptDocument {
    let mut system = String::new();
    let _ = writeln!(system, "{}", instructions(t));
    if t.expects_tools() {
        let _ = writeln!(
            system,
            "The reserved tool `{CLARIFY_TOOL}` takes {{question, candidates, needed}}."
        );
    }
    if t == TemplateId::SemanticMatching {
        let _ = writeln!(system, "\n{MAPPING_HEADER}");
        for (tone, preset, note) in MAPPING_TABLE {
            let _ = writeln!(system, "- {tone}: {preset} ({note})");
        }
        let _ = writeln!(system, "- font size scale = 1 + 0.5 * importance; speed = 1 + importance");
    }

    let mut user = String::new();
    let _ = writeln!(user, "## Project revision\n{}", ctx.revision);
    let _ = writeln!(
        user,
        "\n## Timeline\n{}",
        serde_json::to_string(&ctx.timeline_elements).expect("summary serializes")
    );
    let _ = writeln!(user, "\n## Script\n{}", script_section(ctx));
    let _ = writeln!(user, "## Recent operations");
    let skip = ctx.operation_log.len().saturating_sub(LOG_WINDOW);
    for e in &ctx.operation_log[skip..] {
        let _ = writeln!(
            user,
            "#{} {:?} {} {} {:?} {}",
            e.seq,
            e.actor,
            e.tool,
            serde_json::to_string(&e.args).expect("json"),
            e.outcome,
            e.detail
        );
    }
    let _ = writeln!(user, "\n## Assets");
    for a in &ctx.assets {
        let _ = writeln!(user, "[{}] {} {}", a.id, a.kind.as_str(), a.name);
    }
    if !ctx.dialog.is_empty() {
        let _ = writeln!(user, "\n## Dialog");
        for m in &ctx.dialog {
            let _ = writeln!(user, "{:?}: {}", m.role, m.text);
        }
    }
    if let Some(f) = &ctx.focus {
        let _ = writeln!(user, "\n## Focus\n{f}");
    }
    PromptDocument { system, user }
}
