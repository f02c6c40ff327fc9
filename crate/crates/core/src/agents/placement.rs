use std::collections::BTreeSet;

use super::Agents;
use crate::context::AgentContext;
use crate::error::Result;
use crate::id::ObjectId;
use crate::llm::{ProviderRequest, ProviderResponse, TemplateId};
use crate::meta::MetaRegistry;
use crate::model::Project;
use crate::script::{plan_placement, Anchor, PlacementDecision, PlacementStrategy};
use crate::tools::dispatch::append_log;
use crate::tools::{Actor, DispatchCtx, Outcome};

fn ask(agents: &Agents, reg: &MetaRegistry, p: &Project, text: &str, anchor: &Anchor) -> Result<PlacementStrategy> {
    let gw = agents.gateway().expect("llm mode");
    let ctx = AgentContext::from_project(p).with_focus(format!(
        "new line {text:?}, anchor {}",
        serde_json::to_string(anchor).expect("anchor serializes")
    ));
    let req = ProviderRequest::new(TemplateId::ClipStrategy, ctx)
        .with_constraint("strategy", PlacementStrategy::ALL.map(PlacementStrategy::as_str));
    match gw.complete(reg, &req)? {
        ProviderResponse::Structured { document } => {
            let s = document["strategy"].as_str().and_then(PlacementStrategy::parse);
            Ok(s.expect("constraint checked by the gateway"))
        }
        _ => unreachable!("gateway only passes structured answers for clip_strategy"),
    }
}

/// Choose where a new script line goes. In rule mode, and whenever the model
/// fails or picks an unusable strategy, the line goes right after the anchor
/// on the same track; such fallbacks are logged.
pub fn propose_clip_placement(
    agents: &Agents,
    reg: &MetaRegistry,
    p: &mut Project,
    selected: &BTreeSet<ObjectId>,
    text: &str,
    anchor: &Anchor,
) -> Result<PlacementDecision> {
    let fallback = |p: &Project| plan_placement(p, selected, anchor, PlacementStrategy::SequentialSameTrack, None);
    if agents.is_rule_mode() {
        return fallback(p);
    }
    // a bad anchor is the caller's error, not a reason to fall back
    fallback(p)?;
    let chosen = ask(agents, reg, p, text, anchor).and_then(|s| plan_placement(p, selected, anchor, s, None));
    match chosen {
        Ok(d) => Ok(d),
        Err(e) => {
            tracing::warn!(error = %e, "placement agent failed, using sequential placement");
            let detail = format!("{}: {e}; fell back to {}", e.code(), PlacementStrategy::SequentialSameTrack.as_str());
            let args = serde_json::json!({ "text": text, "anchor": anchor });
            append_log(p, &DispatchCtx::new(Actor::InlineAgent), "propose_clip_placement", &args, Outcome::Error, detail);
            fallback(p)
        }
    }
}
