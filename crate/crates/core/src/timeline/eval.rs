//! Pure render-state evaluation over project snapshots.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::easing::ease;
use super::presets::{self, Delta};
use crate::error::{Error, Result};
use crate::id::ObjectId;
use crate::model::{AnimationInstance, Clip, Phase, Point2, Project, TextStyle};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderState {
    pub clip_id: ObjectId,
    pub opacity: f64,
    pub position_offset: Point2,
    pub scale: f64,
    /// Degrees.
    pub rotation: f64,
    pub reveal_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_style: Option<TextStyle>,
}

/// Local progress of `anim` on `clip` at `t` seconds, clamped to [0, 1].
///
/// Enter and emphasis effects start `delay` after the clip start. Exit
/// effects are anchored to the clip end: they finish `delay` before it.
pub fn progress(anim: &AnimationInstance, clip: &Clip, t: f64) -> f64 {
    let p = &anim.params;
    let dur = p.duration.secs();
    let raw = match anim.phase {
        Phase::Enter | Phase::Emphasis => (t - clip.start.secs() - p.delay.secs()) * p.speed / dur,
        Phase::Exit => {
            let origin = clip.end().secs() - p.delay.secs() - dur / p.speed;
            (t - origin) * p.speed / dur
        }
    };
    raw.clamp(0.0, 1.0)
}

fn tidy(x: f64) -> f64 {
    // collapse -0.0 so exported frames are byte-stable
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Fold per-animation deltas onto the base style.
pub fn compose<'a>(
    clip_id: &ObjectId,
    base: Option<&TextStyle>,
    deltas: impl IntoIterator<Item = &'a Delta>,
) -> RenderState {
    let mut opacity = 1.0;
    let mut offset = [0.0, 0.0];
    let mut scale = 1.0;
    let mut rotation = 0.0;
    let mut reveal: f64 = 1.0;
    let mut keep = 1.0;
    for d in deltas {
        opacity *= d.opacity;
        offset[0] += d.offset[0];
        offset[1] += d.offset[1];
        scale *= d.scale;
        rotation += d.rotation;
        reveal = reveal.min(d.reveal);
        keep *= 1.0 - d.tint;
    }
    let effective_style = base.map(|s| {
        let mut s = s.clone();
        for c in &mut s.color[..3] {
            *c = (1.0 - (1.0 - *c) * keep).clamp(0.0, 1.0);
        }
        s
    });
    RenderState {
        clip_id: clip_id.clone(),
        opacity: tidy(opacity.clamp(0.0, 1.0)),
        position_offset: [tidy(offset[0]), tidy(offset[1])],
        scale: tidy(scale),
        rotation: tidy(rotation),
        reveal_fraction: tidy(reveal.clamp(0.0, 1.0)),
        effective_style,
    }
}

pub fn animation_delta(anim: &AnimationInstance, clip: &Clip, t: f64) -> Delta {
    let u = progress(anim, clip, t);
    let e = ease(anim.params.easing, u);
    presets::delta(anim.preset.as_str(), e, anim.params.direction)
}

fn evaluate_with(clip: &Clip, anims: &[&AnimationInstance], t: f64) -> RenderState {
    let deltas: Vec<Delta> = anims.iter().map(|a| animation_delta(a, clip, t)).collect();
    compose(&clip.id, clip.style(), &deltas)
}

fn is_active(clip: &Clip, t: f64) -> bool {
    clip.start.secs() <= t && t < clip.end().secs()
}

/// Render state of one clip at `t` seconds.
pub fn evaluate(p: &Project, clip: &ObjectId, t: f64) -> Result<RenderState> {
    let c = p.clip(clip)?;
    if !t.is_finite() || !is_active(c, t) {
        return Err(Error::OutOfClipRange { t });
    }
    let anims: Vec<&AnimationInstance> = p.animations_of(clip).collect();
    Ok(evaluate_with(c, &anims, t))
}

fn anim_index(p: &Project) -> HashMap<&ObjectId, Vec<&AnimationInstance>> {
    let mut idx: HashMap<&ObjectId, Vec<&AnimationInstance>> = HashMap::new();
    for a in p.animations.values() {
        idx.entry(&a.clip_id).or_default().push(a);
    }
    idx
}

fn snapshot_with(
    p: &Project,
    idx: &HashMap<&ObjectId, Vec<&AnimationInstance>>,
    t: f64,
) -> Vec<RenderState> {
    if !(t >= 0.0) {
        return Vec::new();
    }
    let mut active: Vec<(u32, &Clip)> = p
        .clips
        .values()
        .filter(|c| is_active(c, t))
        .map(|c| (p.tracks.get(&c.track_id).map_or(u32::MAX, |tr| tr.order_index), c))
        .collect();
    active.sort_by(|(oa, a), (ob, b)| (oa, a.start, &a.id).cmp(&(ob, b.start, &b.id)));
    active
        .into_iter()
        .map(|(_, c)| evaluate_with(c, idx.get(&c.id).map_or(&[][..], |v| v), t))
        .collect()
}

/// Every clip active at `t`, ordered by (track order, start, id).
pub fn snapshot_frame(p: &Project, t: f64) -> Vec<RenderState> {
    snapshot_with(p, &anim_index(p), t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub states: Vec<RenderState>,
}

/// Number of frames covering the project span: ceil(span * fps).
pub fn frame_count(p: &Project, fps: u32) -> usize {
    let span = p.span().millis().max(0) as u64;
    (span * fps as u64).div_ceil(1000) as usize
}

/// All frames at `1/fps` steps, evaluated on the parallel pool when enabled.
pub fn render_frames(p: &Project, fps: u32) -> Vec<Frame> {
    let idx = anim_index(p);
    par::map_range(frame_count(p, fps), |k| {
        let t = k as f64 / fps as f64;
        Frame { t, states: snapshot_with(p, &idx, t) }
    })
}

pub fn render_frames_seq(p: &Project, fps: u32) -> Vec<Frame> {
    let idx = anim_index(p);
    par::map_range_seq(frame_count(p, fps), |k| {
        let t = k as f64 / fps as f64;
        Frame { t, states: snapshot_with(p, &idx, t) }
    })
}

/// JSON lines, one frame per line.
pub fn write_frames(frames: &[Frame], mut out: impl Write) -> std::io::Result<()> {
    for f in frames {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
