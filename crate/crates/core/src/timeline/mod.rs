//! Timeline editing operations. Every mutating function validates first and
//! leaves the project untouched on error; on success it commits exactly one
//! revision.

pub mod easing;
pub mod eval;
pub mod presets;

pub use eval::{evaluate, render_frames, snapshot_frame, Frame, RenderState};

use crate::error::{Error, Result};
use crate::id::{IdKind, ObjectId};
use crate::meta::{Category, FieldMap, MetaRegistry};
use crate::model::{
    AnimationInstance, AnimationParams, Clip, ClipPayload, Phase, Project, Track, TrackKind,
};
use crate::time::Time;

/// First clip on `track` intersecting `[start, end)`, ignoring `skip`.
pub fn find_overlap(
    p: &Project,
    track: &ObjectId,
    start: Time,
    end: Time,
    skip: &[&ObjectId],
) -> Option<ObjectId> {
    p.clips_on_track(track)
        .filter(|c| !skip.contains(&&c.id) && c.overlaps(start, end))
        .min_by_key(|c| (c.start, c.id.clone()))
        .map(|c| c.id.clone())
}

/// Check a clip as it would stand after a write.
pub(crate) fn check_clip(p: &Project, clip: &Clip) -> Result<()> {
    let track = p.track(&clip.track_id)?;
    if clip.start < Time::ZERO {
        return Err(Error::range("start", "must not be negative"));
    }
    if clip.duration <= Time::ZERO {
        return Err(Error::InvalidDuration);
    }
    if let ClipPayload::Media { asset_ref, .. } = &clip.payload {
        p.asset(asset_ref)?;
    }
    p.check_payload(track, &clip.payload, clip.duration)?;
    if let Some(conflict) = find_overlap(p, &clip.track_id, clip.start, clip.end(), &[&clip.id]) {
        return Err(Error::Overlap { conflict });
    }
    Ok(())
}

pub fn add_clip(
    p: &mut Project,
    track: &ObjectId,
    start: Time,
    duration: Time,
    payload: ClipPayload,
) -> Result<Clip> {
    p.track(track)?;
    let mut clip = Clip {
        // placeholder until validation passes, so a rejected add burns no id
        id: p.id.clone(),
        track_id: track.clone(),
        start,
        duration,
        payload,
    };
    check_clip(p, &clip)?;
    clip.id = p.alloc_id(IdKind::Clip);
    p.clips.insert(clip.id.clone(), clip.clone());
    p.commit();
    Ok(clip)
}

/// Replace a clip wholesale after validating the new placement and payload.
pub fn replace_clip(p: &mut Project, clip: Clip) -> Result<Clip> {
    p.clip(&clip.id)?;
    check_clip(p, &clip)?;
    p.clips.insert(clip.id.clone(), clip.clone());
    p.commit();
    Ok(clip)
}

pub fn move_clip(
    p: &mut Project,
    clip: &ObjectId,
    new_track: Option<&ObjectId>,
    new_start: Time,
) -> Result<Clip> {
    let mut c = p.clip(clip)?.clone();
    if let Some(t) = new_track {
        c.track_id = t.clone();
    }
    c.start = new_start;
    replace_clip(p, c)
}

pub fn resize_clip(
    p: &mut Project,
    clip: &ObjectId,
    new_start: Time,
    new_duration: Time,
) -> Result<Clip> {
    let mut c = p.clip(clip)?.clone();
    c.start = new_start;
    c.duration = new_duration;
    replace_clip(p, c)
}

/// Remove a clip together with its animations and suggestions.
pub fn remove_clip(p: &mut Project, clip: &ObjectId) -> Result<()> {
    p.clip(clip)?;
    drop_clip(p, clip);
    p.commit();
    Ok(())
}

fn drop_clip(p: &mut Project, clip: &ObjectId) {
    p.clips.remove(clip);
    p.animations.retain(|_, a| &a.clip_id != clip);
    p.suggestions.retain(|_, s| &s.target.clip_id != clip);
}

/// Round-half-up of `num / den` for non-negative integers.
pub(crate) fn div_round(num: i128, den: i128) -> i128 {
    (2 * num + den) / (2 * den)
}

/// Split `clip` at absolute time `at`. Text is cut at the character
/// boundary nearest the duration fraction.
pub fn split_clip(p: &mut Project, clip: &ObjectId, at: Time) -> Result<(Clip, Clip)> {
    let c = p.clip(clip)?;
    if !(c.start < at && at < c.end()) {
        return Err(Error::OutOfRange(format!("{at} not inside ({}, {})", c.start, c.end())));
    }
    let d1 = at - c.start;
    let k = c.text().map(|text| {
        let n = text.chars().count() as i128;
        div_round(n * d1.millis() as i128, c.duration.millis() as i128) as usize
    });
    split_impl(p, clip, d1, k)
}

/// Shared split: first part keeps the id and lasts `d1`; text (if any) is cut
/// after `k` characters. Exit animations move to the second part.
pub(crate) fn split_impl(
    p: &mut Project,
    clip: &ObjectId,
    d1: Time,
    k: Option<usize>,
) -> Result<(Clip, Clip)> {
    let c = p.clip(clip)?.clone();
    if d1 <= Time::ZERO || d1 >= c.duration {
        return Err(Error::InvalidDuration);
    }
    let mut first = c.clone();
    let mut second = c.clone();
    first.duration = d1;
    second.start = c.start + d1;
    second.duration = c.duration - d1;
    match (&c.payload, k) {
        (ClipPayload::Text { content, style }, Some(k)) => {
            let cut = content.char_indices().nth(k).map_or(content.len(), |(i, _)| i);
            first.payload = ClipPayload::Text { content: content[..cut].into(), style: style.clone() };
            second.payload = ClipPayload::Text { content: content[cut..].into(), style: style.clone() };
        }
        (ClipPayload::Media { asset_ref, trim_in }, _) => {
            second.payload = ClipPayload::Media { asset_ref: asset_ref.clone(), trim_in: *trim_in + d1 };
        }
        _ => {}
    }
    second.id = p.alloc_id(IdKind::Clip);
    p.clips.insert(first.id.clone(), first.clone());
    p.clips.insert(second.id.clone(), second.clone());
    for a in p.animations.values_mut() {
        if a.clip_id == first.id && a.phase == Phase::Exit {
            a.clip_id = second.id.clone();
        }
    }
    p.commit();
    Ok((first, second))
}

/// Merge two neighbouring text clips on one track into the earlier one.
pub fn merge_clips(p: &mut Project, a: &ObjectId, b: &ObjectId) -> Result<Clip> {
    let ca = p.clip(a)?;
    let cb = p.clip(b)?;
    if ca.track_id != cb.track_id {
        return Err(Error::TrackMismatch);
    }
    if a == b {
        return Err(Error::NotAdjacent);
    }
    let (first, second) = if (ca.start, &ca.id) <= (cb.start, &cb.id) { (ca, cb) } else { (cb, ca) };
    let between = p.clips_on_track(&first.track_id).any(|c| {
        c.id != first.id && c.id != second.id && c.start >= first.start && c.start < second.start
    });
    if between {
        return Err(Error::NotAdjacent);
    }
    let (
        ClipPayload::Text { content: t1, style },
        ClipPayload::Text { content: t2, .. },
    ) = (&first.payload, &second.payload)
    else {
        return Err(Error::PayloadMismatch("only text clips can be merged".into()));
    };
    let merged = Clip {
        id: first.id.clone(),
        track_id: first.track_id.clone(),
        start: first.start,
        duration: second.end().max(first.end()) - first.start,
        payload: ClipPayload::Text { content: format!("{t1}{t2}"), style: style.clone() },
    };
    let second_id = second.id.clone();
    let kept: Vec<(String, Phase)> = p
        .animations_of(&merged.id)
        .map(|a| (a.preset.0.clone(), a.phase))
        .collect();
    let moved: Vec<ObjectId> = p.animations_of(&second_id).map(|a| a.id.clone()).collect();
    for id in moved {
        let a = p.animations.get_mut(&id).expect("listed above");
        if kept.contains(&(a.preset.0.clone(), a.phase)) {
            p.animations.remove(&id);
        } else {
            a.clip_id = merged.id.clone();
        }
    }
    p.clips.remove(&second_id);
    p.suggestions.retain(|_, s| s.target.clip_id != second_id);
    p.clips.insert(merged.id.clone(), merged.clone());
    p.commit();
    Ok(merged)
}

fn preset_class<'r>(
    reg: &'r MetaRegistry,
    preset: &str,
) -> Result<&'r crate::meta::MetaClass> {
    match reg.get(preset) {
        Ok(c) if c.category == Category::AnimationEffect => Ok(c),
        _ => Err(Error::UnknownPreset(preset.to_string())),
    }
}

pub fn attach_animation(
    p: &mut Project,
    reg: &MetaRegistry,
    clip: &ObjectId,
    preset: &str,
    overrides: &FieldMap,
    phase: Option<Phase>,
) -> Result<AnimationInstance> {
    let class = preset_class(reg, preset)?;
    p.clip(clip)?;
    let params = AnimationParams::from_fields(&reg.resolve_fields(preset, overrides)?)?;
    let phase = phase.or_else(|| presets::natural_phase(preset)).unwrap_or(Phase::Enter);
    let inst = AnimationInstance {
        id: p.alloc_id(class.id_kind),
        clip_id: clip.clone(),
        preset: class.id(),
        params,
        phase,
    };
    p.animations.insert(inst.id.clone(), inst.clone());
    p.commit();
    Ok(inst)
}

/// Overwrite some parameters (and optionally the phase) of an instance.
pub fn update_animation(
    p: &mut Project,
    reg: &MetaRegistry,
    anim: &ObjectId,
    overrides: &FieldMap,
    phase: Option<Phase>,
) -> Result<AnimationInstance> {
    let current = p.animation(anim)?.clone();
    preset_class(reg, current.preset.as_str())?;
    let mut fields = current.params.to_fields();
    // drop standard fields the class does not declare
    let class = reg.get(current.preset.as_str())?;
    fields.retain(|k, _| class.field(k).is_some());
    fields.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
    let params = AnimationParams::from_fields(&reg.resolve_fields(current.preset.as_str(), &fields)?)?;
    let updated = AnimationInstance { params, phase: phase.unwrap_or(current.phase), ..current };
    p.animations.insert(updated.id.clone(), updated.clone());
    p.commit();
    Ok(updated)
}

pub fn detach_animation(p: &mut Project, anim: &ObjectId) -> Result<()> {
    p.animation(anim)?;
    p.animations.remove(anim);
    p.commit();
    Ok(())
}

/// Remove a track with everything on it.
pub fn remove_track(p: &mut Project, track: &ObjectId) -> Result<()> {
    p.track(track)?;
    let clips: Vec<ObjectId> = p.clips_on_track(track).map(|c| c.id.clone()).collect();
    for c in &clips {
        drop_clip(p, c);
    }
    p.tracks.remove(track);
    p.commit();
    Ok(())
}

pub fn replace_track(p: &mut Project, track: Track) -> Result<Track> {
    let old = p.track(&track.id)?;
    if old.order_index != track.order_index
        && p.tracks.values().any(|t| t.id != track.id && t.order_index == track.order_index)
    {
        return Err(Error::OrderIndexTaken(track.order_index));
    }
    if old.kind != track.kind {
        for c in p.clips_on_track(&track.id) {
            p.check_payload(&track, &c.payload, c.duration)?;
        }
    }
    p.tracks.insert(track.id.clone(), track.clone());
    p.commit();
    Ok(track)
}

pub fn remove_asset(p: &mut Project, asset: &ObjectId) -> Result<()> {
    p.asset(asset)?;
    let used = p.clips.values().any(
        |c| matches!(&c.payload, ClipPayload::Media { asset_ref, .. } if asset_ref == asset),
    );
    if used {
        return Err(Error::AssetInUse(asset.clone()));
    }
    p.assets.remove(asset);
    p.commit();
    Ok(())
}

/// Text track with the lowest order index, if any.
pub fn first_text_track(p: &Project) -> Option<&Track> {
    p.tracks.values().filter(|t| t.kind == TrackKind::Text).min_by_key(|t| t.order_index)
}
