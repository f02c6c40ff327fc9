//! The script panel model: selected-track text clips projected into lines,
//! and line-level edits that write straight through to the timeline.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::agents::SuggestionStatus;
use crate::error::{Error, Result};
use crate::id::ObjectId;
use crate::model::{Clip, ClipPayload, Project, StyleDelta, TextStyle, TrackKind};
use crate::time::Time;
use crate::timeline::{self, div_round, find_overlap};

/// Duration of a clip created by adding a script line.
pub const NEW_LINE_DURATION: Time = Time::from_millis(2000);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub clip_id: ObjectId,
    pub text: String,
    pub style: TextStyle,
    /// Pending suggestions on this line.
    pub markers: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptDocument {
    pub revision: u64,
    pub selected_tracks: BTreeSet<ObjectId>,
    pub lines: Vec<ScriptLine>,
}

/// What a committed operation changed, for incremental script models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptDelta {
    pub revision: u64,
    /// Clips to (re)project.
    pub upserted: Vec<ObjectId>,
    pub removed: Vec<ObjectId>,
    /// New track selection, when it changed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<BTreeSet<ObjectId>>,
}

fn check_selection(p: &Project, selected: &BTreeSet<ObjectId>) -> Result<()> {
    for id in selected {
        if p.track(id)?.kind != TrackKind::Text {
            return Err(Error::NonTextTrack(id.clone()));
        }
    }
    Ok(())
}

type LineKey = (Time, u32, ObjectId);

fn line_key(p: &Project, c: &Clip) -> LineKey {
    let order = p.tracks.get(&c.track_id).map_or(u32::MAX, |t| t.order_index);
    (c.start, order, c.id.clone())
}

fn line_of(p: &Project, c: &Clip) -> Option<ScriptLine> {
    let ClipPayload::Text { content, style } = &c.payload else { return None };
    let markers = p
        .suggestions
        .values()
        .filter(|s| s.target.clip_id == c.id && s.status == SuggestionStatus::Pending)
        .map(|s| s.id.clone())
        .collect();
    Some(ScriptLine { clip_id: c.id.clone(), text: content.clone(), style: style.clone(), markers })
}

/// Text clips on `selected` tracks in appearance order: (start, track order, id).
pub fn project_script(p: &Project, selected: &BTreeSet<ObjectId>) -> Result<ScriptDocument> {
    check_selection(p, selected)?;
    let mut clips: Vec<(LineKey, &Clip)> = p
        .clips
        .values()
        .filter(|c| selected.contains(&c.track_id))
        .map(|c| (line_key(p, c), c))
        .collect();
    clips.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ScriptDocument {
        revision: p.revision,
        selected_tracks: selected.clone(),
        lines: clips.into_iter().filter_map(|(_, c)| line_of(p, c)).collect(),
    })
}

fn text_clip<'p>(p: &'p Project, clip: &ObjectId) -> Result<&'p Clip> {
    let c = p.clip(clip)?;
    if c.text().is_none() {
        return Err(Error::NotTextClip(clip.clone()));
    }
    Ok(c)
}

pub fn apply_text_edit(p: &mut Project, clip: &ObjectId, new_text: &str) -> Result<ScriptDelta> {
    text_clip(p, clip)?;
    let c = p.clips.get_mut(clip).expect("checked above");
    if let ClipPayload::Text { content, .. } = &mut c.payload {
        *content = new_text.to_string();
    }
    p.commit();
    Ok(ScriptDelta { revision: p.revision, upserted: vec![clip.clone()], ..Default::default() })
}

/// Split a line after `char_offset` characters; durations follow the
/// character counts of the two halves.
pub fn split_line(p: &mut Project, clip: &ObjectId, char_offset: usize) -> Result<(Clip, Clip, ScriptDelta)> {
    let c = text_clip(p, clip)?;
    let n = c.text().expect("text clip").chars().count();
    if char_offset == 0 || char_offset >= n {
        return Err(Error::OffsetOutOfRange { offset: char_offset, len: n });
    }
    let d1 = div_round(c.duration.millis() as i128 * char_offset as i128, n as i128);
    let (a, b) = timeline::split_impl(p, clip, Time::from_millis(d1 as i64), Some(char_offset))?;
    let delta = ScriptDelta {
        revision: p.revision,
        upserted: vec![a.id.clone(), b.id.clone()],
        ..Default::default()
    };
    Ok((a, b, delta))
}

pub fn merge_lines(p: &mut Project, a: &ObjectId, b: &ObjectId) -> Result<(Clip, ScriptDelta)> {
    let merged = timeline::merge_clips(p, a, b)?;
    let gone = if &merged.id == a { b } else { a };
    let delta = ScriptDelta {
        revision: p.revision,
        upserted: vec![merged.id.clone()],
        removed: vec![gone.clone()],
        selection: None,
    };
    Ok((merged, delta))
}

/// Apply `delta` to lines `range` (indices into the current projection).
pub fn apply_style_batch(
    p: &mut Project,
    selected: &BTreeSet<ObjectId>,
    range: Range<usize>,
    delta: &StyleDelta,
) -> Result<(usize, ScriptDelta)> {
    if range.is_empty() {
        return Err(Error::EmptyRange);
    }
    let doc = project_script(p, selected)?;
    if range.end > doc.lines.len() {
        return Err(Error::OutOfRange(format!(
            "lines {}..{} of {}",
            range.start,
            range.end,
            doc.lines.len()
        )));
    }
    let targets: Vec<ObjectId> = doc.lines[range].iter().map(|l| l.clip_id.clone()).collect();
    let mut updates = Vec::with_capacity(targets.len());
    for id in &targets {
        let style = delta.apply(p.clip(id)?.style().expect("script lines are text clips"));
        style.validate()?;
        updates.push(style);
    }
    for (id, style) in targets.iter().zip(updates) {
        if let Some(ClipPayload::Text { style: s, .. }) = p.clips.get_mut(id).map(|c| &mut c.payload) {
            *s = style;
        }
    }
    p.commit();
    let n = targets.len();
    Ok((n, ScriptDelta { revision: p.revision, upserted: targets, ..Default::default() }))
}

/// Show exactly `tracks` in the script panel.
pub fn set_script_tracks(p: &mut Project, tracks: &BTreeSet<ObjectId>) -> Result<(ScriptDocument, ScriptDelta)> {
    check_selection(p, tracks)?;
    let old = p.script_selection();
    let mut upserted = Vec::new();
    let mut removed = Vec::new();
    for c in p.clips.values() {
        match (old.contains(&c.track_id), tracks.contains(&c.track_id)) {
            (false, true) => upserted.push(c.id.clone()),
            (true, false) => removed.push(c.id.clone()),
            _ => {}
        }
    }
    for t in p.tracks.values_mut() {
        if t.kind == TrackKind::Text {
            t.script_visible = tracks.contains(&t.id);
        }
    }
    p.commit();
    let doc = project_script(p, tracks)?;
    Ok((doc, ScriptDelta { revision: p.revision, upserted, removed, selection: Some(tracks.clone()) }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "position", content = "clip_id", rename_all = "snake_case")]
pub enum Anchor {
    Before(ObjectId),
    After(ObjectId),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementStrategy {
    SequentialSameTrack,
    ParallelAdjustedTiming,
    ParallelNewTrack,
}

impl PlacementStrategy {
    pub const ALL: [PlacementStrategy; 3] = [
        PlacementStrategy::SequentialSameTrack,
        PlacementStrategy::ParallelAdjustedTiming,
        PlacementStrategy::ParallelNewTrack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SequentialSameTrack => "sequential_same_track",
            Self::ParallelAdjustedTiming => "parallel_adjusted_timing",
            Self::ParallelNewTrack => "parallel_new_track",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub strategy: PlacementStrategy,
    /// Target track; `None` means a new track is created.
    pub track_id: Option<ObjectId>,
    pub start: Time,
}

/// The line an anchor refers to, or `None` for the end of an empty script.
pub fn resolve_anchor(p: &Project, selected: &BTreeSet<ObjectId>, anchor: &Anchor) -> Result<Option<Clip>> {
    let doc = project_script(p, selected)?;
    let id = match anchor {
        Anchor::Before(id) | Anchor::After(id) => id,
        Anchor::End => return Ok(doc.lines.last().map(|l| p.clips[&l.clip_id].clone())),
    };
    if !doc.lines.iter().any(|l| &l.clip_id == id) {
        return Err(Error::InvalidAnchor(format!("{id} is not a line of the script")));
    }
    Ok(Some(p.clips[id].clone()))
}

/// Another text track for parallel placement: the nearest one above the
/// anchor's track by order index, else the nearest below.
pub fn parallel_track(p: &Project, anchor_track: &ObjectId) -> Option<ObjectId> {
    let order = p.tracks.get(anchor_track)?.order_index;
    let others = || p.tracks.values().filter(|t| t.kind == TrackKind::Text && &t.id != anchor_track);
    others()
        .filter(|t| t.order_index > order)
        .min_by_key(|t| t.order_index)
        .or_else(|| others().max_by_key(|t| t.order_index))
        .map(|t| t.id.clone())
}

/// Turn a strategy into a concrete placement for `anchor`.
pub fn plan_placement(
    p: &Project,
    selected: &BTreeSet<ObjectId>,
    anchor: &Anchor,
    strategy: PlacementStrategy,
    track_hint: Option<&ObjectId>,
) -> Result<PlacementDecision> {
    use PlacementStrategy as S;
    let Some(anchor_clip) = resolve_anchor(p, selected, anchor)? else {
        // empty script: start the first line at zero
        let first = selected.iter().filter_map(|id| p.tracks.get(id)).min_by_key(|t| t.order_index);
        return Ok(match first {
            Some(t) if strategy != S::ParallelNewTrack => {
                PlacementDecision { strategy: S::SequentialSameTrack, track_id: Some(t.id.clone()), start: Time::ZERO }
            }
            _ => PlacementDecision { strategy: S::ParallelNewTrack, track_id: None, start: Time::ZERO },
        });
    };
    Ok(match strategy {
        S::SequentialSameTrack => PlacementDecision {
            strategy,
            track_id: Some(anchor_clip.track_id.clone()),
            start: match anchor {
                Anchor::Before(_) => anchor_clip.start,
                _ => anchor_clip.end(),
            },
        },
        S::ParallelAdjustedTiming => {
            let track = match track_hint {
                Some(t) => {
                    let tr = p.track(t)?;
                    if tr.kind != TrackKind::Text {
                        return Err(Error::NonTextTrack(t.clone()));
                    }
                    if t == &anchor_clip.track_id {
                        return Err(Error::InvalidAnchor("parallel placement needs another track".into()));
                    }
                    t.clone()
                }
                None => parallel_track(p, &anchor_clip.track_id).ok_or_else(|| {
                    Error::InvalidAnchor("no other text track for parallel placement".into())
                })?,
            };
            PlacementDecision { strategy, track_id: Some(track), start: anchor_clip.start }
        }
        S::ParallelNewTrack => PlacementDecision { strategy, track_id: None, start: anchor_clip.start },
    })
}

/// Insert a new line according to `decision`.
pub fn add_line(
    p: &mut Project,
    selected: &BTreeSet<ObjectId>,
    anchor: &Anchor,
    text: &str,
    decision: &PlacementDecision,
) -> Result<(Clip, ScriptDelta)> {
    use PlacementStrategy as S;
    let anchor_clip = resolve_anchor(p, selected, anchor)?;
    let style = anchor_clip.as_ref().and_then(|c| c.style().cloned()).unwrap_or_default();
    let d = NEW_LINE_DURATION;
    let s = decision.start;
    if s < Time::ZERO {
        return Err(Error::range("start", "must not be negative"));
    }
    let mut selection = None;
    let (clip, shifted) = p.transact(|p| {
        let track = match (&decision.track_id, decision.strategy) {
            (Some(t), S::SequentialSameTrack | S::ParallelAdjustedTiming) => {
                if p.track(t)?.kind != TrackKind::Text {
                    return Err(Error::NonTextTrack(t.clone()));
                }
                t.clone()
            }
            (None, S::ParallelNewTrack) => {
                let name = format!("Text {}", p.tracks.values().filter(|t| t.kind == TrackKind::Text).count() + 1);
                let t = p.add_track(TrackKind::Text, name).id;
                let mut sel = selected.clone();
                sel.insert(t.clone());
                selection = Some(sel);
                t
            }
            _ => return Err(Error::InvalidAnchor("strategy and track do not agree".into())),
        };
        let mut shifted = Vec::new();
        if find_overlap(p, &track, s, s + d, &[]).is_some() {
            let by = match decision.strategy {
                S::SequentialSameTrack => d,
                _ => {
                    // a clip straddling the insertion point is pushed fully past
                    // the new clip
                    let first = p
                        .clips_on_track(&track)
                        .filter(|c| c.end() > s)
                        .map(|c| c.start)
                        .min()
                        .unwrap_or(s);
                    d + (s - first).max(Time::ZERO)
                }
            };
            let movers: Vec<ObjectId> = p
                .clips_on_track(&track)
                .filter(|c| match decision.strategy {
                    S::SequentialSameTrack => c.start >= s,
                    _ => c.end() > s,
                })
                .map(|c| c.id.clone())
                .collect();
            for id in &movers {
                let c = p.clips.get_mut(id).expect("listed above");
                c.start = c.start + by;
            }
            shifted = movers;
        }
        let clip = timeline::add_clip(p, &track, s, d, ClipPayload::Text { content: text.to_string(), style: style.clone() })?;
        Ok((clip, shifted))
    })?;
    let mut upserted = vec![clip.id.clone()];
    upserted.extend(shifted);
    Ok((clip, ScriptDelta { revision: p.revision, upserted, removed: Vec::new(), selection }))
}

/// Incrementally maintained script, as a client would keep it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptModel {
    doc: ScriptDocument,
    keys: Vec<LineKey>,
}

impl ScriptModel {
    pub fn new(p: &Project, selected: &BTreeSet<ObjectId>) -> Result<Self> {
        let doc = project_script(p, selected)?;
        let keys = doc.lines.iter().map(|l| line_key(p, &p.clips[&l.clip_id])).collect();
        Ok(Self { doc, keys })
    }

    pub fn document(&self) -> &ScriptDocument {
        &self.doc
    }

    pub fn selected(&self) -> &BTreeSet<ObjectId> {
        &self.doc.selected_tracks
    }

    fn drop_line(&mut self, id: &ObjectId) {
        if let Some(i) = self.doc.lines.iter().position(|l| &l.clip_id == id) {
            self.doc.lines.remove(i);
            self.keys.remove(i);
        }
    }

    /// Fold one delta, reading changed clips from the post-operation snapshot.
    pub fn apply(&mut self, p: &Project, delta: &ScriptDelta) {
        if let Some(sel) = &delta.selection {
            self.doc.selected_tracks = sel.clone();
        }
        for id in delta.removed.iter().chain(&delta.upserted) {
            self.drop_line(id);
        }
        for id in &delta.upserted {
            let Some(c) = p.clips.get(id) else { continue };
            if !self.doc.selected_tracks.contains(&c.track_id) {
                continue;
            }
            let Some(line) = line_of(p, c) else { continue };
            let key = line_key(p, c);
            let at = self.keys.partition_point(|k| k < &key);
            self.keys.insert(at, key);
            self.doc.lines.insert(at, line);
        }
        self.doc.revision = p.revision;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::add_clip;

    fn secs(s: f64) -> Time {
        Time::from_secs(s)
    }

    fn line(p: &mut Project, t: &ObjectId, start: f64, dur: f64, text: &str) -> Clip {
        add_clip(p, t, secs(start), secs(dur), ClipPayload::text(text)).unwrap()
    }

    fn texts(doc: &ScriptDocument) -> Vec<&str> {
        doc.lines.iter().map(|l| l.text.as_str()).collect()
    }

    #[test]
    fn projection_sorts_by_start() {
        let mut p = Project::new("s", 1);
        let t = p.add_track(TrackKind::Text, "T").id;
        line(&mut p, &t, 2.0, 1.0, "c");
        line(&mut p, &t, 0.0, 1.0, "a");
        line(&mut p, &t, 1.0, 1.0, "b");
        let doc = project_script(&p, &p.script_selection()).unwrap();
        assert_eq!(texts(&doc), ["a", "b", "c"]);
        assert!(project_script(&p, &BTreeSet::new()).unwrap().lines.is_empty());
        let v = p.add_track(TrackKind::Video, "V").id;
        assert_eq!(project_script(&p, &[v.clone()].into()), Err(Error::NonTextTrack(v)));
    }

    #[test]
    fn text_edit_and_empty_text() {
        let mut p = Project::new("s", 1);
        let t = p.add_track(TrackKind::Text, "T").id;
        let c = line(&mut p, &t, 0.0, 1.0, "Hi");
        apply_text_edit(&mut p, &c.id, "Hello").unwrap();
        assert_eq!(texts(&project_script(&p, &p.script_selection()).unwrap()), ["Hello"]);
        apply_text_edit(&mut p, &c.id, "").unwrap();
        assert_eq!(texts(&project_script(&p, &p.script_selection()).unwrap()), [""]);
    }

    #[test]
    fn split_line_examples() {
        let mut p = Project::new("s", 1);
        let t = p.add_track(TrackKind::Text, "T").id;
        let c = line(&mut p, &t, 0.0, 10.0, "HelloWorld");
        let (a, b, _) = split_line(&mut p, &c.id, 5).unwrap();
        assert_eq!((a.end(), b.start, b.end()), (secs(5.0), secs(5.0), secs(10.0)));
        let c = line(&mut p, &t, 20.0, 9.0, "abcdef");
        let (a, b, _) = split_line(&mut p, &c.id, 2).unwrap();
        assert_eq!((a.duration, b.duration), (secs(3.0), secs(6.0)));
        assert_eq!(split_line(&mut p, &a.id, 0).unwrap_err(), Error::OffsetOutOfRange { offset: 0, len: 2 });
    }

    #[test]
    fn style_batch_counts() {
        let mut p = Project::new("s", 1);
        let t = p.add_track(TrackKind::Text, "T").id;
        for i in 0..4 {
            line(&mut p, &t, i as f64, 1.0, "x");
        }
        let sel = p.script_selection();
        let delta = StyleDelta { color: Some([1.0, 0.0, 0.0, 1.0]), ..Default::default() };
        assert_eq!(apply_style_batch(&mut p, &sel, 1..4, &delta).unwrap().0, 3);
        assert_eq!(apply_style_batch(&mut p, &sel, 2..2, &delta), Err(Error::EmptyRange));
        let doc = project_script(&p, &sel).unwrap();
        assert_eq!(doc.lines[0].style.color, [1.0; 4]);
        assert!(doc.lines[1..].iter().all(|l| l.style.color == [1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn add_line_strategies() {
        let mut p = Project::new("s", 1);
        let t1 = p.add_track(TrackKind::Text, "T1").id;
        let t2 = p.add_track(TrackKind::Text, "T2").id;
        let a = line(&mut p, &t1, 0.0, 3.0, "first");
        let blocker = line(&mut p, &t2, 0.0, 1.0, "other");
        let sel = p.script_selection();

        let d = plan_placement(&p, &sel, &Anchor::After(a.id.clone()), PlacementStrategy::SequentialSameTrack, None).unwrap();
        let (c, _) = add_line(&mut p, &sel, &Anchor::After(a.id.clone()), "next", &d).unwrap();
        assert_eq!((c.track_id.clone(), c.start, c.duration), (t1.clone(), secs(3.0), secs(2.0)));

        let d = plan_placement(&p, &sel, &Anchor::After(a.id.clone()), PlacementStrategy::ParallelAdjustedTiming, None).unwrap();
        let (c, _) = add_line(&mut p, &sel, &Anchor::After(a.id.clone()), "par", &d).unwrap();
        assert_eq!((c.track_id.clone(), c.start), (t2.clone(), secs(0.0)));
        assert_eq!(p.clips[&blocker.id].start, secs(2.0));

        let d = plan_placement(&p, &sel, &Anchor::After(a.id.clone()), PlacementStrategy::ParallelNewTrack, None).unwrap();
        let (c, delta) = add_line(&mut p, &sel, &Anchor::After(a.id.clone()), "new", &d).unwrap();
        assert!(c.track_id != t1 && c.track_id != t2);
        assert_eq!(c.start, a.start);
        assert!(delta.selection.unwrap().contains(&c.track_id));
        p.validate().unwrap();
    }

    #[test]
    fn model_follows_deltas() {
        let mut p = Project::new("s", 1);
        let t = p.add_track(TrackKind::Text, "T").id;
        let c = line(&mut p, &t, 0.0, 4.0, "abcd");
        let sel = p.script_selection();
        let mut m = ScriptModel::new(&p, &sel).unwrap();
        let (_, _, d) = split_line(&mut p, &c.id, 1).unwrap();
        m.apply(&p, &d);
        assert_eq!(m.document(), &project_script(&p, &sel).unwrap());
        let anchor = Anchor::Before(c.id.clone());
        let dec = plan_placement(&p, &sel, &anchor, PlacementStrategy::SequentialSameTrack, None).unwrap();
        let (_, d) = add_line(&mut p, &sel, &anchor, "zero", &dec).unwrap();
        m.apply(&p, &d);
        assert_eq!(m.document(), &project_script(&p, &sel).unwrap());
        assert_eq!(texts(m.document()), ["zero", "a", "bcd"]);
    }
}
