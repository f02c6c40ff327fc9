//! Generators and oracles shared by the property suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use tae_core::catalog::builtin_registry;
use tae_core::meta::{FieldMap, FieldValue, MetaRegistry};
use tae_core::model::{AssetKind, ClipPayload, Easing, Phase, StyleDelta, TextStyle, TrackKind};
use tae_core::script::{self, Anchor, PlacementStrategy, ScriptDelta};
use tae_core::timeline::{self, presets::CATALOG};
use tae_core::{IdKind, ObjectId, Project, Result, Time};

pub type Rand = ChaCha8Rng;

pub fn rng(seed: u64) -> Rand {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: [&str; 12] =
    ["hello", "world", "wait", "now", "déjà", "vu", "slowly", "hurry", "!", "ok", "naïve", "日本"];

pub fn random_text(r: &mut Rand, min_chars: usize) -> String {
    let mut s = String::new();
    while s.chars().count() < min_chars || r.random_bool(0.4) {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(WORDS.choose(r).unwrap());
        if s.chars().count() > 60 {
            break;
        }
    }
    s
}

pub fn random_style(r: &mut Rand) -> TextStyle {
    TextStyle {
        font_size: r.random_range(8..96) as f64,
        color: [r.random(), r.random(), r.random(), 1.0],
        position: [r.random(), r.random()],
        ..TextStyle::default()
    }
}

pub fn random_overrides(r: &mut Rand) -> FieldMap {
    let mut m = FieldMap::new();
    if r.random_bool(0.7) {
        m.insert("duration".into(), FieldValue::TimeSeconds(Time::from_millis(r.random_range(50..3000))));
    }
    if r.random_bool(0.5) {
        m.insert("delay".into(), FieldValue::TimeSeconds(Time::from_millis(r.random_range(0..1500))));
    }
    if r.random_bool(0.5) {
        m.insert("speed".into(), FieldValue::Number(r.random_range(0.25..4.0)));
    }
    if r.random_bool(0.6) {
        m.insert("easing".into(), FieldValue::Enum(Easing::NAMES.choose(r).unwrap().to_string()));
    }
    if r.random_bool(0.5) {
        let d = ["left", "right", "up", "down", "none"].choose(r).unwrap();
        m.insert("direction".into(), FieldValue::Enum(d.to_string()));
    }
    m
}

/// A valid project: a few text tracks of non-overlapping clips, an image
/// track with media, and random animations.
pub fn random_project(r: &mut Rand, reg: &MetaRegistry) -> Project {
    let mut p = Project::new("random", r.random());
    let n_text = r.random_range(1..=3);
    let mut tracks = Vec::new();
    for i in 0..n_text {
        tracks.push(p.add_track(TrackKind::Text, format!("Text {}", i + 1)).id);
    }
    if r.random_bool(0.5) {
        let img = p.add_asset(AssetKind::Image, "logo", "", None).unwrap().id;
        let it = p.add_track(TrackKind::Image, "Images").id;
        let payload = ClipPayload::Media { asset_ref: img, trim_in: Time::ZERO };
        timeline::add_clip(&mut p, &it, Time::ZERO, Time::from_millis(r.random_range(100..4000)), payload).unwrap();
    }
    for t in &tracks {
        let mut at = r.random_range(0..500);
        for _ in 0..r.random_range(0..=6) {
            let dur = r.random_range(100..4000);
            let payload = ClipPayload::Text { content: random_text(r, 1), style: random_style(r) };
            let c = timeline::add_clip(&mut p, t, Time::from_millis(at), Time::from_millis(dur), payload).unwrap();
            at += dur + if r.random_bool(0.5) { 0 } else { r.random_range(1..800) };
            for _ in 0..r.random_range(0..=2) {
                let preset = CATALOG.choose(r).unwrap();
                let phase = [None, Some(Phase::Enter), Some(Phase::Exit), Some(Phase::Emphasis)].choose(r).unwrap();
                timeline::attach_animation(&mut p, reg, &c.id, preset, &random_overrides(r), *phase).unwrap();
            }
        }
    }
    p
}

/// Same-track clip intervals are pairwise disjoint (brute force).
pub fn overlapping_pair(p: &Project) -> Option<(ObjectId, ObjectId)> {
    let clips: Vec<_> = p.clips.values().collect();
    for (i, a) in clips.iter().enumerate() {
        for b in &clips[i + 1..] {
            let (a0, a1) = (a.start.millis(), a.start.millis() + a.duration.millis());
            let (b0, b1) = (b.start.millis(), b.start.millis() + b.duration.millis());
            if a.track_id == b.track_id && a0 < b1 && b0 < a1 {
                return Some((a.id.clone(), b.id.clone()));
            }
        }
    }
    None
}

/// The project minus its operation log, which records failed calls too.
pub fn without_log(p: &Project) -> Project {
    let mut q = p.clone();
    q.operation_log.clear();
    q
}

/// One random script-level edit. `None` when nothing applicable was drawn.
pub fn random_script_op(r: &mut Rand, p: &mut Project, selected: &BTreeSet<ObjectId>) -> Option<Result<ScriptDelta>> {
    let doc = script::project_script(p, selected).ok()?;
    let lines = &doc.lines;
    let pick = |r: &mut Rand| lines.choose(r).map(|l| l.clip_id.clone());
    Some(match r.random_range(0..6) {
        0 => {
            let id = pick(r)?;
            let text = random_text(r, 1);
            script::apply_text_edit(p, &id, &text)
        }
        1 => {
            let id = pick(r)?;
            let n = p.clips[&id].text()?.chars().count();
            let off = if n >= 2 { r.random_range(1..n) } else { r.random_range(0..=1) };
            script::split_line(p, &id, off).map(|(_, _, d)| d)
        }
        2 => {
            if lines.len() < 2 {
                return None;
            }
            let i = r.random_range(0..lines.len() - 1);
            script::merge_lines(p, &lines[i].clip_id, &lines[i + 1].clip_id).map(|(_, d)| d)
        }
        3 => {
            let anchor = match pick(r) {
                Some(id) if r.random_bool(0.45) => Anchor::After(id),
                Some(id) if r.random_bool(0.8) => Anchor::Before(id),
                _ => Anchor::End,
            };
            let strategy = *PlacementStrategy::ALL.choose(r).unwrap();
            let text = random_text(r, 1);
            script::plan_placement(p, selected, &anchor, strategy, None)
                .and_then(|d| script::add_line(p, selected, &anchor, &text, &d))
                .map(|(_, d)| d)
        }
        4 => {
            if lines.is_empty() {
                return None;
            }
            let a = r.random_range(0..lines.len());
            let b = r.random_range(a..=lines.len());
            let delta = StyleDelta {
                font_size: Some(r.random_range(-4..120) as f64),
                color: r.random_bool(0.3).then(|| [r.random(), r.random(), r.random(), 1.0]),
                ..StyleDelta::default()
            };
            script::apply_style_batch(p, selected, a..b, &delta).map(|(_, d)| d)
        }
        _ => {
            let texts: Vec<ObjectId> =
                p.tracks.values().filter(|t| t.kind == TrackKind::Text).map(|t| t.id.clone()).collect();
            let sel: BTreeSet<ObjectId> = texts.into_iter().filter(|_| r.random_bool(0.7)).collect();
            script::set_script_tracks(p, &sel).map(|(_, d)| d)
        }
    })
}

// ---- tool arguments from JSON schemas ----

fn id_kind_of(pattern: &str) -> IdKind {
    let prefix = pattern.trim_start_matches('^').split('_').next().unwrap();
    IdKind::from_prefix(prefix).unwrap()
}

fn random_id(r: &mut Rand, kind: IdKind, pool: &[ObjectId]) -> String {
    let own: Vec<&ObjectId> = pool.iter().filter(|id| id.is_kind(kind)).collect();
    if let Some(id) = own.choose(r).filter(|_| r.random_bool(0.8)) {
        return id.to_string();
    }
    const ALPHABET: &[u8] = b"0123456789abcdefghjkmnpqrstvwxyz";
    let suffix: String = (0..8).map(|_| *ALPHABET.choose(r).unwrap() as char).collect();
    format!("{}_{suffix}", kind.prefix())
}

fn number_in(r: &mut Rand, s: &Value, lo: f64, hi: f64) -> f64 {
    let min = s["minimum"].as_f64().unwrap_or(lo);
    let max = s["maximum"].as_f64().unwrap_or(hi);
    if r.random_bool(0.1) {
        return if r.random_bool(0.5) { min } else { max };
    }
    r.random_range(min..=max)
}

/// A value admitted by `schema`.
pub fn valid_value(r: &mut Rand, s: &Value, pool: &[ObjectId]) -> Value {
    if let Some(values) = s["enum"].as_array() {
        return values.choose(r).unwrap().clone();
    }
    match &s["type"] {
        Value::Array(types) => {
            // nullable asset reference
            if r.random_bool(0.3) {
                return Value::Null;
            }
            assert!(types.contains(&json!("string")));
            json!(random_id(r, id_kind_of(s["pattern"].as_str().unwrap()), pool))
        }
        Value::String(t) => match t.as_str() {
            "object" => valid_object(r, s, pool),
            "string" => match s["pattern"].as_str() {
                Some(pat) => json!(random_id(r, id_kind_of(pat), pool)),
                None => json!(random_text(r, 0)),
            },
            "number" => json!(number_in(r, s, -1000.0, 1000.0)),
            "integer" => {
                let v = number_in(r, s, -1000.0, 1000.0);
                json!(v.round() as i64)
            }
            "boolean" => json!(r.random_bool(0.5)),
            "array" => {
                let lo = s["minItems"].as_u64().unwrap_or(0) as usize;
                let hi = s["maxItems"].as_u64().map_or(lo.max(1) + 2, |m| m as usize);
                let n = r.random_range(lo..=hi);
                Value::Array((0..n).map(|_| valid_value(r, &s["items"], pool)).collect())
            }
            other => panic!("unexpected schema type {other}"),
        },
        other => panic!("schema without type: {other}"),
    }
}

fn valid_object(r: &mut Rand, s: &Value, pool: &[ObjectId]) -> Value {
    let required: Vec<&str> = s["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let mut out = Map::new();
    for (k, prop) in s["properties"].as_object().unwrap() {
        if required.contains(&k.as_str()) || r.random_bool(0.5) {
            out.insert(k.clone(), valid_value(r, prop, pool));
        }
    }
    Value::Object(out)
}

/// A value of the wrong JSON type for `schema`.
fn wrong_type(r: &mut Rand, s: &Value) -> Value {
    let t = match &s["type"] {
        Value::String(t) => t.as_str(),
        _ => "string",
    };
    let candidates = match t {
        "string" => vec![json!(42), json!(true), json!([1])],
        "number" | "integer" => vec![json!("seven"), json!(false), json!({})],
        "boolean" => vec![json!("yes"), json!(1)],
        "array" => vec![json!({}), json!("red")],
        _ => vec![json!(3)],
    };
    candidates.choose(r).unwrap().clone()
}

/// Arguments that break `schema` in one random way.
pub fn invalid_args(r: &mut Rand, s: &Value, pool: &[ObjectId]) -> Value {
    let mut v = valid_value(r, s, pool);
    let props = s["properties"].as_object().unwrap();
    let required: Vec<String> =
        s["required"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    let obj = v.as_object_mut().unwrap();
    loop {
        match r.random_range(0..6) {
            0 => {
                obj.insert("bogus_argument".into(), json!(1));
            }
            1 if !required.is_empty() => {
                obj.remove(required.choose(r).unwrap());
            }
            2 => {
                let (k, prop) = props.iter().collect::<Vec<_>>().choose(r).copied().unwrap();
                obj.insert(k.clone(), wrong_type(r, prop));
            }
            3 => {
                let ranged: Vec<_> = props.iter().filter(|(_, p)| p["maximum"].is_number()).collect();
                let Some((k, prop)) = ranged.choose(r).copied() else { continue };
                let bad = if r.random_bool(0.5) {
                    prop["maximum"].as_f64().unwrap() + 1.0
                } else {
                    prop["minimum"].as_f64().unwrap() - 1.0
                };
                obj.insert(k.clone(), json!(bad));
            }
            4 => {
                let enums: Vec<_> = props.iter().filter(|(_, p)| p["enum"].is_array()).collect();
                let Some((k, _)) = enums.choose(r).copied() else { continue };
                obj.insert(k.clone(), json!("not_a_value"));
            }
            5 => {
                let ids: Vec<_> = props.iter().filter(|(_, p)| p["pattern"].is_string()).collect();
                let Some((k, prop)) = ids.choose(r).copied() else { continue };
                let kind = id_kind_of(prop["pattern"].as_str().unwrap());
                let other = if kind == IdKind::Sugg { IdKind::Prompt } else { IdKind::Sugg };
                obj.insert(k.clone(), json!(random_id(r, other, &[])));
            }
            _ => continue,
        }
        return v;
    }
}

pub fn id_pool(p: &Project) -> Vec<ObjectId> {
    p.assets
        .keys()
        .chain(p.tracks.keys())
        .chain(p.clips.keys())
        .chain(p.animations.keys())
        .cloned()
        .collect()
}

pub fn registry() -> MetaRegistry {
    builtin_registry()
}

// ---- render-state oracle ----

/// Scalar render parameters of one clip, recomputed from first principles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalars {
    pub opacity: f64,
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
    pub rotation: f64,
    pub reveal: f64,
    pub tint_keep: f64,
}

pub fn oracle_ease(name: &str, u: f64) -> f64 {
    let u = u.max(0.0).min(1.0);
    match name {
        "linear" => u,
        "ease_in" => u.powi(2),
        "ease_out" => 1.0 - (1.0 - u).powi(2),
        "ease_in_out" if u < 0.5 => 2.0 * u.powi(2),
        "ease_in_out" => 1.0 - 2.0 * (1.0 - u).powi(2),
        other => panic!("unknown easing {other}"),
    }
}

fn unit_vector(direction: &str) -> (f64, f64) {
    match direction {
        "left" => (-1.0, 0.0),
        "right" => (1.0, 0.0),
        "up" => (0.0, -1.0),
        "down" => (0.0, 1.0),
        _ => (0.0, 0.0),
    }
}

/// Eased local progress of one animation, read from its serialized form.
pub fn oracle_progress(anim: &Value, clip_start: f64, clip_end: f64, t: f64) -> f64 {
    let p = &anim["params"];
    let (dur, delay, speed) =
        (p["duration"].as_f64().unwrap(), p["delay"].as_f64().unwrap(), p["speed"].as_f64().unwrap());
    let local = match anim["phase"].as_str().unwrap() {
        // exit effects end `delay` before the clip does
        "exit" => t - (clip_end - delay - dur / speed),
        _ => t - clip_start - delay,
    };
    oracle_ease(p["easing"].as_str().unwrap(), local * speed / dur)
}

pub fn oracle_state(p: &Project, clip: &ObjectId, t: f64) -> Scalars {
    let c = serde_json::to_value(&p.clips[clip]).unwrap();
    let start = c["start"].as_f64().unwrap();
    let end = start + c["duration"].as_f64().unwrap();
    let mut s = Scalars { opacity: 1.0, dx: 0.0, dy: 0.0, scale: 1.0, rotation: 0.0, reveal: 1.0, tint_keep: 1.0 };
    for a in p.animations.values().filter(|a| &a.clip_id == clip) {
        let a = serde_json::to_value(a).unwrap();
        let e = oracle_progress(&a, start, end, t);
        let (ux, uy) = unit_vector(a["params"]["direction"].as_str().unwrap());
        let mut offset = 0.0;
        match a["preset"].as_str().unwrap() {
            "fade_in" => s.opacity *= e,
            "fade_out" => s.opacity *= 1.0 - e,
            "slide_in" => offset = -0.2 * (1.0 - e),
            "slide_out" => offset = 0.2 * e,
            "scale_pop" => {
                s.scale *= 0.25 + 0.75 * e + 0.5 * e * (1.0 - e);
                s.opacity *= e;
                s.rotation += -15.0 * (1.0 - e);
            }
            "typewriter" => s.reveal = s.reveal.min(e),
            "bounce" => offset = 0.2 * (1.0 - e) * (3.0 * std::f64::consts::PI * e).sin().abs(),
            "color_pulse" => s.tint_keep *= 1.0 - 2.4 * e * (1.0 - e),
            other => panic!("unknown preset {other}"),
        }
        s.dx += ux * offset;
        s.dy += uy * offset;
    }
    s.opacity = s.opacity.max(0.0).min(1.0);
    s.reveal = s.reveal.max(0.0).min(1.0);
    s
}
