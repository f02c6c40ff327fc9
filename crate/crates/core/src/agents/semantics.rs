//! Linguistic features of a line and their mapping onto static and dynamic
//! animation attributes.

use serde::{Deserialize, Serialize};

use crate::model::{Point2, Rgba};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tone {
    Neutral,
    Positive,
    Negative,
    Urgent,
    Calm,
}

impl Tone {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Neutral => "neutral",
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Urgent => "urgent",
            Self::Calm => "calm",
        }
    }
}

/// Half-open range of character (not byte) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn is_within(&self, len: usize) -> bool {
        self.start <= self.end && self.end <= len
    }

    pub fn overlaps(&self, other: &CharRange) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticFeatures {
    pub importance: f64,
    pub tone: Tone,
    pub emphasis_tokens: Vec<CharRange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalPattern {
    OnEntry,
    Pulsed,
    Sustained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticDirective {
    pub font_size_scale: f64,
    pub color: Option<Rgba>,
    pub position_hint: Option<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicDirective {
    pub preset_category: String,
    pub velocity_scale: f64,
    pub temporal_pattern: TemporalPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationDirective {
    #[serde(rename = "static")]
    pub static_attrs: StaticDirective,
    pub dynamic: DynamicDirective,
}

/// Tone to preset, as (tone, preset, note). Also rendered into the semantic
/// matching prompt.
pub const MAPPING_TABLE: [(&str, &str, &str); 5] = [
    ("neutral", "typewriter", "plain statements are revealed as they are read"),
    ("positive", "scale_pop", "good news pops in"),
    ("negative", "fade_out", "bad news lingers and fades"),
    ("urgent", "bounce", "urgent lines keep moving to draw the eye"),
    ("calm", "fade_in", "calm lines ease in"),
];

const POSITIVE: &[&str] = &[
    "amazing", "awesome", "beautiful", "best", "brilliant", "discount", "excellent", "fantastic",
    "free", "glad", "good", "great", "happy", "joy", "love", "perfect", "success", "thanks",
    "win", "wonderful",
];
const NEGATIVE: &[&str] = &[
    "angry", "awful", "bad", "broken", "fail", "failed", "hate", "loss", "lost", "never", "pain",
    "problem", "sad", "sorry", "terrible", "unfortunately", "worse", "worst", "wrong",
];
const URGENT: &[&str] = &[
    "alert", "breaking", "deadline", "fast", "hurry", "immediately", "last", "limited", "now",
    "quick", "today", "urgent", "warning",
];
const CALM: &[&str] = &[
    "breathe", "calm", "gentle", "gently", "peace", "peaceful", "quiet", "relax", "rest",
    "serene", "slowly", "soft", "softly",
];

/// Tones in tie-break priority order with their lexicons.
const LEXICONS: [(Tone, &[&str]); 4] = [
    (Tone::Urgent, URGENT),
    (Tone::Negative, NEGATIVE),
    (Tone::Positive, POSITIVE),
    (Tone::Calm, CALM),
];

/// Words of `text` as (lowercased word, char range).
fn words(text: &str) -> Vec<(String, CharRange, bool)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut n = 0;
    for (i, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() || ch == '\'' {
            if cur.is_empty() {
                start = i;
            }
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(word_entry(&cur, start, i));
            cur.clear();
        }
        n = i + 1;
    }
    if !cur.is_empty() {
        out.push(word_entry(&cur, start, n));
    }
    out
}

fn word_entry(w: &str, start: usize, end: usize) -> (String, CharRange, bool) {
    let letters = w.chars().filter(|c| c.is_alphabetic()).count();
    let shouting = letters >= 2 && w.chars().all(|c| !c.is_lowercase());
    (w.to_lowercase(), CharRange::new(start, end), shouting)
}

/// Rule-mode analysis: lexicon hits decide the tone, exclamation marks,
/// capitalised words and hits raise importance.
pub fn analyze_semantics(text: &str) -> SemanticFeatures {
    let words = words(text);
    let mut scores = [0usize; 4];
    let mut emphasis = Vec::new();
    let mut hits = 0;
    for (w, range, shouting) in &words {
        let mut hit = false;
        for (i, (_, lex)) in LEXICONS.iter().enumerate() {
            if lex.contains(&w.as_str()) {
                scores[i] += 1;
                hit = true;
            }
        }
        if hit {
            hits += 1;
        }
        if hit || *shouting {
            emphasis.push(*range);
        }
    }
    let best = scores.iter().copied().max().unwrap_or(0);
    let tone = if best == 0 {
        Tone::Neutral
    } else {
        LEXICONS[scores.iter().position(|&s| s == best).expect("max exists")].0
    };
    let mut importance = 0.1 * hits.min(3) as f64;
    if text.contains('!') {
        importance += 0.3;
    }
    if words.iter().any(|(_, _, s)| *s) {
        importance += 0.3;
    }
    SemanticFeatures { importance: importance.clamp(0.0, 1.0), tone, emphasis_tokens: emphasis }
}

pub fn preset_for(tone: Tone) -> &'static str {
    MAPPING_TABLE
        .iter()
        .find(|(t, _, _)| *t == tone.as_str())
        .map(|(_, p, _)| *p)
        .expect("every tone is mapped")
}

/// Total mapping from features to a directive.
pub fn map_to_directive(f: &SemanticFeatures) -> AnimationDirective {
    let importance = if f.importance.is_finite() { f.importance.clamp(0.0, 1.0) } else { 0.0 };
    let (color, pattern) = match f.tone {
        Tone::Urgent => (Some([1.0, 0.25, 0.2, 1.0]), TemporalPattern::Pulsed),
        Tone::Positive => (Some([1.0, 0.85, 0.3, 1.0]), TemporalPattern::OnEntry),
        Tone::Negative => (None, TemporalPattern::Sustained),
        Tone::Calm => (None, TemporalPattern::Sustained),
        Tone::Neutral => (None, TemporalPattern::OnEntry),
    };
    AnimationDirective {
        static_attrs: StaticDirective {
            font_size_scale: 1.0 + 0.5 * importance,
            color,
            position_hint: (importance >= 0.8).then_some([0.5, 0.5]),
        },
        dynamic: DynamicDirective {
            preset_category: preset_for(f.tone).to_string(),
            velocity_scale: 1.0 + importance,
            temporal_pattern: pattern,
        },
    }
}
