//! The built-in preset catalog. Each preset is an ordinary meta class in the
//! `animation_effect` category plus an evaluation rule from eased progress to
//! a render delta.

use crate::meta::{Category, FieldKind, FieldValue, MetaClass, MetaField};
use crate::model::{Direction, Easing, Phase, Point2};
use crate::time::Time;

pub const CATALOG: [&str; 8] = [
    "fade_in",
    "fade_out",
    "slide_in",
    "slide_out",
    "scale_pop",
    "typewriter",
    "bounce",
    "color_pulse",
];

/// Slide and bounce travel, in normalized canvas units.
pub const SLIDE_DISTANCE: f64 = 0.2;

struct Defaults {
    duration_ms: i64,
    direction: Direction,
    easing: Easing,
    phase: Phase,
    description: &'static str,
}

fn defaults(preset: &str) -> Option<Defaults> {
    use Direction as D;
    use Easing as E;
    use Phase as P;
    let d = |duration_ms, direction, easing, phase, description| Defaults {
        duration_ms,
        direction,
        easing,
        phase,
        description,
    };
    Some(match preset {
        "fade_in" => d(500, D::None, E::EaseOut, P::Enter, "Fade from transparent to opaque"),
        "fade_out" => d(500, D::None, E::EaseIn, P::Exit, "Fade from opaque to transparent"),
        "slide_in" => d(600, D::Left, E::EaseOut, P::Enter, "Slide into place along the direction"),
        "slide_out" => d(600, D::Right, E::EaseIn, P::Exit, "Slide away along the direction"),
        "scale_pop" => d(400, D::None, E::EaseOut, P::Enter, "Grow from small with a slight overshoot"),
        "typewriter" => d(1500, D::None, E::Linear, P::Enter, "Reveal characters one by one"),
        "bounce" => d(1000, D::Up, E::EaseOut, P::Emphasis, "Bounce three times with decaying height"),
        "color_pulse" => d(1000, D::None, E::EaseInOut, P::Emphasis, "Flash toward white and back"),
        _ => return None,
    })
}

pub fn is_builtin(preset: &str) -> bool {
    defaults(preset).is_some()
}

/// Phase a preset is attached with when the caller does not choose one.
pub fn natural_phase(preset: &str) -> Option<Phase> {
    defaults(preset).map(|d| d.phase)
}

pub fn preset_class(preset: &str) -> Option<MetaClass> {
    let d = defaults(preset)?;
    let fields = vec![
        MetaField::new(
            "duration",
            FieldKind::TimeSeconds,
            FieldValue::TimeSeconds(Time::from_millis(d.duration_ms)),
        )
        .interval(0.01, 60.0)
        .unit("s")
        .describe("Animation length before speed scaling", "How long the effect runs"),
        MetaField::new("delay", FieldKind::TimeSeconds, FieldValue::TimeSeconds(Time::ZERO))
            .interval(0.0, 60.0)
            .unit("s")
            .describe(
                "Offset from the clip start (from the clip end for exit effects)",
                "Wait before the effect starts",
            ),
        MetaField::new("speed", FieldKind::Number, FieldValue::Number(1.0))
            .interval(0.1, 10.0)
            .unit("x")
            .describe("Playback rate multiplier", "Higher is faster"),
        MetaField::new("direction", FieldKind::Enum, FieldValue::Enum(d.direction.as_str().into()))
            .allowed(&Direction::NAMES)
            .describe("Direction of motion", "Which way the text moves"),
        MetaField::new("easing", FieldKind::Enum, FieldValue::Enum(d.easing.as_str().into()))
            .allowed(&Easing::NAMES)
            .describe("Easing curve applied to progress", "Acceleration profile"),
    ];
    Some(MetaClass::new(preset, Category::AnimationEffect, fields))
}

pub fn description(preset: &str) -> Option<&'static str> {
    defaults(preset).map(|d| d.description)
}

/// What one animation contributes at a given eased progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta {
    pub opacity: f64,
    pub offset: Point2,
    pub scale: f64,
    pub rotation: f64,
    pub reveal: f64,
    /// Weight of the lerp toward white, 0 = base color.
    pub tint: f64,
}

impl Delta {
    pub const IDENTITY: Delta =
        Delta { opacity: 1.0, offset: [0.0, 0.0], scale: 1.0, rotation: 0.0, reveal: 1.0, tint: 0.0 };
}

/// Evaluation rule for a built-in preset at eased progress `e`. Unknown
/// presets (custom classes without a rule) contribute nothing.
pub fn delta(preset: &str, e: f64, direction: Direction) -> Delta {
    let [dx, dy] = direction.vector();
    let mut d = Delta::IDENTITY;
    match preset {
        "fade_in" => d.opacity = e,
        "fade_out" => d.opacity = 1.0 - e,
        "slide_in" => {
            let k = -SLIDE_DISTANCE * (1.0 - e);
            d.offset = [dx * k, dy * k];
        }
        "slide_out" => {
            let k = SLIDE_DISTANCE * e;
            d.offset = [dx * k, dy * k];
        }
        "scale_pop" => {
            let rest = 1.0 - e;
            d.scale = 1.0 - 0.75 * rest + 0.5 * e * rest;
            d.opacity = e;
            d.rotation = -15.0 * rest;
        }
        "typewriter" => d.reveal = e,
        "bounce" => {
            let k = SLIDE_DISTANCE * (1.0 - e) * (3.0 * std::f64::consts::PI * e).sin().abs();
            d.offset = [dx * k, dy * k];
        }
        "color_pulse" => d.tint = 2.4 * e * (1.0 - e),
        _ => {}
    }
    d
}
