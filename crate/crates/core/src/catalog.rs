//! Built-in meta classes: the asset, track and clip classes plus the preset
//! animation catalog.

use crate::id::IdKind;
use crate::meta::{Category, FieldKind, FieldValue, MetaClass, MetaField, MetaRegistry};
use crate::model::TextStyle;
use crate::time::Time;
use crate::timeline::presets;

pub const ASSET: &str = "asset";
pub const TRACK: &str = "track";
pub const CLIP: &str = "clip";

/// Longest representable timeline position, one day.
pub const MAX_SECONDS: f64 = 86_400.0;

pub fn asset_class() -> MetaClass {
    MetaClass::new(
        ASSET,
        Category::Asset,
        vec![
            MetaField::new("kind", FieldKind::Enum, FieldValue::Enum("image".into()))
                .allowed(&["image", "audio", "video"])
                .describe("Media type", "Image, audio or video"),
            MetaField::new("name", FieldKind::String, FieldValue::String(String::new()))
                .describe("Display name", "Shown in the resource panel"),
            MetaField::new("uri", FieldKind::String, FieldValue::String(String::new()))
                .describe("Location of the media bytes", "Where the file lives"),
            MetaField::new("media_duration", FieldKind::TimeSeconds, FieldValue::TimeSeconds(Time::ZERO))
                .interval(0.0, MAX_SECONDS)
                .unit("s")
                .describe(
                    "Length of audio or video media; 0 for images",
                    "Playable length of the file",
                ),
        ],
    )
}

pub fn track_class() -> MetaClass {
    MetaClass::new(
        TRACK,
        Category::TimelineElement,
        vec![
            MetaField::new("kind", FieldKind::Enum, FieldValue::Enum("text".into()))
                .allowed(&["text", "video", "image", "audio", "element"])
                .describe("Kind of clips the track holds", "Track type"),
            MetaField::new("name", FieldKind::String, FieldValue::String(String::new()))
                .describe("Display name", "Track label"),
            MetaField::new("order_index", FieldKind::Integer, FieldValue::Integer(0))
                .interval(0.0, 1_000_000.0)
                .describe(
                    "Stacking position; lower draws first. Omit to append on top",
                    "Layer order",
                ),
            MetaField::new("script_visible", FieldKind::Boolean, FieldValue::Boolean(true))
                .describe("Whether the track's text clips appear in the script", "Show in script"),
        ],
    )
    .with_id_kind(IdKind::Track)
}

pub fn clip_class() -> MetaClass {
    let style = TextStyle::default();
    MetaClass::new(
        CLIP,
        Category::TimelineElement,
        vec![
            MetaField::new("start", FieldKind::TimeSeconds, FieldValue::TimeSeconds(Time::ZERO))
                .interval(0.0, MAX_SECONDS)
                .unit("s")
                .describe("Start time on the timeline", "When the clip appears"),
            MetaField::new(
                "duration",
                FieldKind::TimeSeconds,
                FieldValue::TimeSeconds(Time::from_millis(2000)),
            )
            .interval(0.001, MAX_SECONDS)
            .unit("s")
            .describe("Length of the clip", "How long the clip stays"),
            MetaField::new("content", FieldKind::String, FieldValue::String(String::new()))
                .describe("Text content of a text clip", "The words shown"),
            MetaField::new("font_family", FieldKind::String, FieldValue::String(style.font_family))
                .describe("Font family of a text clip", "Typeface"),
            MetaField::new("font_size", FieldKind::Number, FieldValue::Number(style.font_size))
                .interval(1.0, 512.0)
                .unit("pt")
                .describe("Font size of a text clip", "Text size"),
            MetaField::new("color", FieldKind::Color, FieldValue::Color(style.color))
                .describe("RGBA text color, channels in [0, 1]", "Text color"),
            MetaField::new("position", FieldKind::Point2dNormalized, FieldValue::Point2dNormalized(style.position))
                .describe("Anchor on the canvas, normalized, origin top-left", "Where the text sits"),
            MetaField::new("alignment", FieldKind::Enum, FieldValue::Enum("center".into()))
                .allowed(&["left", "center", "right"])
                .describe("Horizontal text alignment", "Alignment"),
            MetaField::new("asset", FieldKind::AssetRef, FieldValue::AssetRef(None))
                .describe("Media asset of a video, image or audio clip", "Source media"),
            MetaField::new("trim_in", FieldKind::TimeSeconds, FieldValue::TimeSeconds(Time::ZERO))
                .interval(0.0, MAX_SECONDS)
                .unit("s")
                .describe("Offset into the media where playback starts", "Trim start"),
            MetaField::new("element_kind", FieldKind::String, FieldValue::String("rect".into()))
                .describe("Shape or icon kind of an element clip", "Element type"),
        ],
    )
}

/// Registry holding the built-in classes.
pub fn builtin_registry() -> MetaRegistry {
    let mut reg = MetaRegistry::new();
    for class in [asset_class(), track_class(), clip_class()] {
        reg.register(class).expect("built-in class is valid");
    }
    for p in presets::CATALOG {
        reg.register(presets::preset_class(p).expect("catalog entry"))
            .expect("built-in preset is valid");
    }
    reg
}
