//! The block vocabulary and the capability manifest derived from it.
//!
//! The catalog is the single source of truth for what a program may contain
//! and what the robot can do. Everything else (validation, lowering, the
//! simulator's range checks, the LLM capability text, goal verification)
//! reads its ranges and options from here.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Inclusive numeric range `(min, max)`.
pub type Range = (f64, f64);

pub const REPEAT_COUNT: Range = (1.0, 100.0);
pub const WAIT_SECONDS: Range = (0.1, 60.0);
pub const NUMBER_LITERAL: Range = (-1000.0, 1000.0);
pub const HEAD_PITCH: Range = (-40.0, 26.0);
pub const HEAD_ROLL: Range = (-40.0, 40.0);
pub const HEAD_YAW: Range = (-90.0, 90.0);
pub const ARM_POSITION: Range = (-29.0, 90.0);
pub const MOVE_DURATION: Range = (0.2, 10.0);
pub const LED_CHANNEL: Range = (0.0, 255.0);
pub const SPEECH_MAX_CHARS: usize = 500;

pub const FACE_EXPRESSIONS: [&str; 7] = [
    "default",
    "happy",
    "sad",
    "surprise",
    "rage_eyes",
    "love",
    "sleepy",
];
pub const AUDIO_CLIPS: [&str; 4] = ["chime", "fanfare", "beep_low", "beep_high"];
pub const ARM_SIDES: [&str; 2] = ["left", "right"];

/// Playback length of each bundled audio clip, in seconds.
pub fn clip_duration(clip: &str) -> Option<f64> {
    match clip {
        "chime" => Some(1.5),
        "fanfare" => Some(3.0),
        "beep_low" | "beep_high" => Some(0.5),
        _ => None,
    }
}

pub fn in_range(value: f64, (min, max): Range) -> bool {
    value.is_finite() && min <= value && value <= max
}

/// Drawer a block is listed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Control,
    Math,
    Movement,
    Light,
    Speech,
    Face,
    Audio,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Control,
        Category::Math,
        Category::Movement,
        Category::Light,
        Category::Speech,
        Category::Face,
        Category::Audio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Control => "Control",
            Category::Math => "Math",
            Category::Movement => "Movement",
            Category::Light => "Light",
            Category::Speech => "Speech",
            Category::Face => "Face",
            Category::Audio => "Audio",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a block may be attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connection {
    /// Stacks inside a statement sequence.
    Statement,
    /// Plugs into a number slot of another block.
    Value,
    /// Top of the program; never nested.
    Root,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Slot {
    Number {
        min: f64,
        max: f64,
        unit: String,
        /// Only whole numbers are accepted.
        #[serde(default)]
        integer: bool,
    },
    Text {
        max_len: usize,
    },
    Enum {
        options: Vec<String>,
    },
}

impl Slot {
    fn number(range: Range, unit: &str, integer: bool) -> Self {
        Slot::Number {
            min: range.0,
            max: range.1,
            unit: unit.to_owned(),
            integer,
        }
    }

    fn options(options: &[&str]) -> Self {
        Slot::Enum {
            options: options.iter().map(|s| (*s).to_owned()).collect(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Slot::Number { .. } => "number",
            Slot::Text { .. } => "text",
            Slot::Enum { .. } => "enum",
        }
    }

    /// Clamp (and round, for integer slots) a resolved numeric value into the
    /// slot. Non-number slots return the value unchanged.
    pub fn coerce(&self, value: f64) -> f64 {
        match *self {
            Slot::Number {
                min, max, integer, ..
            } => {
                let v = if integer { value.round() } else { value };
                v.clamp(min, max)
            }
            _ => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub slot: Slot,
    pub accepts_value_block: bool,
}

impl ParamSpec {
    fn new(name: &str, slot: Slot, accepts_value_block: bool) -> Self {
        Self {
            name: name.to_owned(),
            slot,
            accepts_value_block,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockKind {
    pub id: String,
    pub category: Category,
    pub params: Vec<ParamSpec>,
    pub connects_as: Connection,
    /// Names of the statement sequences this block holds (`start` and
    /// `repeat` hold a `body`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bodies: Vec<String>,
    /// One-line explanation shown in the drawer and in capability text.
    pub description: String,
}

impl BlockKind {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub verb: String,
    pub block_ids: Vec<String>,
    pub description: String,
}

/// What the robot can do, phrased for prompts and for the features panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityManifest {
    pub capabilities: Vec<Capability>,
    pub face_expressions: Vec<String>,
    pub audio_clips: Vec<String>,
}

/// An ordered, immutable set of block kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog {
    kinds: Vec<BlockKind>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("duplicate block id `{0}`")]
    DuplicateId(String),
    #[error("catalog must have exactly one root kind, found {0}")]
    RootCount(usize),
    #[error("parameter `{kind}.{param}` has an invalid slot: {reason}")]
    BadSlot {
        kind: String,
        param: String,
        reason: &'static str,
    },
    #[error("manifest references unknown block `{0}`")]
    UnknownManifestBlock(String),
    #[error("manifest {0} do not match the catalog options")]
    ManifestOptionsMismatch(&'static str),
}

impl Catalog {
    /// Build a catalog, checking id uniqueness, root uniqueness and slot shapes.
    pub fn new(kinds: Vec<BlockKind>) -> Result<Self, CatalogError> {
        let mut seen = BTreeSet::new();
        for kind in &kinds {
            if !seen.insert(kind.id.as_str()) {
                return Err(CatalogError::DuplicateId(kind.id.clone()));
            }
            for param in &kind.params {
                let bad = |reason| CatalogError::BadSlot {
                    kind: kind.id.clone(),
                    param: param.name.clone(),
                    reason,
                };
                match &param.slot {
                    Slot::Number { min, max, .. } if min.is_nan() || max.is_nan() || min > max => {
                        return Err(bad("min > max"))
                    }
                    Slot::Text { max_len: 0 } => return Err(bad("max_len is zero")),
                    Slot::Enum { options } if options.is_empty() => {
                        return Err(bad("no options"))
                    }
                    _ => {}
                }
            }
        }
        let roots = kinds
            .iter()
            .filter(|k| k.connects_as == Connection::Root)
            .count();
        if roots != 1 {
            return Err(CatalogError::RootCount(roots));
        }
        Ok(Self { kinds })
    }

    pub fn kinds(&self) -> &[BlockKind] {
        &self.kinds
    }

    pub fn get(&self, id: &str) -> Option<&BlockKind> {
        self.kinds.iter().find(|k| k.id == id)
    }

    pub fn root(&self) -> &BlockKind {
        self.kinds
            .iter()
            .find(|k| k.connects_as == Connection::Root)
            .expect("catalog invariant: exactly one root")
    }

    pub fn in_category(&self, category: Category) -> impl Iterator<Item = &BlockKind> {
        self.kinds.iter().filter(move |k| k.category == category)
    }

    fn enum_options(&self, kind: &str, param: &str) -> Vec<String> {
        match self.get(kind).and_then(|k| k.param(param)).map(|p| &p.slot) {
            Some(Slot::Enum { options }) => options.clone(),
            _ => Vec::new(),
        }
    }

    /// Derive the capability manifest. Verbs are grouped by category.
    pub fn manifest(&self) -> CapabilityManifest {
        let capabilities = Category::ALL
            .iter()
            .filter_map(|&category| {
                let ids: Vec<String> = self.in_category(category).map(|k| k.id.clone()).collect();
                if ids.is_empty() {
                    return None;
                }
                let (verb, description) = capability_text(category);
                Some(Capability {
                    verb: verb.to_owned(),
                    block_ids: ids,
                    description: description.to_owned(),
                })
            })
            .collect();
        CapabilityManifest {
            capabilities,
            face_expressions: self.enum_options("set_face", "expression"),
            audio_clips: self.enum_options("play_audio", "clip"),
        }
    }

    /// Check that every id the manifest mentions resolves here and that the
    /// resource lists mirror the catalog's enum options.
    pub fn check_manifest(&self, manifest: &CapabilityManifest) -> Result<(), CatalogError> {
        for cap in &manifest.capabilities {
            for id in &cap.block_ids {
                if self.get(id).is_none() {
                    return Err(CatalogError::UnknownManifestBlock(id.clone()));
                }
            }
        }
        if manifest.face_expressions != self.enum_options("set_face", "expression") {
            return Err(CatalogError::ManifestOptionsMismatch("face expressions"));
        }
        if manifest.audio_clips != self.enum_options("play_audio", "clip") {
            return Err(CatalogError::ManifestOptionsMismatch("audio clips"));
        }
        Ok(())
    }

    /// The catalog as the JSON array the UI renders its drawer from.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.kinds).expect("catalog serializes")
    }
}

fn capability_text(category: Category) -> (&'static str, &'static str) {
    match category {
        Category::Control => (
            "sequence",
            "Run blocks in order, repeat a group of blocks, or pause for a number of seconds.",
        ),
        Category::Math => (
            "compute",
            "Produce a number or a random whole number to plug into another block.",
        ),
        Category::Movement => ("move", "Move the head (pitch, roll, yaw) and raise or lower either arm."),
        Category::Light => ("light", "Change the color of the chest LED."),
        Category::Speech => ("speak", "Say a sentence out loud with text-to-speech."),
        Category::Face => ("emote", "Show a facial expression on the face display."),
        Category::Audio => ("play", "Play one of the bundled sound clips."),
    }
}

fn kind(
    id: &str,
    category: Category,
    connects_as: Connection,
    params: Vec<ParamSpec>,
    description: &str,
) -> BlockKind {
    BlockKind {
        id: id.to_owned(),
        category,
        params,
        connects_as,
        bodies: Vec::new(),
        description: description.to_owned(),
    }
}

/// The fixed block catalog and its manifest.
pub fn builtin_catalog() -> (Catalog, CapabilityManifest) {
    use Category::*;
    use Connection::*;

    let num = |name: &str, range: Range, unit: &str, integer: bool| {
        ParamSpec::new(name, Slot::number(range, unit, integer), true)
    };
    let duration = || num("duration", MOVE_DURATION, "s", false);

    let mut start = kind("start", Control, Root, vec![], "When the program starts, run the blocks inside.");
    start.bodies = vec!["body".to_owned()];
    let mut repeat = kind(
        "repeat",
        Control,
        Statement,
        vec![num("count", REPEAT_COUNT, "times", true)],
        "Run the blocks inside a number of times.",
    );
    repeat.bodies = vec!["body".to_owned()];

    let kinds = vec![
        start,
        repeat,
        kind(
            "wait",
            Control,
            Statement,
            vec![num("seconds", WAIT_SECONDS, "s", false)],
            "Pause before the next block.",
        ),
        kind(
            "number",
            Math,
            Value,
            vec![ParamSpec::new("value", Slot::number(NUMBER_LITERAL, "", false), false)],
            "A number.",
        ),
        kind(
            "random_int",
            Math,
            Value,
            vec![
                num("min", NUMBER_LITERAL, "", true),
                num("max", NUMBER_LITERAL, "", true),
            ],
            "A random whole number between min and max, fixed per run.",
        ),
        kind(
            "move_head",
            Movement,
            Statement,
            vec![
                num("pitch", HEAD_PITCH, "deg", false),
                num("roll", HEAD_ROLL, "deg", false),
                num("yaw", HEAD_YAW, "deg", false),
                duration(),
            ],
            "Turn the head to an orientation over a duration.",
        ),
        kind(
            "move_arm",
            Movement,
            Statement,
            vec![
                ParamSpec::new("side", Slot::options(&ARM_SIDES), false),
                num("position", ARM_POSITION, "deg", false),
                duration(),
            ],
            "Move one arm to a position (90 is down, -29 is raised) over a duration.",
        ),
        kind(
            "set_led",
            Light,
            Statement,
            vec![
                num("red", LED_CHANNEL, "", true),
                num("green", LED_CHANNEL, "", true),
                num("blue", LED_CHANNEL, "", true),
            ],
            "Set the chest LED color.",
        ),
        kind(
            "speak",
            Speech,
            Statement,
            vec![ParamSpec::new(
                "text",
                Slot::Text {
                    max_len: SPEECH_MAX_CHARS,
                },
                false,
            )],
            "Say the text out loud.",
        ),
        kind(
            "set_face",
            Face,
            Statement,
            vec![ParamSpec::new("expression", Slot::options(&FACE_EXPRESSIONS), false)],
            "Show a facial expression.",
        ),
        kind(
            "play_audio",
            Audio,
            Statement,
            vec![ParamSpec::new("clip", Slot::options(&AUDIO_CLIPS), false)],
            "Play a sound clip.",
        ),
    ];
    let catalog = Catalog::new(kinds).expect("builtin catalog is well formed");
    let manifest = catalog.manifest();
    (catalog, manifest)
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Human-readable capability text for prompts and the features panel.
///
/// Blocks are listed under the drawer (category) they live in, with each
/// parameter's range or options.
pub fn render_manifest_text(catalog: &Catalog, manifest: &CapabilityManifest) -> String {
    let mut out = String::from("ROBOT CAPABILITIES\n");
    for cap in &manifest.capabilities {
        let kinds: Vec<&BlockKind> = cap.block_ids.iter().filter_map(|id| catalog.get(id)).collect();
        let drawer = kinds.first().map(|k| k.category.as_str()).unwrap_or("?");
        let _ = writeln!(out, "\n[{}] drawer: {}", cap.verb, drawer);
        let _ = writeln!(out, "  {}", cap.description);
        for kind in kinds {
            let _ = writeln!(out, "  - {} ({}): {}", kind.id, connection_label(kind.connects_as), kind.description);
            for p in &kind.params {
                let detail = match &p.slot {
                    Slot::Number {
                        min,
                        max,
                        unit,
                        integer,
                    } => {
                        let whole = if *integer { ", whole numbers" } else { "" };
                        let unit = if unit.is_empty() {
                            String::new()
                        } else {
                            format!(" {unit}")
                        };
                        format!("number {}..{}{unit}{whole}", fmt_num(*min), fmt_num(*max))
                    }
                    Slot::Text { max_len } => format!("text up to {max_len} characters"),
                    Slot::Enum { options } => format!("one of: {}", options.join(", ")),
                };
                let plug = if p.accepts_value_block {
                    " (accepts a Math block)"
                } else {
                    ""
                };
                let _ = writeln!(out, "      {}: {detail}{plug}", p.name);
            }
            for body in &kind.bodies {
                let _ = writeln!(out, "      {body}: a sequence of blocks");
            }
        }
    }
    if !manifest.capabilities.is_empty() {
        let _ = writeln!(out, "\nFace expressions: {}", manifest.face_expressions.join(", "));
        let _ = writeln!(out, "Audio clips: {}", manifest.audio_clips.join(", "));
        out.push_str(
            "\nThe robot cannot do anything that is not listed above \
             (no timers, alarms, sensors or reactions to events).\n",
        );
    }
    out
}

fn connection_label(c: Connection) -> &'static str {
    match c {
        Connection::Statement => "statement",
        Connection::Value => "value",
        Connection::Root => "root",
    }
}
