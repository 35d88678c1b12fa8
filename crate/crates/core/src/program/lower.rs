use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{validate, ArgValue, Block, BlockProgram};
use crate::catalog::{self, in_range, Catalog};

/// Nominal duration of the instantaneous face and LED actions, seconds.
pub const INSTANT_DURATION: f64 = 0.1;
/// Default speech rate used to estimate how long an utterance takes.
pub const DEFAULT_SPEECH_RATE_WPS: f64 = 2.5;
/// Shortest estimated utterance, seconds.
pub const MIN_SPEECH_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    pub fn as_str(self) -> &'static str {
        match self {
            ArmSide::Left => "left",
            ArmSide::Right => "right",
        }
    }
}

/// One primitive robot behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Speak { text: String, est_duration: f64 },
    SetFace { expression: String },
    MoveHead { pitch: f64, roll: f64, yaw: f64, duration: f64 },
    MoveArm { side: ArmSide, position: f64, duration: f64 },
    SetLed { r: u8, g: u8, b: u8 },
    PlayAudio { clip: String, duration: f64 },
    Wait { duration: f64 },
}

/// An action field outside the robot's limits.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field} = {value} is outside the robot's range")]
pub struct RangeError {
    pub field: &'static str,
    pub value: String,
}

impl Action {
    pub fn duration(&self) -> f64 {
        match *self {
            Action::Speak { est_duration, .. } => est_duration,
            Action::SetFace { .. } | Action::SetLed { .. } => INSTANT_DURATION,
            Action::MoveHead { duration, .. }
            | Action::MoveArm { duration, .. }
            | Action::PlayAudio { duration, .. }
            | Action::Wait { duration } => duration,
        }
    }

    pub fn is_wait(&self) -> bool {
        matches!(self, Action::Wait { .. })
    }

    /// Check every field against the builtin catalog ranges.
    pub fn check_ranges(&self) -> Result<(), RangeError> {
        fn num(field: &'static str, v: f64, range: catalog::Range) -> Result<(), RangeError> {
            if in_range(v, range) {
                Ok(())
            } else {
                Err(RangeError {
                    field,
                    value: v.to_string(),
                })
            }
        }
        fn positive(field: &'static str, v: f64) -> Result<(), RangeError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(RangeError {
                    field,
                    value: v.to_string(),
                })
            }
        }
        match self {
            Action::Speak { text, est_duration } => {
                if text.chars().count() > catalog::SPEECH_MAX_CHARS {
                    return Err(RangeError {
                        field: "speak.text",
                        value: format!("{} characters", text.chars().count()),
                    });
                }
                positive("speak.est_duration", *est_duration)
            }
            Action::SetFace { expression } => {
                if catalog::FACE_EXPRESSIONS.contains(&expression.as_str()) {
                    Ok(())
                } else {
                    Err(RangeError {
                        field: "set_face.expression",
                        value: expression.clone(),
                    })
                }
            }
            Action::MoveHead {
                pitch,
                roll,
                yaw,
                duration,
            } => {
                num("move_head.pitch", *pitch, catalog::HEAD_PITCH)?;
                num("move_head.roll", *roll, catalog::HEAD_ROLL)?;
                num("move_head.yaw", *yaw, catalog::HEAD_YAW)?;
                num("move_head.duration", *duration, catalog::MOVE_DURATION)
            }
            Action::MoveArm {
                position, duration, ..
            } => {
                num("move_arm.position", *position, catalog::ARM_POSITION)?;
                num("move_arm.duration", *duration, catalog::MOVE_DURATION)
            }
            Action::SetLed { .. } => Ok(()),
            Action::PlayAudio { clip, duration } => {
                if !catalog::AUDIO_CLIPS.contains(&clip.as_str()) {
                    return Err(RangeError {
                        field: "play_audio.clip",
                        value: clip.clone(),
                    });
                }
                positive("play_audio.duration", *duration)
            }
            Action::Wait { duration } => num("wait.duration", *duration, catalog::WAIT_SECONDS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub start: f64,
    pub action: Action,
}

/// Flat, sequential schedule of robot actions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionTimeline {
    pub actions: Vec<TimedAction>,
    pub total_duration: f64,
}

impl ActionTimeline {
    /// Schedule actions back to back starting at zero.
    pub fn sequential(actions: impl IntoIterator<Item = Action>) -> Self {
        let mut t = 0.0;
        let actions = actions
            .into_iter()
            .map(|action| {
                let start = t;
                t += action.duration();
                TimedAction { start, action }
            })
            .collect();
        Self {
            actions,
            total_duration: t,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().map(|t| &t.action)
    }

    /// Check the scheduling invariants: back-to-back start times beginning
    /// at zero, positive durations, and a matching total.
    pub fn check(&self) -> Result<(), String> {
        let mut t = 0.0;
        for (i, timed) in self.actions.iter().enumerate() {
            let d = timed.action.duration();
            if !(d.is_finite() && d > 0.0) {
                return Err(format!("action {i} has non-positive duration {d}"));
            }
            if timed.start != t {
                return Err(format!("action {i} starts at {} instead of {t}", timed.start));
            }
            t += d;
        }
        if self.total_duration != t {
            return Err(format!("total_duration {} instead of {t}", self.total_duration));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("timeline serializes")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoweringError {
    #[error("program is invalid at {path}")]
    Invalid { path: String },
    #[error("no lowering rule for block `{kind}` at {path}")]
    Unsupported { path: String, kind: String },
    #[error("speech rate must be a positive number of words per second, got {0}")]
    InvalidRate(f64),
}

impl fmt::Display for TimedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>8.3}s {:?}", self.start, self.action)
    }
}

/// Lower a validated program into a timeline.
///
/// Execution is depth-first and sequential. Each `random_int` block is
/// resolved once from the program seed, so every iteration of an enclosing
/// `repeat` sees the same value. Resolved values are clamped (and rounded,
/// for whole-number slots) into the slot they are plugged into.
pub fn lower(
    program: &BlockProgram,
    catalog: &Catalog,
    speech_rate_wps: f64,
) -> Result<ActionTimeline, LoweringError> {
    if let Some(v) = validate(program, catalog).violations.into_iter().next() {
        return Err(LoweringError::Invalid { path: v.path });
    }
    if !(speech_rate_wps.is_finite() && speech_rate_wps > 0.0) {
        return Err(LoweringError::InvalidRate(speech_rate_wps));
    }
    let mut resolver = Resolver {
        catalog,
        rng: ChaCha8Rng::seed_from_u64(program.seed),
        rate: speech_rate_wps,
    };
    let tree = resolver.seq(program.root.seq("body"), "/root/body")?;
    let mut actions = Vec::new();
    unroll(&tree, &mut actions);
    Ok(ActionTimeline::sequential(actions))
}

enum Stmt {
    Act(Action),
    Repeat(u32, Vec<Stmt>),
}

fn unroll(stmts: &[Stmt], out: &mut Vec<Action>) {
    for stmt in stmts {
        match stmt {
            Stmt::Act(a) => out.push(a.clone()),
            Stmt::Repeat(n, body) => {
                for _ in 0..*n {
                    unroll(body, out);
                }
            }
        }
    }
}

pub(crate) fn speech_seconds(text: &str, rate: f64) -> f64 {
    let words = text.split_whitespace().count() as f64;
    (words / rate).max(MIN_SPEECH_SECONDS)
}

struct Resolver<'a> {
    catalog: &'a Catalog,
    rng: ChaCha8Rng,
    rate: f64,
}

impl Resolver<'_> {
    fn seq(&mut self, blocks: &[Block], path: &str) -> Result<Vec<Stmt>, LoweringError> {
        blocks
            .iter()
            .enumerate()
            .map(|(i, b)| self.stmt(b, &format!("{path}/{i}")))
            .collect()
    }

    fn number(&mut self, block: &Block, name: &str) -> f64 {
        let kind = self.catalog.get(&block.kind).expect("validated");
        let slot = &kind.param(name).expect("validated").slot;
        let raw = match &block.args[name] {
            ArgValue::Number(v) => *v,
            ArgValue::Block(inner) => self.value_block(inner),
            ArgValue::Text(_) => unreachable!("validated"),
        };
        slot.coerce(raw)
    }

    fn text<'b>(&self, block: &'b Block, name: &str) -> &'b str {
        match &block.args[name] {
            ArgValue::Text(s) => s,
            _ => unreachable!("validated"),
        }
    }

    fn value_block(&mut self, block: &Block) -> f64 {
        match block.kind.as_str() {
            "number" => self.number(block, "value"),
            "random_int" => {
                let a = self.number(block, "min") as i64;
                let b = self.number(block, "max") as i64;
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                self.rng.random_range(lo..=hi) as f64
            }
            // Unknown value kinds in a custom catalog read as zero.
            _ => 0.0,
        }
    }

    fn stmt(&mut self, block: &Block, path: &str) -> Result<Stmt, LoweringError> {
        let action = match block.kind.as_str() {
            "repeat" => {
                let count = self.number(block, "count") as u32;
                let body = self.seq(block.seq("body"), &format!("{path}/body"))?;
                return Ok(Stmt::Repeat(count, body));
            }
            "wait" => Action::Wait {
                duration: self.number(block, "seconds"),
            },
            "move_head" => Action::MoveHead {
                pitch: self.number(block, "pitch"),
                roll: self.number(block, "roll"),
                yaw: self.number(block, "yaw"),
                duration: self.number(block, "duration"),
            },
            "move_arm" => Action::MoveArm {
                side: if self.text(block, "side") == "left" {
                    ArmSide::Left
                } else {
                    ArmSide::Right
                },
                position: self.number(block, "position"),
                duration: self.number(block, "duration"),
            },
            "set_led" => Action::SetLed {
                r: self.number(block, "red") as u8,
                g: self.number(block, "green") as u8,
                b: self.number(block, "blue") as u8,
            },
            "speak" => {
                let text = self.text(block, "text").to_owned();
                let est_duration = speech_seconds(&text, self.rate);
                Action::Speak { text, est_duration }
            }
            "set_face" => Action::SetFace {
                expression: self.text(block, "expression").to_owned(),
            },
            "play_audio" => {
                let clip = self.text(block, "clip").to_owned();
                let duration = catalog::clip_duration(&clip).ok_or_else(|| LoweringError::Unsupported {
                    path: path.to_owned(),
                    kind: format!("play_audio clip `{clip}`"),
                })?;
                Action::PlayAudio { clip, duration }
            }
            other => {
                return Err(LoweringError::Unsupported {
                    path: path.to_owned(),
                    kind: other.to_owned(),
                })
            }
        };
        Ok(Stmt::Act(action))
    }
}
