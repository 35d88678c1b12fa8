//! Deterministic playback of an [`ActionTimeline`] into sampled robot states.
//!
//! Actions run one after another. Joint moves interpolate linearly from the
//! pose at the start of the move to the target; face and LED changes apply
//! at the start of their (nominal) slot; speech and audio are visible for the
//! action's duration and clear when it ends.

use serde::{Deserialize, Serialize};

use crate::catalog::{self, in_range};
use crate::program::{Action, ActionTimeline, ArmSide, RangeError};

/// Default sampling interval, seconds.
pub const DEFAULT_TICK: f64 = 0.1;

// Tick samples closer than this to an action boundary are dropped in favour
// of the boundary frame.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arms {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Led {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub head: Head,
    pub arms: Arms,
    pub led: Led,
    pub face: String,
    pub speaking: Option<String>,
    pub audio: Option<String>,
    pub clock: f64,
}

/// The rest pose: head level, both arms down, LED off, neutral face.
pub fn initial_state() -> RobotState {
    RobotState {
        head: Head {
            pitch: 0.0,
            roll: 0.0,
            yaw: 0.0,
        },
        arms: Arms {
            left: 90.0,
            right: 90.0,
        },
        led: Led { r: 0, g: 0, b: 0 },
        face: "default".to_owned(),
        speaking: None,
        audio: None,
        clock: 0.0,
    }
}

impl RobotState {
    /// Check every field against the catalog limits.
    pub fn check(&self) -> Result<(), RangeError> {
        let num = |field, v, range| {
            if in_range(v, range) {
                Ok(())
            } else {
                Err(RangeError {
                    field,
                    value: v.to_string(),
                })
            }
        };
        num("head.pitch", self.head.pitch, catalog::HEAD_PITCH)?;
        num("head.roll", self.head.roll, catalog::HEAD_ROLL)?;
        num("head.yaw", self.head.yaw, catalog::HEAD_YAW)?;
        num("arms.left", self.arms.left, catalog::ARM_POSITION)?;
        num("arms.right", self.arms.right, catalog::ARM_POSITION)?;
        if !catalog::FACE_EXPRESSIONS.contains(&self.face.as_str()) {
            return Err(RangeError {
                field: "face",
                value: self.face.clone(),
            });
        }
        if let Some(clip) = &self.audio {
            if !catalog::AUDIO_CLIPS.contains(&clip.as_str()) {
                return Err(RangeError {
                    field: "audio",
                    value: clip.clone(),
                });
            }
        }
        if !(self.clock.is_finite() && self.clock >= 0.0) {
            return Err(RangeError {
                field: "clock",
                value: self.clock.to_string(),
            });
        }
        Ok(())
    }
}

fn lerp(from: f64, to: f64, frac: f64) -> f64 {
    from + (to - from) * frac
}

/// State `offset` seconds into `action`, which began in `state`. The clock of
/// the result is `state.clock + offset`.
///
/// At `offset == action.duration()` this is the completed action.
pub fn sample(state: &RobotState, action: &Action, offset: f64) -> RobotState {
    let d = action.duration();
    let done = offset >= d;
    let frac = if done { 1.0 } else { (offset / d).clamp(0.0, 1.0) };
    let mut s = state.clone();
    s.speaking = None;
    s.audio = None;
    match action {
        Action::Speak { text, .. } => {
            if !done {
                s.speaking = Some(text.clone());
            }
        }
        Action::SetFace { expression } => s.face = expression.clone(),
        Action::SetLed { r, g, b } => {
            s.led = Led {
                r: *r,
                g: *g,
                b: *b,
            }
        }
        Action::MoveHead {
            pitch, roll, yaw, ..
        } => {
            if done {
                s.head = Head {
                    pitch: *pitch,
                    roll: *roll,
                    yaw: *yaw,
                };
            } else {
                s.head = Head {
                    pitch: lerp(state.head.pitch, *pitch, frac),
                    roll: lerp(state.head.roll, *roll, frac),
                    yaw: lerp(state.head.yaw, *yaw, frac),
                };
            }
        }
        Action::MoveArm { side, position, .. } => {
            let arm = match side {
                ArmSide::Left => &mut s.arms.left,
                ArmSide::Right => &mut s.arms.right,
            };
            let from = *arm;
            *arm = if done {
                *position
            } else {
                lerp(from, *position, frac)
            };
        }
        Action::PlayAudio { clip, .. } => {
            if !done {
                s.audio = Some(clip.clone());
            }
        }
        Action::Wait { .. } => {}
    }
    s.clock = if done { state.clock + d } else { state.clock + offset };
    s
}

/// Apply one action to completion.
pub fn step(state: &RobotState, action: &Action) -> Result<RobotState, RangeError> {
    action.check_ranges()?;
    Ok(sample(state, action, action.duration()))
}

/// Sampled playback of a timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrace {
    pub frames: Vec<RobotState>,
    #[serde(rename = "final")]
    pub final_state: RobotState,
}

impl StateTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

pub fn run(timeline: &ActionTimeline) -> Result<StateTrace, RangeError> {
    run_with_tick(timeline, DEFAULT_TICK)
}

/// Play a timeline, emitting a frame at every action boundary and at every
/// multiple of `tick` in between. The last frame is the final state.
pub fn run_with_tick(timeline: &ActionTimeline, tick: f64) -> Result<StateTrace, RangeError> {
    assert!(tick.is_finite() && tick > 0.0, "tick must be positive");

    // State at the start of each action, plus the final state.
    let mut starts = Vec::with_capacity(timeline.len() + 1);
    let mut state = initial_state();
    for timed in &timeline.actions {
        let next = step(&state, &timed.action)?;
        starts.push(state);
        state = next;
    }
    let final_state = state;

    let mut frames = Vec::new();
    for (i, timed) in timeline.actions.iter().enumerate() {
        let begin = starts[i].clock;
        let end = begin + timed.action.duration();
        frames.push(sample(&starts[i], &timed.action, 0.0));
        let mut k = (begin / tick).floor() as u64 + 1;
        loop {
            let t = k as f64 * tick;
            if t >= end - BOUNDARY_EPS {
                break;
            }
            if t > begin + BOUNDARY_EPS {
                frames.push(sample(&starts[i], &timed.action, t - begin));
            }
            k += 1;
        }
    }
    frames.push(final_state.clone());
    Ok(StateTrace {
        frames,
        final_state,
    })
}
