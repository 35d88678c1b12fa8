//! The wire protocol, isolated in one table so it can be retargeted.
//!
//! Every non-wait action becomes exactly one `POST` with a JSON body.
//! Responses are `200 {"status":"Success"}`. The health check is
//! `GET /api/device`, answered with `200 {"name": ..., "apiVersion": ...}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use storybot_core::program::Action;

pub const DEVICE_ENDPOINT: &str = "/api/device";
pub const SPEAK_ENDPOINT: &str = "/api/tts/speak";
pub const FACE_ENDPOINT: &str = "/api/images/display";
pub const HEAD_ENDPOINT: &str = "/api/head";
pub const ARMS_ENDPOINT: &str = "/api/arms";
pub const LED_ENDPOINT: &str = "/api/led";
pub const AUDIO_ENDPOINT: &str = "/api/audio/play";

/// Action type to endpoint. Waits have no row; they only pace.
pub const COMMAND_TABLE: &[(&str, &str)] = &[
    ("speak", SPEAK_ENDPOINT),
    ("set_face", FACE_ENDPOINT),
    ("move_head", HEAD_ENDPOINT),
    ("move_arm", ARMS_ENDPOINT),
    ("set_led", LED_ENDPOINT),
    ("play_audio", AUDIO_ENDPOINT),
];

/// One REST request derived from an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub endpoint: String,
    pub payload: Value,
}

fn endpoint_for(action_type: &str) -> &'static str {
    COMMAND_TABLE
        .iter()
        .find(|(t, _)| *t == action_type)
        .map(|(_, e)| *e)
        .expect("every non-wait action type has a table row")
}

/// The request for an action, or `None` for a wait.
pub fn command_for(action: &Action) -> Option<Command> {
    let (kind, payload) = match action {
        Action::Speak { text, .. } => ("speak", json!({ "text": text })),
        Action::SetFace { expression } => ("set_face", json!({ "fileName": format!("{expression}.png") })),
        Action::MoveHead {
            pitch,
            roll,
            yaw,
            duration,
        } => (
            "move_head",
            json!({ "pitch": pitch, "roll": roll, "yaw": yaw, "duration": duration }),
        ),
        Action::MoveArm {
            side,
            position,
            duration,
        } => (
            "move_arm",
            json!({ "arm": side.as_str(), "position": position, "duration": duration }),
        ),
        Action::SetLed { r, g, b } => ("set_led", json!({ "red": r, "green": g, "blue": b })),
        Action::PlayAudio { clip, .. } => ("play_audio", json!({ "fileName": format!("{clip}.wav") })),
        Action::Wait { .. } => return None,
    };
    Some(Command {
        endpoint: endpoint_for(kind).to_owned(),
        payload,
    })
}

/// Body of a successful health check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceInfo {
    pub name: String,
    pub api_version: String,
}

pub fn success_body() -> Value {
    json!({ "status": "Success" })
}
