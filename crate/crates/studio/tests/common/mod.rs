#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::OnceLock;

use serde_json::{json, Value};
use storybot_core::gateway::Gateway;
use storybot_core::program::{encode, Block, BlockProgram};
use storybot_studio::{serve, Cors, Pacing, RunningService, Store, StudioConfig};

pub const SESSION_SCRIPT: &str = include_str!("../../fixtures/study_buddy_session.json");
pub const HALLUCINATED_STORY: &str = include_str!("../../../core/fixtures/mock/hallucinated_story.txt");
pub const HALLUCINATED_GOALS: &str = include_str!("../../../core/fixtures/mock/hallucinated_goals.json");
const API_SCHEMA: &str = include_str!("../../schemas/api.schema.json");

pub struct Harness {
    pub service: RunningService,
    pub client: reqwest::Client,
    pub dir: tempfile::TempDir,
}

pub fn scripted(script_json: &str) -> Gateway {
    let model = storybot_core::gateway::ScriptedModel::from_json(script_json).unwrap();
    Gateway::new(std::sync::Arc::new(model))
}

pub async fn start_in(dir: &Path, gateway: Gateway) -> RunningService {
    let mut config = StudioConfig::new(Store::open(dir).unwrap(), gateway);
    config.pacing = Pacing::Virtual;
    serve(SocketAddr::from(([127, 0, 0, 1], 0)), config, &Cors::Any)
        .await
        .unwrap()
}

pub async fn start(gateway: Gateway) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let service = start_in(dir.path(), gateway).await;
    Harness {
        service,
        client: reqwest::Client::new(),
        dir,
    }
}

impl Harness {
    pub async fn call(&self, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
        let url = format!("{}{path}", self.service.base_url());
        let req = match method {
            "GET" => self.client.get(url),
            "PUT" => self.client.put(url),
            _ => self.client.post(url),
        };
        let req = match body {
            Some(b) => req.json(&b),
            None => req,
        };
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        let text = resp.text().await.unwrap();
        let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() };
        (status, value)
    }

    pub async fn ok(&self, method: &str, path: &str, body: Option<Value>) -> Value {
        let (status, v) = self.call(method, path, body).await;
        assert!((200..300).contains(&status), "{method} {path} -> {status}: {v}");
        v
    }

    pub async fn new_session(&self) -> String {
        let s = self.ok("POST", "/sessions", None).await;
        s["id"].as_str().unwrap().to_owned()
    }
}

/// Check `value` against a definition in the shipped API schema.
pub fn conforms(def: &str, value: &Value) -> Result<(), String> {
    static DEFS: OnceLock<Value> = OnceLock::new();
    let defs = DEFS.get_or_init(|| serde_json::from_str::<Value>(API_SCHEMA).unwrap()["$defs"].clone());
    let schema = json!({ "$ref": format!("#/$defs/{def}"), "$defs": defs });
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!("{def}: {}", errors.join("; ")))
    }
}

pub fn assert_conforms(def: &str, value: &Value) {
    if let Err(e) = conforms(def, value) {
        panic!("{e}\n{value}");
    }
}

/// A program touching the Light, Face, Movement, Speech, Audio and Control drawers.
pub fn study_buddy_program() -> BlockProgram {
    BlockProgram::new(vec![
        Block::new("move_head")
            .arg("pitch", -15.0)
            .arg("roll", 0.0)
            .arg("yaw", 0.0)
            .arg("duration", 1.0),
        Block::new("set_face").arg("expression", "happy"),
        Block::new("speak").arg("text", "Hi Sam, ready to study?"),
        Block::new("set_led").arg("red", 0.0).arg("green", 255.0).arg("blue", 0.0),
        Block::new("speak").arg("text", "How is your study session going?"),
        Block::new("wait").arg("seconds", 1.0),
        Block::new("play_audio").arg("clip", "chime"),
        Block::new("repeat").arg("count", 2.0).body(vec![
            Block::new("move_arm")
                .arg("side", "right")
                .arg("position", -29.0)
                .arg("duration", 0.5),
            Block::new("move_arm")
                .arg("side", "right")
                .arg("position", 90.0)
                .arg("duration", 0.5),
        ]),
    ])
}

pub fn program_json(p: &BlockProgram) -> Value {
    serde_json::from_slice(&encode(p)).unwrap()
}
