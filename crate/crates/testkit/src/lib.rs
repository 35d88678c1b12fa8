//! Reference oracles for the storybot test suites.
//!
//! Each oracle recomputes a result the library produces, from a different
//! representation or by a different route, so tests can compare the two.
//! Nothing here calls the code path it is checking.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};
use storybot_core::catalog::{Catalog, Slot};
use storybot_core::goals::GoalSet;
use storybot_core::program::{self, Action, ArmSide, BlockProgram};
use storybot_core::simulator::RobotState;

/// Violations as `(path, code)` pairs, sorted.
pub type ViolationSet = Vec<(String, String)>;

/// Rule walker over the program's JSON form.
pub fn oracle_violations(program_json: &Value, catalog: &Catalog) -> ViolationSet {
    let mut out = Vec::new();
    if program_json["version"] != json!(1) {
        out.push(("/version".to_owned(), "unsupported_version".to_owned()));
    }
    let empty = serde_json::Map::new();
    // Explicit worklist of (node, path, expected connection).
    let mut work: Vec<(&Value, String, &str)> = vec![(&program_json["root"], "/root".to_owned(), "root")];
    while let Some((node, path, expected)) = work.pop() {
        let kind_id = node["kind"].as_str().unwrap_or_default();
        let Some(kind) = catalog.kinds().iter().find(|k| k.id == kind_id) else {
            out.push((path, "unknown_kind".into()));
            continue;
        };
        let connects = serde_json::to_value(kind.connects_as).unwrap();
        if connects != json!(expected) {
            out.push((path.clone(), "wrong_connection".into()));
        }
        let args = node.get("args").and_then(Value::as_object).unwrap_or(&empty);
        for param in &kind.params {
            let at = format!("{path}/args/{}", param.name);
            let Some(arg) = args.get(&param.name) else {
                out.push((at, "missing_arg".into()));
                continue;
            };
            let code = match (arg, &param.slot) {
                (Value::Object(_), Slot::Number { .. }) if param.accepts_value_block => {
                    work.push((arg, at, "value"));
                    None
                }
                (Value::Object(_), _) => Some("value_block_not_accepted"),
                (
                    Value::Number(n),
                    Slot::Number {
                        min, max, integer, ..
                    },
                ) => {
                    let v = n.as_f64().unwrap();
                    if v < *min || v > *max {
                        Some("out_of_range")
                    } else if *integer && v != v.trunc() {
                        Some("not_integer")
                    } else {
                        None
                    }
                }
                (Value::String(s), Slot::Text { max_len }) => (s.chars().count() > *max_len).then_some("text_too_long"),
                (Value::String(s), Slot::Enum { options }) => (!options.iter().any(|o| o == s)).then_some("not_an_option"),
                _ => Some("type_mismatch"),
            };
            if let Some(code) = code {
                out.push((format!("{path}/args/{}", param.name), code.into()));
            }
        }
        for name in args.keys() {
            if !kind.params.iter().any(|p| &p.name == name) {
                out.push((format!("{path}/args/{name}"), "unexpected_arg".into()));
            }
        }
        if let Some(children) = node.get("children").and_then(Value::as_object) {
            for (name, seq) in children {
                if !kind.bodies.iter().any(|b| b == name) {
                    out.push((format!("{path}/{name}"), "unknown_body".into()));
                    continue;
                }
                for (i, child) in seq.as_array().unwrap().iter().enumerate() {
                    work.push((child, format!("{path}/{name}/{i}"), "statement"));
                }
            }
        }
    }
    out.sort();
    out
}

/// The library validator's verdict in the same shape.
pub fn library_violations(program: &BlockProgram, catalog: &Catalog) -> ViolationSet {
    let mut v: ViolationSet = program::validate(program, catalog)
        .violations
        .into_iter()
        .map(|v| (v.path, v.kind.code().to_owned()))
        .collect();
    v.sort();
    v
}

fn block_paths(node: &Value, path: Vec<String>, out: &mut Vec<Vec<String>>) {
    out.push(path.clone());
    if let Some(args) = node.get("args").and_then(Value::as_object) {
        for (k, v) in args {
            if v.is_object() {
                let mut p = path.clone();
                p.extend(["args".to_owned(), k.clone()]);
                block_paths(v, p, out);
            }
        }
    }
    if let Some(children) = node.get("children").and_then(Value::as_object) {
        for (k, seq) in children {
            for (i, c) in seq.as_array().unwrap().iter().enumerate() {
                let mut p = path.clone();
                p.extend([k.clone(), i.to_string()]);
                block_paths(c, p, out);
            }
        }
    }
}

fn node_at<'a>(root: &'a mut Value, path: &[String]) -> &'a mut Value {
    let mut cur = root;
    let mut i = 0;
    while i < path.len() {
        cur = if path[i] == "args" {
            &mut cur["args"][&path[i + 1]]
        } else {
            let idx: usize = path[i + 1].parse().unwrap();
            &mut cur["children"][&path[i]][idx]
        };
        i += 2;
    }
    cur
}

/// Break one rule in a valid program, on its JSON form. The result still
/// decodes as a program.
pub fn mutate_invalid<R: Rng + ?Sized>(program_json: &Value, catalog: &Catalog, rng: &mut R) -> Value {
    let mut doc = program_json.clone();
    let mut paths = Vec::new();
    block_paths(&doc["root"], Vec::new(), &mut paths);
    loop {
        let path = paths.choose(rng).unwrap().clone();
        let root = &mut doc["root"];
        let node = node_at(root, &path);
        let kind_id = node["kind"].as_str().unwrap().to_owned();
        let kind = catalog.get(&kind_id).unwrap();
        let params = &kind.params;
        match rng.random_range(0..11) {
            0 => node["kind"] = json!(["set_timer", "hourly_alarm", "dance"].choose(rng).unwrap()),
            1 if !params.is_empty() => {
                let p = params.choose(rng).unwrap();
                node["args"].as_object_mut().unwrap().remove(&p.name);
            }
            2 => {
                node["args"]["volume"] = json!(5);
            }
            3 => {
                if let Some(p) = params.choose(rng) {
                    node["args"][&p.name] = match &p.slot {
                        Slot::Number { max, .. } => json!(max + 1.0 + rng.random_range(0.0..100.0)),
                        Slot::Text { max_len } => json!("x".repeat(max_len + 1)),
                        Slot::Enum { .. } => json!("confused"),
                    };
                }
            }
            4 => {
                if let Some(p) = params.iter().find(|p| matches!(p.slot, Slot::Number { integer: true, .. })) {
                    node["args"][&p.name] = json!(1.5);
                } else {
                    continue;
                }
            }
            5 => {
                // Type swap.
                if let Some(p) = params.choose(rng) {
                    node["args"][&p.name] = match p.slot {
                        Slot::Number { .. } => json!("ten"),
                        _ => json!(3),
                    };
                }
            }
            6 => {
                // Plug a statement block into a number slot, or any block
                // into a literal-only slot.
                if let Some(p) = params.choose(rng) {
                    node["args"][&p.name] = json!({"kind": "speak", "args": {"text": "hi"}});
                }
            }
            7 => {
                let seq = json!([{"kind": "number", "args": {"value": 4}}]);
                node["children"]["body"] = seq;
            }
            8 => node["children"]["else"] = json!([]),
            9 => {
                let bad = json!({"kind": "start", "children": {"body": []}});
                node["children"]["body"] = json!([bad]);
            }
            _ => doc["version"] = json!(2),
        }
        if doc != *program_json {
            return doc;
        }
    }
}

/// Words in `text`, counted by whitespace-to-glyph transitions.
pub fn word_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            count += 1;
        }
    }
    count
}

pub fn speech_oracle(text: &str, rate: f64) -> f64 {
    f64::max(1.0, word_count(text) as f64 / rate)
}

/// Total duration computed from the tree without unrolling: a repeat costs
/// `count` times its body. Returns `None` for programs whose timing depends
/// on plugged value blocks.
pub fn closed_form_total(program_json: &Value, rate: f64) -> Option<f64> {
    fn seq(blocks: &Value, rate: f64) -> Option<f64> {
        let mut total = 0.0;
        for b in blocks.as_array().map(Vec::as_slice).unwrap_or(&[]) {
            total += block(b, rate)?;
        }
        Some(total)
    }
    fn num(b: &Value, name: &str) -> Option<f64> {
        b["args"][name].as_f64()
    }
    fn block(b: &Value, rate: f64) -> Option<f64> {
        Some(match b["kind"].as_str()? {
            "repeat" => num(b, "count")? * seq(&b["children"]["body"], rate)?,
            "wait" => num(b, "seconds")?,
            "move_head" | "move_arm" => num(b, "duration")?,
            "set_led" | "set_face" => 0.1,
            "speak" => speech_oracle(b["args"]["text"].as_str()?, rate),
            "play_audio" => match b["args"]["clip"].as_str()? {
                "chime" => 1.5,
                "fanfare" => 3.0,
                _ => 0.5,
            },
            _ => return None,
        })
    }
    seq(&program_json["root"]["children"]["body"], rate)
}

/// Number of primitive actions a program unrolls to, from the tree.
pub fn closed_form_count(program_json: &Value) -> Option<u64> {
    fn seq(blocks: &Value) -> Option<u64> {
        let mut n = 0;
        for b in blocks.as_array().map(Vec::as_slice).unwrap_or(&[]) {
            n += match b["kind"].as_str()? {
                "repeat" => b["args"]["count"].as_f64()? as u64 * seq(&b["children"]["body"])?,
                _ => 1,
            };
        }
        Some(n)
    }
    seq(&program_json["root"]["children"]["body"])
}

/// Final robot state by direct assignment of each action's end effect,
/// without sampling or interpolation.
pub fn unsampled_final(actions: &[Action]) -> RobotState {
    let mut head = [0.0_f64; 3];
    let mut arms = [90.0_f64; 2];
    let mut led = [0_u8; 3];
    let mut face = "default".to_owned();
    let mut clock = 0.0;
    for a in actions {
        match a {
            Action::MoveHead { pitch, roll, yaw, .. } => head = [*pitch, *roll, *yaw],
            Action::MoveArm { side, position, .. } => arms[(*side == ArmSide::Right) as usize] = *position,
            Action::SetLed { r, g, b } => led = [*r, *g, *b],
            Action::SetFace { expression } => face = expression.clone(),
            _ => {}
        }
        clock += a.duration();
    }
    serde_json::from_value(json!({
        "head": {"pitch": head[0], "roll": head[1], "yaw": head[2]},
        "arms": {"left": arms[0], "right": arms[1]},
        "led": {"r": led[0], "g": led[1], "b": led[2]},
        "face": face,
        "speaking": null,
        "audio": null,
        "clock": clock,
    }))
    .unwrap()
}

/// The robot request an action should produce, per the wire protocol table.
/// Waits produce none.
pub fn expected_command(action: &Action) -> Option<(String, Value)> {
    let (path, body) = match action {
        Action::Speak { text, .. } => ("/api/tts/speak", json!({ "text": text })),
        Action::SetFace { expression } => ("/api/images/display", json!({ "fileName": format!("{expression}.png") })),
        Action::MoveHead {
            pitch,
            roll,
            yaw,
            duration,
        } => (
            "/api/head",
            json!({ "pitch": pitch, "roll": roll, "yaw": yaw, "duration": duration }),
        ),
        Action::MoveArm {
            side,
            position,
            duration,
        } => (
            "/api/arms",
            json!({ "arm": side.as_str(), "position": position, "duration": duration }),
        ),
        Action::SetLed { r, g, b } => ("/api/led", json!({ "red": r, "green": g, "blue": b })),
        Action::PlayAudio { clip, .. } => ("/api/audio/play", json!({ "fileName": format!("{clip}.wav") })),
        Action::Wait { .. } => return None,
    };
    Some((path.to_owned(), body))
}

/// Every unresolvable block reference in a goal set, by exhaustive scan of
/// the catalog. Keys are goal indices.
pub fn brute_force_unknown_refs(goals: &GoalSet, catalog: &Catalog) -> BTreeMap<usize, Vec<String>> {
    let mut out = BTreeMap::new();
    for (gi, goal) in goals.goals.iter().enumerate() {
        let mut refs: Vec<String> = Vec::new();
        for r in goal.hints.iter().flat_map(|h| h.block_refs.iter()) {
            let mut kind = None;
            for k in catalog.kinds() {
                if k.id == r.kind_id {
                    kind = Some(k);
                }
            }
            let Some(kind) = kind else {
                refs.push(r.kind_id.clone());
                continue;
            };
            for (name, value) in r.param_overrides.clone().unwrap_or_default() {
                let mut spec = None;
                for p in &kind.params {
                    if p.name == name {
                        spec = Some(p);
                    }
                }
                let Some(spec) = spec else {
                    refs.push(format!("{}.{}", r.kind_id, name));
                    continue;
                };
                let ok = match (&spec.slot, &value) {
                    (Slot::Number { min, max, integer, .. }, Value::Number(n)) => {
                        let v = n.as_f64().unwrap();
                        v >= *min && v <= *max && (!*integer || v == v.floor())
                    }
                    (Slot::Text { max_len }, Value::String(s)) => s.chars().count() <= *max_len,
                    (Slot::Enum { options }, Value::String(s)) => options.contains(s),
                    _ => false,
                };
                if !ok {
                    let shown = value.as_str().map(str::to_owned).unwrap_or_else(|| value.to_string());
                    refs.push(format!("{}.{}={}", r.kind_id, name, shown));
                }
            }
        }
        refs.sort();
        refs.dedup();
        if !refs.is_empty() {
            out.insert(gi, refs);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_by_hand() {
        assert_eq!(word_count("Hello how are you today"), 5);
        assert_eq!(word_count("  spaced\tout \n words "), 3);
        assert_eq!(word_count(""), 0);
        assert_eq!(speech_oracle("Hello how are you today", 2.5), 2.0);
    }
}
