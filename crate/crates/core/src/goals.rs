//! Turning a story into programming goals with hints, and checking every
//! block a hint mentions against the robot's real capabilities.
//!
//! Goals whose hints name blocks, parameters or options the robot does not
//! have are kept and marked [`Verdict::Flagged`] with the offending
//! references, so the UI can warn instead of silently hiding them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{CapabilityManifest, Catalog, Slot};
use crate::gateway::{
    Author, ChatTurn, Gateway, GatewayError, OneShotExample, PromptBundle, SchemaError, SchemaId, StructuredError,
};
use crate::narrative::Narrative;
use crate::{prompts, Grounding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRef {
    pub category: String,
    pub kind_id: String,
    #[serde(default)]
    pub param_overrides: Option<BTreeMap<String, serde_json::Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub after_goal_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hint {
    pub text: String,
    pub block_refs: Vec<BlockRef>,
    #[serde(default)]
    pub placement: Option<Placement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    Unchecked,
    Valid,
    Flagged { unknown_refs: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramGoal {
    pub snippet: String,
    pub goal: String,
    pub hints: Vec<Hint>,
    #[serde(default)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    pub goals: Vec<ProgramGoal>,
    /// Index into `Narrative::revisions` of the story the goals came from.
    pub source_revision: usize,
    /// 1 for the first generation, +1 on every retry.
    pub generation: u32,
}

impl GoalSet {
    pub fn flagged(&self) -> impl Iterator<Item = (usize, &ProgramGoal)> {
        self.goals
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g.verdict, Verdict::Flagged { .. }))
    }
}

/// The document the model is asked to produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GoalSetDoc {
    goals: Vec<GoalDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GoalDoc {
    snippet: String,
    goal: String,
    hints: Vec<Hint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GoalError {
    #[error("the story is empty; write or summarize it before generating goals")]
    EmptyNarrative,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl From<StructuredError> for GoalError {
    fn from(e: StructuredError) -> Self {
        match e {
            StructuredError::Gateway(g) => g.into(),
            StructuredError::Schema(s) => s.into(),
        }
    }
}

fn render_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn override_fits(slot: &Slot, value: &serde_json::Value) -> bool {
    match (slot, value) {
        (
            Slot::Number {
                min, max, integer, ..
            },
            serde_json::Value::Number(n),
        ) => n
            .as_f64()
            .is_some_and(|v| v.is_finite() && *min <= v && v <= *max && (!integer || v.fract() == 0.0)),
        (Slot::Text { max_len }, serde_json::Value::String(s)) => s.chars().count() <= *max_len,
        (Slot::Enum { options }, serde_json::Value::String(s)) => options.contains(s),
        _ => false,
    }
}

/// References in one block ref that do not resolve, in order.
fn unresolved(r: &BlockRef, catalog: &Catalog, manifest: &CapabilityManifest, out: &mut Vec<String>) {
    let offered = manifest
        .capabilities
        .iter()
        .any(|c| c.block_ids.contains(&r.kind_id));
    let Some(kind) = catalog.get(&r.kind_id).filter(|_| offered) else {
        out.push(r.kind_id.clone());
        return;
    };
    for (name, value) in r.param_overrides.iter().flatten() {
        match kind.param(name) {
            None => out.push(format!("{}.{name}", r.kind_id)),
            Some(p) if !override_fits(&p.slot, value) => {
                out.push(format!("{}.{name}={}", r.kind_id, render_value(value)))
            }
            Some(_) => {}
        }
    }
}

/// Resolve every block reference in the goal's hints and set its verdict.
///
/// Unknown kinds are reported by id (`hourly_alarm`), unknown parameters as
/// `kind.param`, and bad values as `kind.param=value`. Duplicates are
/// reported once.
pub fn validate_goal(goal: &ProgramGoal, catalog: &Catalog, manifest: &CapabilityManifest) -> ProgramGoal {
    let mut refs = Vec::new();
    for r in goal.hints.iter().flat_map(|h| &h.block_refs) {
        unresolved(r, catalog, manifest, &mut refs);
    }
    let mut unknown_refs: Vec<String> = Vec::with_capacity(refs.len());
    for r in refs {
        if !unknown_refs.contains(&r) {
            unknown_refs.push(r);
        }
    }
    let verdict = if unknown_refs.is_empty() {
        Verdict::Valid
    } else {
        Verdict::Flagged { unknown_refs }
    };
    ProgramGoal {
        verdict,
        ..goal.clone()
    }
}

#[derive(Deserialize)]
struct ExampleFixture {
    narrative: String,
    goals: serde_json::Value,
}

/// The worked narrative-to-goals example included in every goal prompt.
pub fn one_shot_example() -> OneShotExample {
    let fixture: ExampleFixture =
        serde_json::from_str(include_str!("../fixtures/one_shot_example.json")).expect("fixture is valid JSON");
    OneShotExample {
        input: format!("{}{}", prompts::GOALS_REQUEST_PREFIX, fixture.narrative),
        output: serde_json::to_string_pretty(&fixture.goals).expect("fixture serializes"),
    }
}

/// The prompt for goal generation over the current story.
pub fn goal_prompt(narrative: &Narrative, grounding: &Grounding) -> PromptBundle {
    PromptBundle {
        system: format!("{}\n\n{}", prompts::GOALS_SYSTEM, grounding.capability_text),
        one_shot_example: Some(one_shot_example()),
        history: vec![ChatTurn {
            author: Author::User,
            text: format!("{}{}", prompts::GOALS_REQUEST_PREFIX, narrative.story_text),
            timestamp: narrative
                .transcript
                .last()
                .map(|t| t.timestamp)
                .unwrap_or_default(),
        }],
        response_schema: Some(SchemaId::GoalSet),
    }
}

fn check_doc(doc: &GoalSetDoc, narrative: &Narrative) -> Result<(), String> {
    for (i, goal) in doc.goals.iter().enumerate() {
        let snippet = goal.snippet.trim();
        let quoted = snippet.is_empty()
            || narrative.story_text.contains(snippet)
            || narrative.revisions.iter().any(|r| r.contains(snippet));
        if !quoted {
            return Err(format!(
                "goal {i}: snippet is not an exact quote from the story; copy it verbatim or leave it empty"
            ));
        }
        for hint in &goal.hints {
            if let Some(p) = hint.placement {
                if p.after_goal_index >= doc.goals.len() {
                    return Err(format!(
                        "goal {i}: placement.after_goal_index {} does not name a goal",
                        p.after_goal_index
                    ));
                }
            }
        }
    }
    Ok(())
}

async fn generate(
    narrative: &Narrative,
    gateway: &Gateway,
    grounding: &Grounding,
    generation: u32,
) -> Result<GoalSet, GoalError> {
    if narrative.story_text.trim().is_empty() {
        return Err(GoalError::EmptyNarrative);
    }
    let bundle = goal_prompt(narrative, grounding);
    let doc = gateway
        .complete_structured::<GoalSetDoc, _>(&bundle, |doc| check_doc(doc, narrative))
        .await?;
    let goals = doc
        .value
        .goals
        .into_iter()
        .map(|g| {
            let goal = ProgramGoal {
                snippet: g.snippet.trim().to_owned(),
                goal: g.goal,
                hints: g.hints,
                verdict: Verdict::Unchecked,
            };
            validate_goal(&goal, &grounding.catalog, &grounding.manifest)
        })
        .collect();
    Ok(GoalSet {
        goals,
        source_revision: narrative.revisions.len().saturating_sub(1),
        generation,
    })
}

/// One-shot goal generation from the current story.
pub async fn generate_goals(
    narrative: &Narrative,
    gateway: &Gateway,
    grounding: &Grounding,
) -> Result<GoalSet, GoalError> {
    generate(narrative, gateway, grounding, 1).await
}

/// Generate afresh, counting one more generation than `prior`.
pub async fn retry_goals(
    prior: &GoalSet,
    narrative: &Narrative,
    gateway: &Gateway,
    grounding: &Grounding,
) -> Result<GoalSet, GoalError> {
    generate(narrative, gateway, grounding, prior.generation + 1).await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal_with(refs: Vec<BlockRef>) -> ProgramGoal {
        ProgramGoal {
            snippet: String::new(),
            goal: "g".into(),
            hints: vec![Hint {
                text: "h".into(),
                block_refs: refs,
                placement: None,
            }],
            verdict: Verdict::Unchecked,
        }
    }

    fn r(kind: &str, overrides: serde_json::Value) -> BlockRef {
        BlockRef {
            category: "Speech".into(),
            kind_id: kind.into(),
            param_overrides: serde_json::from_value(overrides).unwrap(),
        }
    }

    fn verdict(refs: Vec<BlockRef>) -> Verdict {
        let g = Grounding::builtin();
        validate_goal(&goal_with(refs), &g.catalog, &g.manifest).verdict
    }

    fn flagged(refs: &[&str]) -> Verdict {
        Verdict::Flagged {
            unknown_refs: refs.iter().map(|s| (*s).to_owned()).collect(),
        }
    }

    #[test]
    fn known_kind_is_valid() {
        assert_eq!(verdict(vec![r("speak", serde_json::Value::Null)]), Verdict::Valid);
        assert_eq!(verdict(vec![]), Verdict::Valid);
    }

    #[test]
    fn unknown_kind_is_flagged() {
        assert_eq!(verdict(vec![r("hourly_alarm", serde_json::Value::Null)]), flagged(&["hourly_alarm"]));
    }

    #[test]
    fn bad_option_is_flagged() {
        assert_eq!(
            verdict(vec![r("set_face", serde_json::json!({"expression": "confused"}))]),
            flagged(&["set_face.expression=confused"])
        );
        assert_eq!(
            verdict(vec![r("set_face", serde_json::json!({"expression": "rage_eyes"}))]),
            Verdict::Valid
        );
    }

    #[test]
    fn params_are_range_checked() {
        assert_eq!(
            verdict(vec![r(
                "set_led",
                serde_json::json!({"red": 300, "green": 1.5, "blue": 0, "alpha": 1})
            )]),
            flagged(&["set_led.alpha", "set_led.green=1.5", "set_led.red=300"])
        );
        assert_eq!(
            verdict(vec![r("wait", serde_json::json!({"seconds": "two"}))]),
            flagged(&["wait.seconds=two"])
        );
    }

    #[test]
    fn duplicates_reported_once() {
        assert_eq!(
            verdict(vec![
                r("set_timer", serde_json::Value::Null),
                r("set_timer", serde_json::Value::Null)
            ]),
            flagged(&["set_timer"])
        );
    }

    #[test]
    fn one_shot_fixture_is_schema_valid_and_grounded() {
        let g = Grounding::builtin();
        let ex = one_shot_example();
        let doc: serde_json::Value = serde_json::from_str(&ex.output).unwrap();
        SchemaId::GoalSet.check(&doc).unwrap();
        let parsed: GoalSetDoc = serde_json::from_value(doc).unwrap();
        let story = ex.input.strip_prefix(prompts::GOALS_REQUEST_PREFIX).unwrap();
        let n = Narrative::new().edit_story(story);
        check_doc(&parsed, &n).unwrap();
        for goal in parsed.goals {
            let goal = ProgramGoal {
                snippet: goal.snippet,
                goal: goal.goal,
                hints: goal.hints,
                verdict: Verdict::Unchecked,
            };
            assert_eq!(validate_goal(&goal, &g.catalog, &g.manifest).verdict, Verdict::Valid);
        }
    }

    fn story() -> Narrative {
        Narrative::new().edit_story("Misty says hello to Sam. Then Misty asks how studying is going.")
    }

    fn doc(snippet: &str, hints: serde_json::Value) -> String {
        serde_json::json!({"goals": [{"snippet": snippet, "goal": "Have Misty greet Sam", "hints": hints}]}).to_string()
    }

    #[tokio::test]
    async fn generation_validates_and_numbers() {
        let g = Grounding::builtin();
        let reply = doc(
            "Misty says hello to Sam.",
            serde_json::json!([{"text": "Use speak", "block_refs": [{"category": "Speech", "kind_id": "speak"}]}]),
        );
        let gw = Gateway::scripted([reply.clone(), reply]);
        let set = generate_goals(&story(), &gw, &g).await.unwrap();
        assert_eq!(set.generation, 1);
        assert_eq!(set.source_revision, 0);
        assert_eq!(set.goals[0].verdict, Verdict::Valid);
        let again = retry_goals(&set, &story(), &gw, &g).await.unwrap();
        assert_eq!(again.generation, 2);
        assert_eq!(again.goals, set.goals);

        let prompt = gw.capture().last().unwrap();
        assert!(prompt.contains(&serde_json::to_string(&g.capability_text).unwrap()[1..40]));
        assert!(prompt.contains("science museum"));
    }

    #[tokio::test]
    async fn empty_story_is_refused() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(["unused"]);
        assert_eq!(
            generate_goals(&Narrative::new(), &gw, &g).await.unwrap_err(),
            GoalError::EmptyNarrative
        );
    }

    #[tokio::test]
    async fn zero_hints_fails_schema() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted([doc("", serde_json::json!([]))]).with_retry_budget(0);
        let err = generate_goals(&story(), &gw, &g).await.unwrap_err();
        assert!(matches!(err, GoalError::Schema(SchemaError { attempts: 1, .. })), "{err:?}");
    }

    #[tokio::test]
    async fn invented_snippet_is_retried() {
        let g = Grounding::builtin();
        let hints = serde_json::json!([{"text": "t", "block_refs": []}]);
        let gw = Gateway::scripted([doc("Misty dances.", hints.clone()), doc("Misty says hello", hints)]);
        let set = generate_goals(&story(), &gw, &g).await.unwrap();
        assert_eq!(set.goals[0].snippet, "Misty says hello");
        assert!(gw.capture().last().unwrap().contains("snippet is not an exact quote"));
    }

    #[tokio::test]
    async fn placement_must_name_a_goal() {
        let g = Grounding::builtin();
        let bad = doc(
            "",
            serde_json::json!([{"text": "t", "block_refs": [], "placement": {"after_goal_index": 3}}]),
        );
        let gw = Gateway::scripted([bad]).with_retry_budget(0);
        assert!(matches!(
            generate_goals(&story(), &gw, &g).await.unwrap_err(),
            GoalError::Schema(_)
        ));
    }
}
