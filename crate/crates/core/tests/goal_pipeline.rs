use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use storybot_core::catalog::{Connection, Slot};
use storybot_core::gateway::Gateway;
use storybot_core::goals::{generate_goals, retry_goals, validate_goal, BlockRef, GoalError, GoalSet, Hint, ProgramGoal, Verdict};
use storybot_core::narrative::Narrative;
use storybot_core::Grounding;
use storybot_testkit as oracle;

const STUDY_STORY: &str = include_str!("../fixtures/mock/study_buddy_story.txt");
const STUDY_GOALS: &str = include_str!("../fixtures/mock/study_buddy_goals.json");
const HALLUCINATED_STORY: &str = include_str!("../fixtures/mock/hallucinated_story.txt");
const HALLUCINATED_GOALS: &str = include_str!("../fixtures/mock/hallucinated_goals.json");

fn story(text: &str) -> Narrative {
    Narrative::new().edit_story(text)
}

#[tokio::test]
async fn study_buddy_goals_are_grounded_and_valid() {
    let grounding = Grounding::builtin();
    let gateway = Gateway::scripted([STUDY_GOALS]);
    let set = generate_goals(&story(STUDY_STORY), &gateway, &grounding).await.unwrap();

    assert_eq!(set.generation, 1);
    assert_eq!(set.source_revision, 0);
    let names: Vec<&str> = set.goals.iter().map(|g| g.goal.as_str()).collect();
    assert!(names.contains(&"Have Misty greet the user"));
    assert!(names.contains(&"Have Misty ask about the study session"));
    for g in &set.goals {
        assert_eq!(g.verdict, Verdict::Valid, "{}", g.goal);
        assert!(!g.hints.is_empty());
        assert!(STUDY_STORY.contains(&g.snippet));
    }
    assert_eq!(set.flagged().count(), 0);

    let prompt = gateway.capture().last().unwrap();
    assert!(prompt.contains("ROBOT CAPABILITIES"));
    assert!(prompt.contains("When Sam sits down"));
}

#[tokio::test]
async fn retry_counts_generations() {
    let grounding = Grounding::builtin();
    let gateway = Gateway::scripted([STUDY_GOALS, STUDY_GOALS]);
    let n = story(STUDY_STORY);
    let first = generate_goals(&n, &gateway, &grounding).await.unwrap();
    let second = retry_goals(&first, &n, &gateway, &grounding).await.unwrap();
    assert_eq!(second.generation, 2);
    assert_eq!(second.goals, first.goals);
}

#[tokio::test]
async fn hallucinated_blocks_are_flagged_not_dropped() {
    let grounding = Grounding::builtin();
    let gateway = Gateway::scripted([HALLUCINATED_GOALS]);
    let set = generate_goals(&story(HALLUCINATED_STORY), &gateway, &grounding).await.unwrap();

    assert_eq!(set.goals.len(), 2);
    assert_eq!(set.flagged().count(), 2);
    assert_eq!(
        set.goals[0].verdict,
        Verdict::Flagged { unknown_refs: vec!["hourly_alarm".into()] }
    );
    assert_eq!(
        set.goals[1].verdict,
        Verdict::Flagged { unknown_refs: vec!["set_timer".into(), "set_face.expression=confused".into()] }
    );
    let expected = oracle::brute_force_unknown_refs(&set, &grounding.catalog);
    assert_eq!(flagged_refs(&set), expected);
}

#[tokio::test]
async fn empty_story_is_rejected_before_any_call() {
    let gateway = Gateway::scripted(Vec::<String>::new());
    let err = generate_goals(&Narrative::new(), &gateway, &Grounding::builtin()).await.unwrap_err();
    assert_eq!(err, GoalError::EmptyNarrative);
    assert!(gateway.capture().prompts().is_empty());
}

#[tokio::test]
async fn invented_snippet_is_retried() {
    let mut bad: Value = serde_json::from_str(STUDY_GOALS).unwrap();
    bad["goals"][0]["snippet"] = json!("Misty juggles three balls.");
    let gateway = Gateway::scripted([bad.to_string(), STUDY_GOALS.to_owned()]);
    let set = generate_goals(&story(STUDY_STORY), &gateway, &Grounding::builtin()).await.unwrap();
    assert_eq!(set.goals.len(), 4);
    let prompts = gateway.capture().prompts();
    assert_eq!(prompts.len(), 2);
    assert!(prompts[1].contains("not an exact quote"));
}

#[tokio::test]
async fn schema_guardrail_respects_retry_budget() {
    let grounding = Grounding::builtin();
    let n = story(STUDY_STORY);
    for k in 0..=4u32 {
        let mut replies: Vec<String> = (0..k).map(|i| format!("{{\"goals\": {i}}}")).collect();
        replies.push(STUDY_GOALS.to_owned());
        let gateway = Gateway::scripted(replies).with_retry_budget(3);
        let result = generate_goals(&n, &gateway, &grounding).await;
        if k <= 3 {
            assert!(result.is_ok(), "k={k}: {result:?}");
        } else {
            match result {
                Err(GoalError::Schema(e)) => assert_eq!(e.attempts, 4),
                other => panic!("k={k}: {other:?}"),
            }
        }
        assert_eq!(gateway.capture().prompts().len() as u32, (k + 1).min(4));
    }
}

fn flagged_refs(set: &GoalSet) -> BTreeMap<usize, Vec<String>> {
    set.goals
        .iter()
        .enumerate()
        .filter_map(|(i, g)| match &g.verdict {
            Verdict::Flagged { unknown_refs } => {
                let mut r = unknown_refs.clone();
                r.sort();
                Some((i, r))
            }
            _ => None,
        })
        .collect()
}

const BOGUS_KINDS: &[&str] = &["hourly_alarm", "set_timer", "dance", "take_photo", "drive_forward"];
const BOGUS_PARAMS: &[&str] = &["volume", "speed", "minutes"];

fn random_value<R: Rng>(slot: Option<&Slot>, rng: &mut R) -> Value {
    match (slot, rng.random_range(0..4)) {
        (Some(Slot::Number { min, max, .. }), 0 | 1) => json!(rng.random_range(*min..=*max).round()),
        (Some(Slot::Number { min, max, .. }), 2) => json!(max + 1.0 + (max - min) * rng.random::<f64>()),
        (Some(Slot::Enum { options }), 0 | 1) => json!(options.choose(rng).unwrap()),
        (Some(Slot::Text { .. }), 0 | 1) => json!("hello there"),
        (Some(Slot::Text { max_len }), 2) => json!("x".repeat(max_len + 1)),
        (_, 3) => json!(rng.random_range(-5.0..5.0)),
        _ => json!("confused"),
    }
}

fn random_goal_set(seed: u64) -> GoalSet {
    let grounding = Grounding::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds: Vec<_> = grounding
        .catalog
        .kinds()
        .iter()
        .filter(|k| k.connects_as != Connection::Root)
        .collect();
    let goals = (0..rng.random_range(1..5))
        .map(|_| ProgramGoal {
            snippet: String::new(),
            goal: "g".into(),
            hints: (0..rng.random_range(1..3))
                .map(|_| Hint {
                    text: "h".into(),
                    block_refs: (0..rng.random_range(0..4))
                        .map(|_| {
                            if rng.random_bool(0.2) {
                                return BlockRef {
                                    category: "Control".into(),
                                    kind_id: (*BOGUS_KINDS.choose(&mut rng).unwrap()).into(),
                                    param_overrides: None,
                                };
                            }
                            let kind = *kinds.choose(&mut rng).unwrap();
                            let mut overrides = BTreeMap::new();
                            for p in &kind.params {
                                if rng.random_bool(0.5) {
                                    overrides.insert(p.name.clone(), random_value(Some(&p.slot), &mut rng));
                                }
                            }
                            if rng.random_bool(0.15) {
                                let name = *BOGUS_PARAMS.choose(&mut rng).unwrap();
                                overrides.insert(name.into(), random_value(None, &mut rng));
                            }
                            BlockRef {
                                category: kind.category.as_str().into(),
                                kind_id: kind.id.clone(),
                                param_overrides: (!overrides.is_empty()).then_some(overrides),
                            }
                        })
                        .collect(),
                    placement: None,
                })
                .collect(),
            verdict: Verdict::Unchecked,
        })
        .collect();
    GoalSet { goals, source_revision: 0, generation: 1 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn flags_match_brute_force_scan(seed in any::<u64>()) {
        let grounding = Grounding::builtin();
        let mut set = random_goal_set(seed);
        for g in &mut set.goals {
            *g = validate_goal(g, &grounding.catalog, &grounding.manifest);
            prop_assert_ne!(&g.verdict, &Verdict::Unchecked);
        }
        prop_assert_eq!(flagged_refs(&set), oracle::brute_force_unknown_refs(&set, &grounding.catalog));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arbitrary_replies_never_escape_the_schema(reply in prop_oneof![
        any::<String>(),
        "\\{\"goals\": \\[\\{\"snippet\": \"[a-z ]{0,10}\", \"goal\": \"[a-z]{0,5}\", \"hints\": \\[\\]\\}\\]\\}",
        Just("{\"goals\": []}".to_owned()),
    ]) {
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let gateway = Gateway::scripted([reply]).with_retry_budget(0);
        let result = rt.block_on(generate_goals(&story(STUDY_STORY), &gateway, &Grounding::builtin()));
        match result {
            Ok(set) => prop_assert!(set.goals.iter().all(|g| !g.hints.is_empty())),
            Err(GoalError::Schema(e)) => prop_assert_eq!(e.attempts, 1),
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }
}
