//! Story co-creation state: story text and its revisions, the chat
//! transcript, and the seven milestone flags.
//!
//! Operations are functional: each returns an updated [`Narrative`] and
//! leaves the input untouched, so a failed model call never changes state.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::gateway::{
    Author, ChatTurn, Gateway, GatewayError, PromptBundle, SchemaError, SchemaId, StructuredError,
};
use crate::{prompts, Grounding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilestoneKind {
    Characters,
    Locations,
    Time,
    Actions,
    Events,
    Ending,
    Emotions,
}

impl MilestoneKind {
    pub const ALL: [MilestoneKind; 7] = [
        MilestoneKind::Characters,
        MilestoneKind::Locations,
        MilestoneKind::Time,
        MilestoneKind::Actions,
        MilestoneKind::Events,
        MilestoneKind::Ending,
        MilestoneKind::Emotions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MilestoneKind::Characters => "characters",
            MilestoneKind::Locations => "locations",
            MilestoneKind::Time => "time",
            MilestoneKind::Actions => "actions",
            MilestoneKind::Events => "events",
            MilestoneKind::Ending => "ending",
            MilestoneKind::Emotions => "emotions",
        }
    }

    fn question(self) -> &'static str {
        match self {
            MilestoneKind::Characters => "Who is in the story besides the robot?",
            MilestoneKind::Locations => "Where does the story take place?",
            MilestoneKind::Time => "When does it happen, and how long does it last?",
            MilestoneKind::Actions => "What does the robot do (speech, movement, lights, sounds)?",
            MilestoneKind::Events => "What happens, in what order?",
            MilestoneKind::Ending => "How does the story end?",
            MilestoneKind::Emotions => "How does the robot show how it feels?",
        }
    }
}

impl fmt::Display for MilestoneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MilestoneKind {
    type Err = NarrativeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| NarrativeError::UnknownMilestone(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub kind: MilestoneKind,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpSuggestions {
    pub milestone_kind: MilestoneKind,
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NarrativeError {
    #[error("message is empty")]
    EmptyMessage,
    #[error("nothing to summarize: the transcript is empty")]
    EmptyTranscript,
    #[error("unknown milestone `{0}`")]
    UnknownMilestone(String),
    #[error("the model returned an empty story")]
    EmptySummary,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl From<StructuredError> for NarrativeError {
    fn from(e: StructuredError) -> Self {
        match e {
            StructuredError::Gateway(g) => g.into(),
            StructuredError::Schema(s) => s.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub story_text: String,
    /// Every story text ever set, oldest first; the last entry is current.
    pub revisions: Vec<String>,
    pub milestones: Vec<Milestone>,
    pub transcript: Vec<ChatTurn>,
}

impl Default for Narrative {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Deserialize)]
struct HelpDoc {
    suggestions: Vec<String>,
}

impl Narrative {
    pub fn new() -> Self {
        Self {
            story_text: String::new(),
            revisions: Vec::new(),
            milestones: MilestoneKind::ALL
                .into_iter()
                .map(|kind| Milestone {
                    kind,
                    complete: false,
                })
                .collect(),
            transcript: Vec::new(),
        }
    }

    pub fn is_complete(&self, kind: MilestoneKind) -> bool {
        self.milestones.iter().any(|m| m.kind == kind && m.complete)
    }

    pub fn all_complete(&self) -> bool {
        self.milestones.iter().all(|m| m.complete)
    }

    /// Index of the current story revision, if any.
    pub fn current_revision(&self) -> Option<usize> {
        self.revisions.len().checked_sub(1)
    }

    pub fn set_milestone(&self, kind: MilestoneKind, complete: bool) -> Narrative {
        let mut next = self.clone();
        for m in next.milestones.iter_mut().filter(|m| m.kind == kind) {
            m.complete = complete;
        }
        next
    }

    /// Replace the story text with a user edit, recording a new revision.
    pub fn edit_story(&self, text: &str) -> Narrative {
        let mut next = self.clone();
        next.story_text = text.to_owned();
        next.revisions.push(text.to_owned());
        next
    }

    /// Milestone progress as shown to the model.
    pub fn milestone_map(&self) -> String {
        let mut out = String::from("Milestone progress:\n");
        for m in &self.milestones {
            let state = if m.complete { "complete" } else { "not yet" };
            let _ = writeln!(out, "- {}: {state}", m.kind);
        }
        out
    }

    fn context(&self, system: &str, grounding: &Grounding) -> String {
        let story = if self.story_text.is_empty() {
            "(no story written yet)"
        } else {
            &self.story_text
        };
        format!(
            "{system}\n\n{}\n{}\nCurrent story:\n{story}\n",
            grounding.capability_text,
            self.milestone_map()
        )
    }

    fn stamp(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        match self.transcript.last() {
            Some(last) if last.timestamp > now => last.timestamp,
            _ => now,
        }
    }

    /// Send a user message; returns the agent's reply and the narrative with
    /// both turns appended.
    pub async fn chat(
        &self,
        message: &str,
        gateway: &Gateway,
        grounding: &Grounding,
        now: DateTime<Utc>,
    ) -> Result<(String, Narrative), NarrativeError> {
        if message.trim().is_empty() {
            return Err(NarrativeError::EmptyMessage);
        }
        let now = self.stamp(now);
        let user = ChatTurn {
            author: Author::User,
            text: message.to_owned(),
            timestamp: now,
        };
        let mut bundle = PromptBundle::new(self.context(prompts::NARRATIVE_SYSTEM, grounding));
        bundle.history = self.transcript.clone();
        bundle.history.push(user.clone());
        let reply = gateway.complete(&bundle).await?;

        let mut next = self.clone();
        next.transcript.push(user);
        next.transcript.push(ChatTurn {
            author: Author::Agent,
            text: reply.clone(),
            timestamp: now,
        });
        Ok((reply, next))
    }

    /// Ask for 2 to 4 ideas for one milestone. Nothing is recorded; the user
    /// decides what, if anything, to use.
    pub async fn request_help(
        &self,
        kind: MilestoneKind,
        gateway: &Gateway,
        grounding: &Grounding,
    ) -> Result<HelpSuggestions, NarrativeError> {
        let mut system = self.context(prompts::HELP_SYSTEM, grounding);
        let _ = write!(system, "\nMilestone needing help: {kind} ({})\n", kind.question());
        let mut bundle = PromptBundle::new(system);
        bundle.history = self.transcript.clone();
        bundle.history.push(ChatTurn {
            author: Author::User,
            text: format!("Help me with the {kind} of my story."),
            timestamp: self.stamp(Utc::now()),
        });
        bundle.response_schema = Some(SchemaId::HelpSuggestions);
        let doc = gateway
            .complete_structured::<HelpDoc, _>(&bundle, |_| Ok(()))
            .await?;
        Ok(HelpSuggestions {
            milestone_kind: kind,
            suggestions: doc.value.suggestions,
        })
    }

    /// Have the agent write the story out from the transcript. The result
    /// becomes the current story text and a new revision.
    pub async fn summarize(&self, gateway: &Gateway, grounding: &Grounding) -> Result<Narrative, NarrativeError> {
        if self.transcript.is_empty() {
            return Err(NarrativeError::EmptyTranscript);
        }
        let mut bundle = PromptBundle::new(self.context(prompts::SUMMARY_SYSTEM, grounding));
        bundle.history = self.transcript.clone();
        bundle.history.push(ChatTurn {
            author: Author::User,
            text: prompts::SUMMARY_REQUEST.to_owned(),
            timestamp: self.stamp(Utc::now()),
        });
        let reply = gateway.complete(&bundle).await?;
        let story = reply.trim();
        if story.is_empty() {
            return Err(NarrativeError::EmptySummary);
        }
        Ok(self.edit_story(story))
    }

    /// The transcript as a JSON array, for the chat log export.
    pub fn chat_log(&self) -> String {
        serde_json::to_string_pretty(&self.transcript).expect("transcript serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    #[tokio::test]
    async fn chat_appends_two_turns() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(["What a nice idea! Who does Misty help?"]);
        let n = Narrative::new();
        let (reply, next) = n.chat("Misty is a study buddy", &gw, &g, t0()).await.unwrap();
        assert_eq!(reply, "What a nice idea! Who does Misty help?");
        assert_eq!(next.transcript.len(), 2);
        assert_eq!(next.transcript[0].author, Author::User);
        assert_eq!(next.transcript[1].text, reply);
        assert!(n.transcript.is_empty());
    }

    #[tokio::test]
    async fn prompt_carries_milestones_and_capabilities() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(["ok"]);
        let n = Narrative::new().set_milestone(MilestoneKind::Actions, true);
        n.chat("hello", &gw, &g, t0()).await.unwrap();
        let prompt = gw.capture().last().unwrap();
        let msgs: Vec<crate::gateway::Message> = serde_json::from_str(&prompt).unwrap();
        assert!(msgs[0].content.contains("- actions: complete"));
        assert!(msgs[0].content.contains("- characters: not yet"));
        assert!(msgs[0].content.contains(&g.capability_text));
    }

    #[tokio::test]
    async fn empty_message_is_rejected() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(["unused"]);
        let n = Narrative::new();
        assert_eq!(n.chat("  ", &gw, &g, t0()).await.unwrap_err(), NarrativeError::EmptyMessage);
        assert_eq!(gw.capture().prompts().len(), 0);
    }

    #[tokio::test]
    async fn gateway_failure_leaves_transcript() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(Vec::<String>::new());
        let n = Narrative::new();
        let err = n.chat("hi", &gw, &g, t0()).await.unwrap_err();
        assert_eq!(err, NarrativeError::Gateway(GatewayError::ScriptExhausted));
    }

    #[tokio::test]
    async fn timestamps_never_go_backwards() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(["a", "b"]);
        let (_, n) = Narrative::new().chat("one", &gw, &g, t0()).await.unwrap();
        let earlier = t0() - chrono::Duration::seconds(10);
        let (_, n) = n.chat("two", &gw, &g, earlier).await.unwrap();
        assert!(n.transcript.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[tokio::test]
    async fn help_returns_scripted_suggestions_in_order() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted([r#"{"suggestions":["A shy student named Sam","Sam's cat","A librarian"]}"#]);
        let help = Narrative::new()
            .request_help(MilestoneKind::Characters, &gw, &g)
            .await
            .unwrap();
        assert_eq!(help.milestone_kind, MilestoneKind::Characters);
        assert_eq!(help.suggestions, vec!["A shy student named Sam", "Sam's cat", "A librarian"]);
        let prompt = gw.capture().last().unwrap();
        assert!(prompt.contains("Milestone needing help: characters"));
    }

    #[tokio::test]
    async fn help_schema_floor() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted([r#"{"suggestions":["only one"]}"#]).with_retry_budget(0);
        let err = Narrative::new()
            .request_help(MilestoneKind::Ending, &gw, &g)
            .await
            .unwrap_err();
        assert!(matches!(err, NarrativeError::Schema(SchemaError { attempts: 1, .. })));
    }

    #[test]
    fn milestone_names_parse() {
        assert_eq!("time".parse::<MilestoneKind>().unwrap(), MilestoneKind::Time);
        assert_eq!(
            "plot".parse::<MilestoneKind>().unwrap_err(),
            NarrativeError::UnknownMilestone("plot".into())
        );
    }

    #[test]
    fn set_milestone_frame_and_involution() {
        let n = Narrative::new();
        let on = n.set_milestone(MilestoneKind::Characters, true);
        for (a, b) in n.milestones.iter().zip(&on.milestones) {
            assert_eq!(a.complete != b.complete, a.kind == MilestoneKind::Characters);
        }
        assert_eq!(
            on.set_milestone(MilestoneKind::Actions, true)
                .set_milestone(MilestoneKind::Actions, false),
            on
        );
        let all = MilestoneKind::ALL
            .into_iter()
            .fold(n, |n, k| n.set_milestone(k, true));
        assert!(all.all_complete());
    }

    #[tokio::test]
    async fn summarize_records_revisions() {
        let g = Grounding::builtin();
        let gw = Gateway::scripted(["hi", "Misty greets Sam.", "Misty greets Sam and cheers."]);
        let n = Narrative::new();
        assert_eq!(n.summarize(&gw, &g).await.unwrap_err(), NarrativeError::EmptyTranscript);
        let (_, n) = n.chat("Misty greets Sam", &gw, &g, t0()).await.unwrap();
        let n = n.summarize(&gw, &g).await.unwrap();
        assert_eq!(n.story_text, "Misty greets Sam.");
        let n = n.summarize(&gw, &g).await.unwrap();
        assert_eq!(n.revisions, vec!["Misty greets Sam.", "Misty greets Sam and cheers."]);
        assert_eq!(n.current_revision(), Some(1));
    }

    #[test]
    fn persisted_shape() {
        let v = serde_json::to_value(Narrative::new()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, vec!["milestones", "revisions", "story_text", "transcript"]);
        assert_eq!(v["milestones"].as_array().unwrap().len(), 7);
    }
}
