//! Sessions and the activity events that build them.
//!
//! A session is never mutated directly. Every change is an [`ActivityEvent`]
//! applied with [`Session::apply`], so replaying a session's event log over
//! nothing rebuilds it exactly.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use storybot_core::gateway::{Author, ChatTurn};
use storybot_core::goals::GoalSet;
use storybot_core::narrative::{HelpSuggestions, MilestoneKind, Narrative};
use storybot_core::program::BlockProgram;
use storybot_link::{DeploymentReport, RobotConnection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NarrativeCreation,
    GoalGeneration,
    Programming,
    Deployment,
}

impl Phase {
    /// Forward moves go one step at a time; backward moves may skip.
    pub fn can_move_to(self, next: Phase) -> bool {
        next <= self || next as u8 == self as u8 + 1
    }
}

/// How to run a program. Running on the robot always runs the simulator
/// too; there is no robot-only mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Sim,
    SimAndRobot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorySource {
    User,
    Summary,
}

/// Summary of one simulator run, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub action_count: usize,
    pub frame_count: usize,
    pub mode: RunMode,
    pub total_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionCreated {},
    Chat {
        message: String,
        reply: String,
    },
    HelpRequest {
        suggestions: HelpSuggestions,
    },
    MilestoneSet {
        complete: bool,
        milestone: MilestoneKind,
    },
    StoryEdited {
        source: StorySource,
        text: String,
    },
    GoalsGenerated {
        goal_set: GoalSet,
    },
    GoalsRetried {
        goal_set: GoalSet,
    },
    HintOpened {
        generation: u32,
        goal_index: usize,
        hint_index: usize,
    },
    ProgramEdited {
        program: BlockProgram,
    },
    Simulated {
        run: RunSummary,
    },
    Connected {
        connection: RobotConnection,
    },
    Deployed {
        report: DeploymentReport,
        run: RunSummary,
    },
    PhaseChanged {
        phase: Phase,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::SessionCreated { .. } => "session_created",
            EventBody::Chat { .. } => "chat",
            EventBody::HelpRequest { .. } => "help_request",
            EventBody::MilestoneSet { .. } => "milestone_set",
            EventBody::StoryEdited { .. } => "story_edited",
            EventBody::GoalsGenerated { .. } => "goals_generated",
            EventBody::GoalsRetried { .. } => "goals_retried",
            EventBody::HintOpened { .. } => "hint_opened",
            EventBody::ProgramEdited { .. } => "program_edited",
            EventBody::Simulated { .. } => "simulated",
            EventBody::Connected { .. } => "connected",
            EventBody::Deployed { .. } => "deployed",
            EventBody::PhaseChanged { .. } => "phase_changed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    #[serde(flatten)]
    pub body: EventBody,
    /// Position in the session's log, from 0.
    pub seq: u64,
    pub session_id: String,
    pub timestamp: DateTime<Utc>,
}

impl ActivityEvent {
    pub fn payload(&self) -> Value {
        serde_json::to_value(&self.body).expect("event serializes")["payload"].take()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("event {seq}: {reason}")]
    Inconsistent { seq: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub connection: Option<RobotConnection>,
    pub created: DateTime<Utc>,
    /// Every goal set generated, oldest first; the last is current.
    pub goal_sets: Vec<GoalSet>,
    pub id: String,
    pub narrative: Narrative,
    pub phase: Phase,
    pub program: BlockProgram,
    pub updated: DateTime<Utc>,
    /// Number of events applied so far.
    pub version: u64,
}

impl Session {
    pub fn current_goals(&self) -> Option<&GoalSet> {
        self.goal_sets.last()
    }

    /// A timestamp for the next event: `now`, unless that would go back in time.
    pub fn next_timestamp(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        now.max(self.updated)
    }

    /// The next event in this session's log.
    pub fn event(&self, body: EventBody, now: DateTime<Utc>) -> ActivityEvent {
        ActivityEvent {
            body,
            seq: self.version,
            session_id: self.id.clone(),
            timestamp: self.next_timestamp(now),
        }
    }

    /// A session from its creation event.
    pub fn create(id: &str, now: DateTime<Utc>) -> (Session, ActivityEvent) {
        let event = ActivityEvent {
            body: EventBody::SessionCreated {},
            seq: 0,
            session_id: id.to_owned(),
            timestamp: now,
        };
        let session = Session::from_created(&event);
        (session, event)
    }

    fn from_created(event: &ActivityEvent) -> Session {
        Session {
            connection: None,
            created: event.timestamp,
            goal_sets: Vec::new(),
            id: event.session_id.clone(),
            narrative: Narrative::new(),
            phase: Phase::NarrativeCreation,
            program: BlockProgram::new(Vec::new()),
            updated: event.timestamp,
            version: 1,
        }
    }

    /// Apply the next event. Events out of sequence or for another session
    /// are refused.
    pub fn apply(&self, event: &ActivityEvent) -> Result<Session, ReplayError> {
        let fail = |reason: String| ReplayError::Inconsistent {
            seq: event.seq,
            reason,
        };
        if event.session_id != self.id {
            return Err(fail(format!("belongs to session {}", event.session_id)));
        }
        if event.seq != self.version {
            return Err(fail(format!("expected seq {}", self.version)));
        }
        if event.timestamp < self.updated {
            return Err(fail("timestamp goes backwards".into()));
        }
        let mut next = self.clone();
        match &event.body {
            EventBody::SessionCreated {} => return Err(fail("session created twice".into())),
            EventBody::Chat { message, reply } => {
                for (author, text) in [(Author::User, message), (Author::Agent, reply)] {
                    next.narrative.transcript.push(ChatTurn {
                        author,
                        text: text.clone(),
                        timestamp: event.timestamp,
                    });
                }
            }
            EventBody::MilestoneSet { complete, milestone } => {
                next.narrative = next.narrative.set_milestone(*milestone, *complete);
            }
            EventBody::StoryEdited { text, .. } => next.narrative = next.narrative.edit_story(text),
            EventBody::GoalsGenerated { goal_set } | EventBody::GoalsRetried { goal_set } => {
                next.goal_sets.push(goal_set.clone())
            }
            EventBody::ProgramEdited { program } => next.program = program.clone(),
            EventBody::Connected { connection } => next.connection = Some(connection.clone()),
            EventBody::PhaseChanged { phase } => {
                if !self.phase.can_move_to(*phase) {
                    return Err(fail(format!("cannot move from {:?} to {phase:?}", self.phase)));
                }
                next.phase = *phase;
            }
            EventBody::HelpRequest { .. }
            | EventBody::HintOpened { .. }
            | EventBody::Simulated { .. }
            | EventBody::Deployed { .. } => {}
        }
        next.updated = event.timestamp;
        next.version += 1;
        Ok(next)
    }

    /// Rebuild a session from its full event log.
    pub fn replay(events: &[ActivityEvent]) -> Result<Session, ReplayError> {
        let (first, rest) = events.split_first().ok_or(ReplayError::Empty)?;
        if first.body != (EventBody::SessionCreated {}) || first.seq != 0 {
            return Err(ReplayError::Inconsistent {
                seq: first.seq,
                reason: "log must start with session_created".into(),
            });
        }
        rest.iter()
            .try_fold(Session::from_created(first), |s, e| s.apply(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(secs: i64) -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000 + secs, 0).unwrap()
    }

    #[test]
    fn phases_move_forward_one_step_and_back_any() {
        use Phase::*;
        assert!(NarrativeCreation.can_move_to(GoalGeneration));
        assert!(!NarrativeCreation.can_move_to(Programming));
        assert!(Deployment.can_move_to(NarrativeCreation));
        assert!(Programming.can_move_to(Programming));
    }

    #[test]
    fn replay_rebuilds_session() {
        let (s0, created) = Session::create("abc", t(0));
        let mut log = vec![created];
        let mut s = s0;
        for body in [
            EventBody::Chat {
                message: "hi".into(),
                reply: "hello".into(),
            },
            EventBody::MilestoneSet {
                complete: true,
                milestone: MilestoneKind::Characters,
            },
            EventBody::StoryEdited {
                source: StorySource::User,
                text: "Misty waves.".into(),
            },
            EventBody::PhaseChanged {
                phase: Phase::GoalGeneration,
            },
        ] {
            let e = s.event(body, t(5));
            s = s.apply(&e).unwrap();
            log.push(e);
        }
        assert_eq!(Session::replay(&log).unwrap(), s);
        assert_eq!(s.narrative.transcript.len(), 2);
        assert_eq!(s.version, 5);
    }

    #[test]
    fn out_of_order_events_are_refused() {
        let (s, _) = Session::create("abc", t(10));
        let mut e = s.event(EventBody::PhaseChanged { phase: Phase::Programming }, t(11));
        assert!(s.apply(&e).is_err());
        e.body = EventBody::PhaseChanged {
            phase: Phase::GoalGeneration,
        };
        e.seq = 7;
        assert!(s.apply(&e).is_err());
        assert_eq!(Session::replay(&[]), Err(ReplayError::Empty));
    }

    #[test]
    fn timestamps_never_go_backwards() {
        let (s, _) = Session::create("abc", t(10));
        let e = s.event(EventBody::PhaseChanged { phase: Phase::NarrativeCreation }, t(3));
        assert_eq!(e.timestamp, t(10));
    }

    #[test]
    fn event_wire_shape() {
        let (s, _) = Session::create("abc", t(0));
        let e = s.event(
            EventBody::HintOpened {
                generation: 1,
                goal_index: 0,
                hint_index: 1,
            },
            t(1),
        );
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["kind"], "hint_opened");
        assert_eq!(v["payload"]["hint_index"], 1);
        assert_eq!(e.payload()["goal_index"], 0);
    }
}
