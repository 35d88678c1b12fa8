//! The operations behind the HTTP API, independent of the transport.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use storybot_core::gateway::{Gateway, GatewayError, SchemaError};
use storybot_core::goals::{self, GoalError, GoalSet, Hint};
use storybot_core::narrative::{HelpSuggestions, MilestoneKind, NarrativeError};
use storybot_core::program::{lower, validate, ActionTimeline, BlockProgram, ValidationReport, DEFAULT_SPEECH_RATE_WPS};
use storybot_core::simulator::{self, StateTrace};
use storybot_core::Grounding;
use storybot_link::{DeploymentReport, Pacer, RobotConnection, VirtualClock, WallClock};
use tokio::sync::Mutex;

use crate::session::{EventBody, Phase, ReplayError, RunMode, RunSummary, Session, StorySource};
use crate::store::{StorageError, Store};
use crate::ActivityEvent;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("the story is empty; write or summarize it first")]
    EmptyStory,
    #[error("program does not validate")]
    ValidationFailed(ValidationReport),
    #[error("connect to a robot before running on it")]
    NotConnected,
    #[error("goal {goal_index} hint {hint_index} does not exist")]
    IndexError { goal_index: usize, hint_index: usize },
    #[error("cannot move from {from:?} to {to:?}; forward moves go one phase at a time")]
    PhaseOrder { from: Phase, to: Phase },
    #[error("the session changed while this request was in flight; reload and try again")]
    Conflict,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<NarrativeError> for ApiError {
    fn from(e: NarrativeError) -> Self {
        match e {
            NarrativeError::Gateway(g) => g.into(),
            NarrativeError::Schema(s) => s.into(),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

impl From<GoalError> for ApiError {
    fn from(e: GoalError) -> Self {
        match e {
            GoalError::EmptyNarrative => ApiError::EmptyStory,
            GoalError::Gateway(g) => g.into(),
            GoalError::Schema(s) => s.into(),
        }
    }
}

impl From<ReplayError> for ApiError {
    fn from(e: ReplayError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

/// How deployments are paced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pacing {
    /// Real time, so the robot moves alongside the simulator.
    #[default]
    Wall,
    /// No sleeping; for tests and demos.
    Virtual,
}

#[derive(Debug, Clone)]
pub struct StudioConfig {
    pub gateway: Gateway,
    pub grounding: Grounding,
    pub pacing: Pacing,
    pub speech_rate: f64,
    pub store: Store,
}

impl StudioConfig {
    pub fn new(store: Store, gateway: Gateway) -> Self {
        Self {
            gateway,
            grounding: Grounding::builtin(),
            pacing: Pacing::Wall,
            speech_rate: DEFAULT_SPEECH_RATE_WPS,
            store,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub created: chrono::DateTime<Utc>,
    pub id: String,
    pub phase: Phase,
    pub updated: chrono::DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalsView {
    pub current: Option<GoalSet>,
    pub history: Vec<GoalSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub report: Option<DeploymentReport>,
    pub timeline: ActionTimeline,
    pub trace: StateTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResult {
    pub reply: String,
    pub session: Session,
}

type Slot = Arc<Mutex<Session>>;

/// All sessions plus the shared LLM gateway and robot grounding.
#[derive(Debug)]
pub struct Studio {
    config: StudioConfig,
    sessions: RwLock<HashMap<String, Slot>>,
}

impl Studio {
    /// Load every stored session.
    pub fn open(config: StudioConfig) -> Result<Self, StorageError> {
        let sessions = config
            .store
            .load_all()?
            .into_iter()
            .map(|s| (s.id.clone(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(Self {
            config,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn grounding(&self) -> &Grounding {
        &self.config.grounding
    }

    pub fn gateway(&self) -> &Gateway {
        &self.config.gateway
    }

    fn slot(&self, id: &str) -> Result<Slot, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("session {id}")))
    }

    async fn snapshot(&self, id: &str) -> Result<(Slot, Session), ApiError> {
        let slot = self.slot(id)?;
        let s = slot.lock().await.clone();
        Ok((slot, s))
    }

    /// Apply and persist one event. With `expect_version`, fail if anything
    /// else changed the session since that version was read.
    async fn commit(&self, slot: &Slot, body: EventBody, expect_version: Option<u64>) -> Result<Session, ApiError> {
        let mut guard = slot.lock().await;
        if expect_version.is_some_and(|v| v != guard.version) {
            return Err(ApiError::Conflict);
        }
        let event = guard.event(body, Utc::now());
        let next = guard.apply(&event)?;
        self.config.store.commit(&next, &event)?;
        *guard = next.clone();
        Ok(next)
    }

    pub async fn create_session(&self) -> Result<Session, ApiError> {
        let id = format!("{:032x}", rand::random::<u128>());
        let (session, event) = Session::create(&id, Utc::now());
        self.config.store.commit(&session, &event)?;
        self.sessions
            .write()
            .unwrap()
            .insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    pub async fn list_sessions(&self) -> Vec<SessionSummary> {
        let slots: Vec<Slot> = self.sessions.read().unwrap().values().cloned().collect();
        let mut out = Vec::with_capacity(slots.len());
        for slot in slots {
            out.push(summary(&*slot.lock().await));
        }
        out.sort_by(|a, b| a.created.cmp(&b.created).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub async fn session(&self, id: &str) -> Result<Session, ApiError> {
        Ok(self.snapshot(id).await?.1)
    }

    pub async fn activity(&self, id: &str) -> Result<Vec<ActivityEvent>, ApiError> {
        let slot = self.slot(id)?;
        let _guard = slot.lock().await;
        Ok(self.config.store.load_events(id)?)
    }

    pub async fn chat(&self, id: &str, message: &str) -> Result<ChatResult, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let (reply, _) = s
            .narrative
            .chat(message, &self.config.gateway, &self.config.grounding, Utc::now())
            .await?;
        let body = EventBody::Chat {
            message: message.to_owned(),
            reply: reply.clone(),
        };
        let session = self.commit(&slot, body, Some(s.version)).await?;
        Ok(ChatResult { reply, session })
    }

    pub async fn request_help(&self, id: &str, kind: MilestoneKind) -> Result<HelpSuggestions, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let suggestions = s
            .narrative
            .request_help(kind, &self.config.gateway, &self.config.grounding)
            .await?;
        let body = EventBody::HelpRequest {
            suggestions: suggestions.clone(),
        };
        self.commit(&slot, body, None).await?;
        Ok(suggestions)
    }

    pub async fn set_milestone(&self, id: &str, milestone: MilestoneKind, complete: bool) -> Result<Session, ApiError> {
        let slot = self.slot(id)?;
        self.commit(&slot, EventBody::MilestoneSet { complete, milestone }, None)
            .await
    }

    pub async fn summarize(&self, id: &str) -> Result<Session, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let next = s
            .narrative
            .summarize(&self.config.gateway, &self.config.grounding)
            .await?;
        let body = EventBody::StoryEdited {
            source: StorySource::Summary,
            text: next.story_text,
        };
        self.commit(&slot, body, Some(s.version)).await
    }

    pub async fn edit_story(&self, id: &str, text: &str) -> Result<Session, ApiError> {
        let slot = self.slot(id)?;
        let body = EventBody::StoryEdited {
            source: StorySource::User,
            text: text.to_owned(),
        };
        self.commit(&slot, body, None).await
    }

    pub async fn set_phase(&self, id: &str, phase: Phase) -> Result<Session, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        if !s.phase.can_move_to(phase) {
            return Err(ApiError::PhaseOrder { from: s.phase, to: phase });
        }
        self.commit(&slot, EventBody::PhaseChanged { phase }, Some(s.version))
            .await
    }

    pub async fn generate_goals(&self, id: &str) -> Result<GoalSet, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let goal_set = goals::generate_goals(&s.narrative, &self.config.gateway, &self.config.grounding).await?;
        let body = EventBody::GoalsGenerated {
            goal_set: goal_set.clone(),
        };
        self.commit(&slot, body, Some(s.version)).await?;
        Ok(goal_set)
    }

    /// Regenerate, counting one generation past the current set.
    pub async fn retry_goals(&self, id: &str) -> Result<GoalSet, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let prior = s
            .current_goals()
            .ok_or_else(|| ApiError::NotFound("goal set to retry".into()))?;
        let goal_set = goals::retry_goals(prior, &s.narrative, &self.config.gateway, &self.config.grounding).await?;
        let body = EventBody::GoalsRetried {
            goal_set: goal_set.clone(),
        };
        self.commit(&slot, body, Some(s.version)).await?;
        Ok(goal_set)
    }

    pub async fn goals(&self, id: &str) -> Result<GoalsView, ApiError> {
        let s = self.session(id).await?;
        Ok(GoalsView {
            current: s.current_goals().cloned(),
            history: s.goal_sets,
        })
    }

    /// Return a hint of the current goal set and log that it was opened.
    pub async fn open_hint(&self, id: &str, goal_index: usize, hint_index: usize) -> Result<Hint, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let set = s.current_goals();
        let hint = set
            .and_then(|g| g.goals.get(goal_index))
            .and_then(|g| g.hints.get(hint_index))
            .cloned()
            .ok_or(ApiError::IndexError { goal_index, hint_index })?;
        let body = EventBody::HintOpened {
            generation: set.map_or(0, |g| g.generation),
            goal_index,
            hint_index,
        };
        self.commit(&slot, body, Some(s.version)).await?;
        Ok(hint)
    }

    /// Store the program, valid or not, and report on it.
    pub async fn put_program(&self, id: &str, program: BlockProgram) -> Result<ValidationReport, ApiError> {
        let slot = self.slot(id)?;
        let report = validate(&program, &self.config.grounding.catalog);
        self.commit(&slot, EventBody::ProgramEdited { program }, None).await?;
        Ok(report)
    }

    pub async fn validate(&self, id: &str) -> Result<ValidationReport, ApiError> {
        let s = self.session(id).await?;
        Ok(validate(&s.program, &self.config.grounding.catalog))
    }

    pub async fn connect(&self, id: &str, ip: &str) -> Result<RobotConnection, ApiError> {
        let slot = self.slot(id)?;
        let connection = storybot_link::connect(ip)
            .await
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        self.commit(
            &slot,
            EventBody::Connected {
                connection: connection.clone(),
            },
            None,
        )
        .await?;
        Ok(connection)
    }

    /// Lower the program once, simulate it, and in `SimAndRobot` mode deploy
    /// the same timeline.
    pub async fn run(&self, id: &str, mode: RunMode) -> Result<RunResult, ApiError> {
        let (slot, s) = self.snapshot(id).await?;
        let catalog = &self.config.grounding.catalog;
        let report = validate(&s.program, catalog);
        if !report.is_valid() {
            return Err(ApiError::ValidationFailed(report));
        }
        let robot = match mode {
            RunMode::Sim => None,
            RunMode::SimAndRobot => Some(
                s.connection
                    .as_ref()
                    .and_then(RobotConnection::handle)
                    .ok_or(ApiError::NotConnected)?,
            ),
        };
        let timeline = lower(&s.program, catalog, self.config.speech_rate).map_err(|e| ApiError::Internal(e.to_string()))?;
        let trace = simulator::run(&timeline).map_err(|e| ApiError::Internal(e.to_string()))?;
        let run = RunSummary {
            action_count: timeline.len(),
            frame_count: trace.frames.len(),
            mode,
            total_duration: timeline.total_duration,
        };
        let deployment = match robot {
            None => None,
            Some(robot) => {
                let pacer: Box<dyn Pacer> = match self.config.pacing {
                    Pacing::Wall => Box::new(WallClock::start()),
                    Pacing::Virtual => Box::new(VirtualClock::new()),
                };
                let report = storybot_link::deploy(&robot, &timeline, pacer.as_ref())
                    .await
                    .map_err(|e| ApiError::Internal(e.to_string()))?;
                Some(report)
            }
        };
        let body = match &deployment {
            None => EventBody::Simulated { run },
            Some(report) => EventBody::Deployed {
                report: report.clone(),
                run,
            },
        };
        self.commit(&slot, body, None).await?;
        Ok(RunResult {
            report: deployment,
            timeline,
            trace,
        })
    }
}

fn summary(s: &Session) -> SessionSummary {
    SessionSummary {
        created: s.created,
        id: s.id.clone(),
        phase: s.phase,
        updated: s.updated,
    }
}
