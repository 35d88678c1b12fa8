//! Connecting to a robot and streaming a timeline to it.

use std::net::{Ipv4Addr, SocketAddrV4};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use storybot_core::program::ActionTimeline;

use crate::protocol::{command_for, DeviceInfo, DEVICE_ENDPOINT};

pub const DEFAULT_PORT: u16 = 80;
pub const HEALTH_TIMEOUT: Duration = Duration::from_secs(3);
pub const COMMAND_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not an IPv4 address; expected a.b.c.d or a.b.c.d:port")]
pub struct AddressError(pub String);

/// Parse `a.b.c.d` or `a.b.c.d:port`.
pub fn parse_address(text: &str) -> Result<SocketAddrV4, AddressError> {
    let t = text.trim();
    if let Ok(ip) = t.parse::<Ipv4Addr>() {
        return Ok(SocketAddrV4::new(ip, DEFAULT_PORT));
    }
    t.parse::<SocketAddrV4>()
        .ok()
        .filter(|a| a.port() != 0)
        .ok_or_else(|| AddressError(text.to_owned()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConnectionState {
    Disconnected,
    Connected { robot_name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotConnection {
    pub ip: String,
    pub last_error: Option<String>,
    pub state: ConnectionState,
}

impl RobotConnection {
    pub fn disconnected(ip: impl Into<String>) -> Self {
        Self {
            ip: ip.into(),
            last_error: None,
            state: ConnectionState::Disconnected,
        }
    }

    pub fn is_connected(&self) -> bool {
        matches!(self.state, ConnectionState::Connected { .. })
    }

    /// The only way to obtain something `deploy` accepts.
    pub fn handle(&self) -> Option<RobotHandle> {
        let ConnectionState::Connected { robot_name } = &self.state else {
            return None;
        };
        let addr = parse_address(&self.ip).ok()?;
        Some(RobotHandle {
            addr,
            robot_name: robot_name.clone(),
            client: http_client(COMMAND_TIMEOUT),
        })
    }
}

fn http_client(timeout: Duration) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(timeout)
        .build()
        .expect("plain HTTP client builds")
}

fn url(addr: SocketAddrV4, path: &str) -> String {
    format!("http://{addr}{path}")
}

/// Health-check the robot. A bad address is the only error; an unreachable
/// or unhealthy robot yields a `Disconnected` connection with `last_error`.
pub async fn connect(ip: &str) -> Result<RobotConnection, AddressError> {
    connect_with_timeout(ip, HEALTH_TIMEOUT).await
}

pub async fn connect_with_timeout(ip: &str, timeout: Duration) -> Result<RobotConnection, AddressError> {
    let addr = parse_address(ip)?;
    let mut conn = RobotConnection::disconnected(ip.trim());
    match health_check(addr, timeout).await {
        Ok(info) => {
            conn.state = ConnectionState::Connected {
                robot_name: info.name,
            }
        }
        Err(e) => conn.last_error = Some(e),
    }
    Ok(conn)
}

async fn health_check(addr: SocketAddrV4, timeout: Duration) -> Result<DeviceInfo, String> {
    let resp = http_client(timeout)
        .get(url(addr, DEVICE_ENDPOINT))
        .send()
        .await
        .map_err(|e| format!("robot at {addr} is unreachable: {e}"))?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("health check returned HTTP {}", status.as_u16()));
    }
    resp.json::<DeviceInfo>()
        .await
        .map_err(|e| format!("health check reply is not a device description: {e}"))
}

/// A connected robot. Only [`RobotConnection::handle`] makes one.
#[derive(Debug, Clone)]
pub struct RobotHandle {
    addr: SocketAddrV4,
    robot_name: String,
    client: reqwest::Client,
}

impl RobotHandle {
    pub fn robot_name(&self) -> &str {
        &self.robot_name
    }

    pub fn addr(&self) -> SocketAddrV4 {
        self.addr
    }
}

/// Keeps the robot in step with the timeline.
#[async_trait]
pub trait Pacer: Send + Sync {
    /// Seconds since the deployment started.
    fn now(&self) -> f64;
    /// Block until `now() >= t`.
    async fn sleep_until(&self, t: f64);
}

/// Real time.
#[derive(Debug)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

#[async_trait]
impl Pacer for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    async fn sleep_until(&self, t: f64) {
        let wait = t - self.now();
        if wait > 0.0 {
            tokio::time::sleep(Duration::from_secs_f64(wait)).await;
        }
    }
}

/// Time that jumps forward instead of sleeping, for tests.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<f64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl Pacer for VirtualClock {
    fn now(&self) -> f64 {
        *self.now.lock().unwrap()
    }

    async fn sleep_until(&self, t: f64) {
        let mut now = self.now.lock().unwrap();
        *now = now.max(t);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentCommand {
    /// Index of the action in the timeline.
    pub action_index: usize,
    /// Seconds since deployment start when the request was issued.
    pub at: f64,
    pub endpoint: String,
    /// `None` when the request never got a response.
    pub http_status: Option<u16>,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// `at_index` counts commands, not actions.
    Aborted { at_index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentReport {
    pub commands_sent: Vec<SentCommand>,
    pub finished: DateTime<Utc>,
    pub outcome: Outcome,
    pub robot_name: String,
    pub started: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeployError {
    #[error("timeline is malformed: {0}")]
    InvalidTimeline(String),
}

/// Send each action in order, one request per non-wait action, paced by
/// the action start times. The first failing request aborts the run.
pub async fn deploy(
    robot: &RobotHandle,
    timeline: &ActionTimeline,
    pacer: &dyn Pacer,
) -> Result<DeploymentReport, DeployError> {
    timeline.check().map_err(DeployError::InvalidTimeline)?;
    for (i, a) in timeline.iter().enumerate() {
        a.check_ranges()
            .map_err(|e| DeployError::InvalidTimeline(format!("action {i}: {e}")))?;
    }
    let started = Utc::now();
    let mut sent = Vec::new();
    let mut outcome = Outcome::Completed;
    for (action_index, timed) in timeline.actions.iter().enumerate() {
        pacer.sleep_until(timed.start).await;
        let Some(cmd) = command_for(&timed.action) else {
            continue;
        };
        let at = pacer.now();
        let result = robot
            .client
            .post(url(robot.addr, &cmd.endpoint))
            .json(&cmd.payload)
            .send()
            .await;
        let (http_status, failure) = match result {
            Ok(resp) if resp.status().is_success() => (Some(resp.status().as_u16()), None),
            Ok(resp) => {
                let code = resp.status().as_u16();
                (Some(code), Some(format!("{} returned HTTP {code}", cmd.endpoint)))
            }
            Err(e) => (None, Some(format!("{} failed: {e}", cmd.endpoint))),
        };
        let index = sent.len();
        sent.push(SentCommand {
            action_index,
            at,
            endpoint: cmd.endpoint,
            http_status,
            payload: cmd.payload,
        });
        if let Some(reason) = failure {
            outcome = Outcome::Aborted {
                at_index: index,
                reason,
            };
            break;
        }
    }
    if outcome == Outcome::Completed {
        pacer.sleep_until(timeline.total_duration).await;
    }
    Ok(DeploymentReport {
        commands_sent: sent,
        finished: Utc::now(),
        outcome,
        robot_name: robot.robot_name.clone(),
        started,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addresses() {
        assert_eq!(parse_address("192.168.1.20").unwrap().port(), 80);
        assert_eq!(parse_address(" 10.0.0.5:8080 ").unwrap().port(), 8080);
        for bad in ["", "localhost", "256.1.1.1", "1.2.3", "1.2.3.4:0", "1.2.3.4:99999", "::1"] {
            assert!(parse_address(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn disconnected_has_no_handle() {
        assert!(RobotConnection::disconnected("127.0.0.1").handle().is_none());
    }

    #[tokio::test]
    async fn virtual_clock_only_moves_forward() {
        let c = VirtualClock::new();
        c.sleep_until(2.0).await;
        c.sleep_until(1.0).await;
        assert_eq!(c.now(), 2.0);
    }
}
