//! Deployment of action timelines to a Misty-style robot over REST, and a
//! recording mock robot for tests and demos.
//!
//! ```no_run
//! # async fn demo(timeline: storybot_core::program::ActionTimeline) {
//! use storybot_link::{connect, deploy, WallClock};
//!
//! let conn = connect("192.168.1.20").await.expect("valid address");
//! if let Some(robot) = conn.handle() {
//!     let report = deploy(&robot, &timeline, &WallClock::start()).await.unwrap();
//!     println!("{:?}", report.outcome);
//! }
//! # }
//! ```

pub mod client;
pub mod mock;
pub mod protocol;

pub use client::{
    connect, connect_with_timeout, deploy, parse_address, AddressError, ConnectionState, DeployError,
    DeploymentReport, Outcome, Pacer, RobotConnection, RobotHandle, SentCommand, VirtualClock, WallClock,
};
pub use mock::{BindError, FaultScript, MockRobot, RecordedCall};
pub use protocol::{command_for, Command};
