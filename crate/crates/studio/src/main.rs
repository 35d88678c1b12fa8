use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Parser, Subcommand};
use storybot_core::catalog::{builtin_catalog, render_manifest_text};
use storybot_core::gateway::{GatewayConfig, Provider, DEFAULT_RETRY_BUDGET};
use storybot_link::{FaultScript, MockRobot};
use storybot_studio::{serve, Cors, Pacing, Store, StudioConfig};

#[derive(Debug, Parser)]
#[command(name = "storybot", version, about = "Robot storytelling studio service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where LLM replies come from.
#[derive(Debug, Clone)]
enum GatewayArg {
    Mock(PathBuf),
    Remote,
}

impl FromStr for GatewayArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("mock", path)) if !path.is_empty() => Ok(GatewayArg::Mock(path.into())),
            _ if s == "remote" => Ok(GatewayArg::Remote),
            _ => Err("expected mock:<script.json> or remote".into()),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long)]
        storage: PathBuf,
        /// mock:<script.json> or remote (configured by STORYBOT_LLM_* variables).
        #[arg(long)]
        gateway: GatewayArg,
        #[arg(long, default_value_t = DEFAULT_RETRY_BUDGET)]
        retry_budget: u32,
        #[arg(long, default_value_t = 60)]
        llm_timeout_secs: u64,
        /// Browser origin allowed to call the API, or `*` for any.
        #[arg(long)]
        cors_origin: Option<String>,
        /// Deploy without real-time pacing.
        #[arg(long)]
        virtual_pacing: bool,
    },
    /// Serve a mock robot that records every call.
    MockRobot {
        #[arg(long, default_value_t = 8090)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// JSON object of command index to HTTP status, e.g. {"1": 500}.
        #[arg(long)]
        faults: Option<PathBuf>,
    },
    /// Print the block catalog as JSON, or the capability text.
    Catalog {
        #[arg(long)]
        text: bool,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::FAILURE
}

#[tokio::main]
async fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Catalog { text } => {
            let (catalog, manifest) = builtin_catalog();
            if text {
                print!("{}", render_manifest_text(&catalog, &manifest));
            } else {
                println!("{}", catalog.to_json());
            }
            ExitCode::SUCCESS
        }
        Command::MockRobot { port, bind, faults } => {
            let faults = match faults.as_deref().map(FaultScript::load).transpose() {
                Ok(f) => f.unwrap_or_default(),
                Err(e) => return fail(e),
            };
            let robot = match MockRobot::serve_at(SocketAddr::new(bind, port), faults).await {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            println!("mock robot listening on {}", robot.addr());
            let _ = tokio::signal::ctrl_c().await;
            robot.shutdown().await;
            ExitCode::SUCCESS
        }
        Command::Serve {
            port,
            bind,
            storage,
            gateway,
            retry_budget,
            llm_timeout_secs,
            cors_origin,
            virtual_pacing,
        } => {
            let provider = match gateway {
                GatewayArg::Mock(script) => Provider::ScriptedMock { script },
                GatewayArg::Remote => Provider::RemoteHttp,
            };
            let mut gw = GatewayConfig::new(provider);
            gw.retry_budget = retry_budget;
            gw.timeout = Duration::from_secs(llm_timeout_secs);
            let gateway = match gw.build() {
                Ok(g) => g,
                Err(e) => return fail(e),
            };
            let store = match Store::open(&storage) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let mut config = StudioConfig::new(store, gateway);
            if virtual_pacing {
                config.pacing = Pacing::Virtual;
            }
            let cors = match cors_origin.as_deref() {
                None => Cors::Off,
                Some("*") => Cors::Any,
                Some(o) => Cors::Origin(o.to_owned()),
            };
            let service = match serve(SocketAddr::new(bind, port), config, &cors).await {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            println!("storybot studio listening on {}", service.base_url());
            let _ = tokio::signal::ctrl_c().await;
            service.shutdown().await;
            ExitCode::SUCCESS
        }
    }
}
