use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ediref_client::Client;
use ediref_core::api::{Command, RunRequest};
use ediref_core::pipeline::{RunConfig, SweepKind};
use ediref_core::ErrorKind;

/// Emotion recognition in code-mixed dialogue: statistics, training,
/// sweeps, prompt evaluation and reports.
#[derive(Parser)]
#[command(name = "ediref", version)]
struct Cli {
    /// Service to send commands to; an in-process one is started when absent.
    #[arg(long, global = true, env = "EDIREF_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Label distribution, emotion flips and token lengths.
    Stats(RunArgs),
    /// Two-stage fine-tuning and held-out evaluation.
    Train(RunArgs),
    /// Max-length or epoch-grid sweep.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to `sweep.kind` in the config.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
    /// Prompt-based classification through a completion endpoint.
    PromptEval(RunArgs),
    /// Figures and a comparison table over finished runs.
    Report {
        #[command(flatten)]
        run: RunArgs,
        /// Run directory to include; repeatable. Defaults to `report.runs`.
        #[arg(long = "run")]
        runs: Vec<PathBuf>,
    },
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Transcript to replay instead of calling the endpoint (prompt-eval).
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    MaxLength,
    Epochs,
}

struct Failure {
    kind: ErrorKind,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn request(command: Command, args: &RunArgs) -> Result<RunRequest, Failure> {
    let mut config = RunConfig::load(&args.config)
        .map_err(|e| Failure::config(format!("cannot load config {}: {e}", args.config.display())))?;
    for p in config.data.paths.iter_mut().chain(config.report.runs.iter_mut()) {
        *p = absolute(p);
    }
    if args.replay.is_some() && command != Command::PromptEval {
        return Err(Failure::config("--replay only applies to prompt-eval"));
    }
    let mut req = RunRequest::new(config);
    req.out = args.out.as_deref().map(absolute);
    req.seed = args.seed;
    req.replay = args.replay.as_deref().map(absolute);
    Ok(req)
}

async fn dispatch(server: Option<String>, command: Command, req: RunRequest) -> Result<(), Failure> {
    let client = match server {
        Some(url) => Client::new(url),
        None => {
            let (addr, serving) = ediref_server::bind(SocketAddr::from(([127, 0, 0, 1], 0)))
                .await
                .map_err(|e| Failure {
                    kind: ErrorKind::Runtime,
                    message: format!("cannot start embedded service: {e}"),
                })?;
            tokio::spawn(serving);
            Client::new(format!("http://{addr}"))
        }
    };
    let outcome = client.run(command, &req).await.map_err(|e| Failure {
        kind: e.kind(),
        message: e.to_string(),
    })?;
    let m = &outcome.manifest;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    let summary = serde_json::json!({
        "command": m.command,
        "run_dir": outcome.run_dir,
        "status": m.status,
        "artifacts": m.artifacts.len(),
        "metrics": m.metrics,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let (command, req) = match &cli.command {
        Cmd::Serve { addr } => {
            return match ediref_server::serve(*addr).await {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(ErrorKind::Runtime.exit_code() as u8)
                }
            };
        }
        Cmd::Stats(a) => (Command::Stats, request(Command::Stats, a)),
        Cmd::Train(a) => (Command::Train, request(Command::Train, a)),
        Cmd::PromptEval(a) => (Command::PromptEval, request(Command::PromptEval, a)),
        Cmd::Sweep { run, kind } => (
            Command::Sweep,
            request(Command::Sweep, run).map(|mut r| {
                r.kind = kind.map(|k| match k {
                    KindArg::MaxLength => SweepKind::MaxLength,
                    KindArg::Epochs => SweepKind::Epochs,
                });
                r
            }),
        ),
        Cmd::Report { run, runs } => (
            Command::Report,
            request(Command::Report, run).map(|mut r| {
                r.runs = runs.iter().map(|p| absolute(p)).collect();
                r
            }),
        ),
    };
    let result = match req {
        Ok(req) => dispatch(cli.server, command, req).await,
        Err(f) => Err(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.kind.exit_code() as u8)
        }
    }
}
