use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use leaftutor_client::Client;
use leaftutor_core::config::Config;
use leaftutor_core::{Id, MaterialKind, TutorService};

#[derive(Parser)]
#[command(name = "leaftutor", version, about = "LeafTutor service and admin tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct StoreArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data directory (overrides the config file).
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(clap::Args, Clone)]
struct RemoteArgs {
    /// Base URL of a running server.
    #[arg(long, env = "LEAFTUTOR_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    /// Instructor bearer token.
    #[arg(long, env = "LEAFTUTOR_TOKEN", hide_env_values = true)]
    token: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        listen: Option<SocketAddr>,
    },
    /// Create an instructor account and print its bearer token.
    BootstrapInstructor {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        name: String,
    },
    /// Print a bearer token for a student id (add the id to a roster separately).
    IssueToken {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        student: String,
    },
    /// Upload files as materials of an assignment on a running server.
    Ingest {
        #[command(flatten)]
        remote: RemoteArgs,
        #[arg(long)]
        assignment: String,
        /// INSTRUCTIONS, SOLUTION, LECTURE or REMARKS.
        #[arg(long)]
        kind: String,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Replay scenario files against a private in-process server.
    Replay {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
}

const USAGE: u8 = 2;

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE)
}

fn load_config(args: &StoreArgs) -> Result<Config, String> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    if let Some(store) = &args.store {
        cfg.store = store.clone();
    }
    cfg.apply_env();
    Ok(cfg)
}

fn open_service(args: &StoreArgs) -> Result<TutorService, String> {
    let cfg = load_config(args)?;
    TutorService::from_config(&cfg).map_err(|e| e.to_string())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match cli.command {
        Command::Serve { store, listen } => serve(&store, listen).await,
        Command::BootstrapInstructor { store, name } => match open_service(&store) {
            Ok(svc) => match svc.bootstrap_instructor(&name) {
                Ok((instructor, token)) => {
                    eprintln!(
                        "instructor {} created; token expires {}",
                        instructor.instructor_id, token.expires_at
                    );
                    println!("{}", token.token);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            },
            Err(e) => usage(e),
        },
        Command::IssueToken { store, student } => {
            let id = match Id::parse(&student) {
                Ok(id) => id,
                Err(e) => return usage(e),
            };
            match open_service(&store) {
                Ok(svc) => match svc.issue_student_token(&id) {
                    Ok(token) => {
                        println!("{}", token.token);
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail(e),
                },
                Err(e) => usage(e),
            }
        }
        Command::Ingest {
            remote,
            assignment,
            kind,
            paths,
        } => ingest(&remote, &assignment, &kind, &paths).await,
        Command::Replay { scenarios } => replay(&scenarios).await,
    }
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::FAILURE
}

async fn serve(args: &StoreArgs, listen: Option<SocketAddr>) -> ExitCode {
    let mut cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(e) => return usage(e),
    };
    if let Some(addr) = listen {
        cfg.listen = addr;
    }
    let service = match TutorService::from_config(&cfg) {
        Ok(s) => Arc::new(s),
        Err(e) => return usage(e),
    };
    let listener = match tokio::net::TcpListener::bind(cfg.listen).await {
        Ok(l) => l,
        Err(e) => return fail(format!("bind {}: {e}", cfg.listen)),
    };
    tracing::info!(addr = %cfg.listen, store = %cfg.store.display(), "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match leaftutor_server::serve(listener, service, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

async fn ingest(remote: &RemoteArgs, assignment: &str, kind: &str, paths: &[PathBuf]) -> ExitCode {
    // Argument problems are reported before any request is made.
    let kind: MaterialKind = match kind.parse() {
        Ok(k) => k,
        Err(e) => return usage(e),
    };
    let assignment = match Id::parse(assignment) {
        Ok(id) => id,
        Err(e) => return usage(e),
    };
    let client = Client::new(&remote.server).with_token(&remote.token);
    let mut failed = 0;
    for path in paths {
        match upload_one(&client, &assignment, kind, path).await {
            Ok(n) => println!("{}: {n} chunks", path.display()),
            Err(e) => {
                failed += 1;
                println!("{}: error {e}", path.display());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

async fn upload_one(client: &Client, assignment: &Id, kind: MaterialKind, path: &Path) -> Result<usize, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| "path has no file name".to_owned())?;
    let up = client
        .upload_material(assignment, kind.as_str(), name, bytes)
        .await
        .map_err(|e| e.to_string())?;
    Ok(up.chunks_created)
}

async fn replay(paths: &[PathBuf]) -> ExitCode {
    let mut all_passed = true;
    for path in paths {
        match leaftutor_cli::replay_file(path).await {
            Ok(report) => {
                print!("{report}");
                all_passed &= report.passed();
            }
            Err(leaftutor_cli::ReplayError::Invalid(e)) => return usage(format!("{}: {e}", path.display())),
            Err(e) => return fail(e),
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
