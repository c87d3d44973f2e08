use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use arena_core::arena::config::ReleasedPrompt;
use arena_core::arena::event::read_log;
use arena_core::arena::{ArenaConfig, ArenaService, ArenaState, FileStore, LogError, SystemClock, VoteEvent};
use arena_core::leaderboard::{self, LeaderboardRow};
use arena_core::sim::{run_seeds, summarize, ExperimentConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config;
use crate::error::CliError;
use crate::http::{self, AppState, Artifacts};

#[derive(Debug, Parser)]
#[command(name = "arena", version, about = "Blinded pairwise arena for ranking generated sites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a commented configuration skeleton.
    Init {
        /// Destination file; standard out when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Rebuild the arena state from a vote log and print its leaderboard.
    Replay {
        #[command(flatten)]
        input: LogInput,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Also write the canonical state snapshot here.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Export leaderboard rows.
    Leaderboard {
        #[command(flatten)]
        input: LogInput,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run rank-recovery experiments against synthetic raters.
    Simulate {
        /// Experiment JSON; deployed-scale defaults when omitted.
        #[arg(long)]
        experiment: Option<PathBuf>,
        /// Number of seeds, run as `seed, seed + 1, ...`.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, env = "ARENA_SEED", default_value_t = 1)]
        seed: u64,
        /// Report directory.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Re-emit the prompt catalog in the released field schema.
    ExportPrompts {
        #[arg(long, env = "ARENA_CONFIG")]
        config: PathBuf,
        /// Destination file; standard out when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct LogInput {
    #[arg(long, env = "ARENA_CONFIG")]
    pub config: PathBuf,
    #[arg(long, env = "ARENA_LOG_PATH")]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "ARENA_CONFIG")]
    pub config: PathBuf,
    /// Vote log; created when missing. Profiles go to `<log>.experts.jsonl`.
    #[arg(long, env = "ARENA_LOG_PATH")]
    pub log: PathBuf,
    #[arg(long, env = "ARENA_BIND_ADDR", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Overrides the config's seed.
    #[arg(long, env = "ARENA_SEED")]
    pub seed: Option<u64>,
    /// Base directory for relative artifact bundles; defaults to the config's directory.
    #[arg(long)]
    pub artifact_root: Option<PathBuf>,
    /// Refuse to fetch http(s) artifacts.
    #[arg(long)]
    pub no_proxy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Table,
    Json,
}

/// Parse `argv` and execute. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version are not errors
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Init { out, force } => init(out.as_deref(), force),
        Command::Serve(args) => serve(args),
        Command::Replay { input, format, state } => {
            let (config, state_now) = replay(&input)?;
            if let Some(path) = state {
                write_file(&path, &state_now.canonical_json())?;
            }
            emit(&render(&rows(&config, &state_now)?, format))
        }
        Command::Leaderboard { input, format } => {
            let (config, state) = replay(&input)?;
            emit(&render(&rows(&config, &state)?, format))
        }
        Command::Simulate {
            experiment,
            seeds,
            seed,
            out,
        } => simulate(experiment.as_deref(), seeds, seed, &out),
        Command::ExportPrompts { config, out } => {
            let config = config::load(&config)?;
            let prompts: Vec<ReleasedPrompt> = config.prompts.iter().map(ReleasedPrompt::from).collect();
            let text = pretty(&prompts);
            match out {
                Some(path) => write_file(&path, &text),
                None => emit(&text),
            }
        }
    }
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::Io(format!("standard output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn init(out: Option<&Path>, force: bool) -> Result<(), CliError> {
    let text = config::skeleton();
    match out {
        None => emit(&text),
        Some(path) => {
            if path.exists() && !force {
                return Err(CliError::Validation(format!(
                    "{} exists; pass --force to overwrite",
                    path.display()
                )));
            }
            write_file(path, &text)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// Unlike `serve`, the offline commands insist that the log exists: a typo
/// should not quietly print the priors.
fn read_events(path: &Path) -> Result<Vec<VoteEvent>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_log(file).map_err(|e| match e {
        LogError::Io(err) => CliError::io(path, err),
        corrupt => CliError::Validation(format!("{}: {corrupt}", path.display())),
    })
}

fn replay(input: &LogInput) -> Result<(ArenaConfig, ArenaState), CliError> {
    let config = config::load(&input.config)?;
    let events = read_events(&input.log)?;
    let state = ArenaState::replay(&config, &events)?;
    Ok((config, state))
}

fn rows(config: &ArenaConfig, state: &ArenaState) -> Result<Vec<LeaderboardRow>, CliError> {
    state
        .table
        .leaderboard(config.ci_level, config.sigma_policy)
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn render(rows: &[LeaderboardRow], format: Format) -> String {
    match format {
        Format::Csv => leaderboard::to_csv(rows),
        Format::Table => leaderboard::to_table(rows),
        Format::Json => pretty(&rows),
    }
}

fn simulate(experiment: Option<&Path>, n: u64, first: u64, out: &Path) -> Result<(), CliError> {
    let config = match experiment {
        Some(path) => serde_json::from_str::<ExperimentConfig>(&config::read_text(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    if n == 0 {
        return Err(CliError::Validation("--seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (first..first.saturating_add(n)).collect();
    eprintln!("running {} experiment(s)", seeds.len());
    let reports = run_seeds(&config, &seeds)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for report in &reports {
        write_file(&out.join(format!("seed-{}.json", report.seed)), &pretty(report))?;
    }
    let summary = summarize(&reports);
    write_file(&out.join("summary.json"), &pretty(&summary))?;
    emit(&format!(
        "seeds {}  mean_kendall_tau {:.4}  min_kendall_tau {:.4}  mean_spearman_rho {:.4}  top1 {}/{}  ci_coverage {:.3}\n",
        reports.len(),
        summary.mean_kendall_tau,
        summary.min_kendall_tau,
        summary.mean_spearman_rho,
        summary.top1_correct,
        reports.len(),
        summary.mean_calibrated_ci_coverage
    ))
}

/// Restore the service from disk. A missing log is a fresh arena.
pub fn open_service(config: ArenaConfig, log: &Path) -> Result<ArenaService, CliError> {
    let events = if log.exists() { read_events(log)? } else { Vec::new() };
    let profiles = FileStore::read_profiles(log).map_err(|e| CliError::io(log, e))?;
    let store = FileStore::open(log).map_err(|e| CliError::io(log, e))?;
    Ok(ArenaService::restore(
        config,
        events,
        profiles,
        Box::new(store),
        Box::new(SystemClock),
    )?)
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut config = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let service = open_service(config, &args.log)?;
    let votes = service.log().len();
    let root = args.artifact_root.clone().unwrap_or_else(|| {
        args.config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let artifacts = Artifacts {
        root,
        client: (!args.no_proxy).then(http::artifact_client),
    };
    // persisting an admin replacement only makes sense when the seed is the file's own
    let config_path = args.seed.is_none().then(|| args.config.clone());
    let state = AppState::new(service, artifacts, config_path);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(format!("starting runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .map_err(|e| CliError::Io(format!("binding {}: {e}", args.bind)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        // tests and scripts read the bound address from this line
        eprintln!("listening on http://{addr} ({votes} votes restored)");
        axum::serve(listener, http::app(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down");
            })
            .await
            .map_err(|e| CliError::Io(format!("server: {e}")))
    })
}
