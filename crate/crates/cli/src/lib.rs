//! Command-line front end for the `qdot` kernel, its verification harness
//! and the solver experiments.

pub mod commands;
pub mod config;
pub mod io;
pub mod parse;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] qdot_core::QdotError),
    #[error("{0} bound violation(s)")]
    Violations(usize),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(qdot_core::QdotError::InvalidParameter(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Violations(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qdot",
    version,
    about = "Error-bounded mixed-precision dot products"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Dot,
    Verify,
    Bench,
    Cg,
    Power,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate one dot product (vectors from files or generated).
    Dot(Opts),
    /// Run randomized trials and fail if any error bound is violated.
    Verify(Opts),
    /// Sweep tolerances and report effectiveness, speedup and efficiency.
    Bench(Opts),
    /// Conjugate gradient on a 27-point stencil problem.
    Cg(Opts),
    /// Power iteration on a random graph Laplacian.
    Power(Opts),
}

impl Command {
    pub fn split(&self) -> (CommandKind, &Opts) {
        match self {
            Command::Dot(o) => (CommandKind::Dot, o),
            Command::Verify(o) => (CommandKind::Verify, o),
            Command::Bench(o) => (CommandKind::Bench, o),
            Command::Cg(o) => (CommandKind::Cg, o),
            Command::Power(o) => (CommandKind::Power, o),
        }
    }
}

/// Options shared by every subcommand. Each one can also be given in the
/// `--config` file under the same name; flags win over the file.
#[derive(Debug, Args, Default)]
pub struct Opts {
    /// `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tolerance, e.g. `1e-8` or `2^-34`.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Tolerance scan `start:stop:xF`.
    #[arg(long)]
    pub epsilon_scan: Option<String>,
    /// `none` or `per-bin`.
    #[arg(long)]
    pub split: Option<String>,
    /// `exact`, `ranged:W` or `split:S`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Worker threads (also `QDOT_THREADS`).
    #[arg(long)]
    pub threads: Option<String>,
    /// Record wall-clock timings (output is then no longer reproducible).
    #[arg(long)]
    pub timings: bool,
    #[arg(long, short)]
    pub output: Option<String>,
    /// Per-cell summary CSV (bench).
    #[arg(long)]
    pub summary: Option<String>,
    /// First vector file (dot).
    #[arg(long)]
    pub x: Option<String>,
    /// Second vector file (dot).
    #[arg(long)]
    pub y: Option<String>,
    /// Distribution families, `A` and/or `B`.
    #[arg(long)]
    pub family: Option<String>,
    /// Distribution parameters, comma separated.
    #[arg(long)]
    pub t: Option<String>,
    /// Vector lengths (graph size for `power`), comma separated.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    /// `same` and/or `independent`.
    #[arg(long)]
    pub pairing: Option<String>,
    #[arg(long)]
    pub nx: Option<String>,
    #[arg(long)]
    pub ny: Option<String>,
    #[arg(long)]
    pub nz: Option<String>,
    /// Solver tolerance.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    /// Edge probability of the random graph (power).
    #[arg(long)]
    pub edge_prob: Option<String>,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let fields: [(&'static str, &Option<String>); 21] = [
            ("epsilon", &self.epsilon),
            ("epsilon_scan", &self.epsilon_scan),
            ("split", &self.split),
            ("strategy", &self.strategy),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("output", &self.output),
            ("summary", &self.summary),
            ("x", &self.x),
            ("y", &self.y),
            ("family", &self.family),
            ("t", &self.t),
            ("n", &self.n),
            ("trials", &self.trials),
            ("pairing", &self.pairing),
            ("nx", &self.nx),
            ("ny", &self.ny),
            ("nz", &self.nz),
            ("tau", &self.tau),
            ("max_iters", &self.max_iters),
            ("edge_prob", &self.edge_prob),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    /// Defaults, then the config file, then `QDOT_THREADS`, then flags.
    pub fn resolve(&self, env_threads: Option<&str>) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(t) = env_threads {
            cfg.set("threads", t)?;
        }
        for (k, v) in self.pairs() {
            cfg.set(k, v)?;
        }
        if self.timings {
            cfg.timings = true;
        }
        Ok(cfg)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 2;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    let (kind, opts) = cli.command.split();
    let env_threads = std::env::var("QDOT_THREADS").ok();
    let result = opts
        .resolve(env_threads.as_deref())
        .and_then(|cfg| commands::dispatch(kind, &cfg, stdout, stderr));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
