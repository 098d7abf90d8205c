//! Command-line front end for the contact weak-KAM toolkit.
//!
//! `execute` parses argv, runs one command, writes its files and a manifest
//! into the output directory, prints a one-line summary and returns the exit
//! code: 0 success, 1 usage, 2 config or parse, 3 numerical failure,
//! 4 violated precondition.

pub mod commands;
pub mod config;
pub mod suite;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kam::asymptotic::AsymError;
use kam::variational::Direction;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Failure {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Precondition(_) => 4,
        }
    }
}

impl From<AsymError> for Failure {
    fn from(e: AsymError) -> Self {
        match e {
            AsymError::Ordering { .. } | AsymError::NotSmooth { .. } => Failure::Precondition(e.to_string()),
            AsymError::Request(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<kam::variational::VarError> for Failure {
    fn from(e: kam::variational::VarError) -> Self {
        Failure::from(AsymError::from(e))
    }
}

impl From<kam::flow::FlowError> for Failure {
    fn from(e: kam::flow::FlowError) -> Self {
        Failure::from(AsymError::from(e))
    }
}

impl From<kam::model::DomainError> for Failure {
    fn from(e: kam::model::DomainError) -> Self {
        Failure::Numerical(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "contact-kam", version, about = "Weak KAM computations for contact Hamiltonians on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the model (and --phi) and report Lambda and warnings
    ParseCheck(Flags),
    /// Evolve --phi by the semigroup for time --t
    Evolve(Flags),
    /// Iterate the semigroup on --phi until it settles
    Solve(Flags),
    /// Action table seeded at (--x0, --u0) over --horizon
    Action(Flags),
    /// Characteristic through --x0 at time --t, or the semi-infinite orbit
    Orbit(Flags),
    /// Fixed points of the contact flow with their linearization
    FixedPoints(Flags),
    /// Trace unstable (forward) or stable (backward) manifolds
    Manifold(Flags),
    /// Connecting orbit between the slices of u_- and v_+
    Connect(Flags),
    /// Classify the orbit through (--x0, --u0)
    Classify(Flags),
    /// Run the randomized property suite
    Verify(Flags),
    /// Full model-problem pipeline with figure data
    #[command(name = "reproduce-ex63")]
    ReproduceEx63(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::ParseCheck(f) => ("parse-check", f),
            Command::Evolve(f) => ("evolve", f),
            Command::Solve(f) => ("solve", f),
            Command::Action(f) => ("action", f),
            Command::Orbit(f) => ("orbit", f),
            Command::FixedPoints(f) => ("fixed-points", f),
            Command::Manifold(f) => ("manifold", f),
            Command::Connect(f) => ("connect", f),
            Command::Classify(f) => ("classify", f),
            Command::Verify(f) => ("verify", f),
            Command::ReproduceEx63(f) => ("reproduce-ex63", f),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirArg {
    Backward,
    Forward,
}

impl From<DirArg> for Direction {
    fn from(d: DirArg) -> Self {
        match d {
            DirArg::Backward => Direction::Backward,
            DirArg::Forward => Direction::Forward,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Flags {
    #[arg(long)]
    pub config: PathBuf,
    /// expression in x, or @path to a field CSV
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    #[arg(long, value_enum)]
    pub direction: Option<DirArg>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    /// output directory; overrides the config's "out"
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// also write an SVG of the (x, u) projection
    #[arg(long)]
    #[serde(skip)]
    pub svg: bool,
}

#[derive(Serialize)]
struct FileRecord {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct ConfigRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Effective {
    n: usize,
    tau: f64,
    v_max: f64,
    m: usize,
    u_clip: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: ConfigRecord,
    inputs: &'a Flags,
    effective: Effective,
    notices: &'a [String],
    files: &'a [FileRecord],
    exit_code: i32,
    summary: &'a str,
}

/// Per-invocation state: the loaded config, the flags and the files written.
pub struct Context {
    pub command: &'static str,
    pub flags: Flags,
    pub cfg: RunConfig,
    pub out: PathBuf,
    files: Vec<FileRecord>,
}

impl Context {
    pub fn new(command: &'static str, flags: &Flags) -> Result<Context, Failure> {
        let cfg = RunConfig::load(&flags.config)?;
        let out = flags
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        for t in [flags.t, flags.horizon] {
            if let Some(v) = t {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Failure::Usage(format!("time arguments must be positive, got {v}")));
                }
            }
        }
        for v in [flags.x0, flags.u0].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Failure::Usage(format!("coordinates must be finite, got {v}")));
            }
        }
        Ok(Context {
            command,
            flags: flags.clone(),
            cfg,
            out,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Config(format!("output directory {}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        std::fs::write(&path, content).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_string(),
            bytes: content.len(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
        });
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        self.flags.direction.unwrap_or(DirArg::Backward).into()
    }

    /// `--phi`, then the config's "phi", then the zero field.
    pub fn phi_source(&self) -> String {
        self.flags
            .phi
            .clone()
            .or_else(|| self.cfg.phi.clone())
            .unwrap_or_else(|| "0".to_string())
    }

    pub fn require(&self, v: Option<f64>, flag: &str) -> Result<f64, Failure> {
        v.ok_or_else(|| Failure::Usage(format!("{} needs --{flag}", self.command)))
    }

    fn finish(&mut self, code: i32, summary: &str) -> Result<(), Failure> {
        let params = self.cfg.params();
        let manifest = Manifest {
            command: self.command,
            config: ConfigRecord {
                path: self.flags.config.display().to_string(),
                sha256: self.cfg.sha256.clone(),
            },
            inputs: &self.flags,
            effective: Effective {
                n: self.cfg.grid.n(),
                tau: params.tau,
                v_max: params.v_max,
                m: params.m,
                u_clip: params.u_clip,
                lambda: self.cfg.model.lambda_bound(),
            },
            notices: &self.cfg.notices,
            files: &self.files,
            exit_code: code,
            summary,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.out.join(format!("{}.manifest.json", self.command));
        std::fs::create_dir_all(&self.out)
            .and_then(|_| std::fs::write(&path, text))
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

/// Runs one command line and returns the process exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let (name, flags) = cli.command.parts();
    let mut ctx = match Context::new(name, flags) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {f}");
            return f.code();
        }
    };
    for n in &ctx.cfg.notices {
        eprintln!("{n}");
    }
    let result = commands::dispatch(&mut ctx, &cli.command);
    let (code, summary) = match result {
        Ok(s) => (0, s),
        Err(f) => (f.code(), format!("{name}: {f}")),
    };
    if code == 1 {
        eprintln!("error: {summary}");
        return code;
    }
    if let Err(f) = ctx.finish(code, &summary) {
        eprintln!("error: {f}");
        return f.code();
    }
    println!("{summary}");
    code
}
