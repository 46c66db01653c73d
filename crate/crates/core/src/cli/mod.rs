//! `gpd` command-line interface.
//!
//! Every command resolves its configuration (file, then flags), prints it as
//! TOML, writes outputs under `--out` together with `config.toml` and a
//! `run.json` listing the files produced, and reports failures as one JSON
//! object on stderr.

mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{default_primitives, resolve_mesh, GraspList};
pub use config::RunConfig;

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "gpd", version, about = "Grasp pose detection in point clouds")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run directory for all outputs.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render stereo point clouds of meshes.
    Render {
        /// Mesh file (.obj, .ply) or primitive such as `box:0.04,0.06,0.12`,
        /// `cylinder:0.03,0.12`, `sphere:0.035`. Repeatable.
        #[arg(long = "mesh", required = true)]
        meshes: Vec<String>,
        /// Angle between the two sensors, degrees.
        #[arg(long)]
        angle: Option<f64>,
        #[arg(long)]
        distance: Option<f64>,
        #[arg(long)]
        azimuth: Option<f64>,
    },
    /// Build a labeled, encoded dataset from meshes.
    Dataset {
        /// Meshes or primitives; defaults to the bundled boxes, cylinders and spheres.
        #[arg(long = "mesh")]
        meshes: Vec<String>,
        #[arg(long)]
        candidates: Option<usize>,
    },
    /// Train the classifier on a dataset directory.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Initialize from an existing model file.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Evaluate a model on the test side of a split.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Split file written by `train`; recomputed from the config if absent.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Detect grasps in a point cloud (PLY with viewpoint sidecar).
    Detect {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Evaluation report whose curve sets the operating threshold.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pick one grasp from a detection result.
    Select {
        #[arg(long)]
        grasps: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Render { .. } => "render",
            Command::Dataset { .. } => "dataset",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Detect { .. } => "detect",
            Command::Select { .. } => "select",
        }
    }
}

/// Exit code for input files that do not exist.
pub const EXIT_MISSING_INPUT: i32 = 2;
pub const EXIT_FAILURE: i32 = 1;

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    command: &'a str,
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "missing_input",
        Error::Io { .. } => "io",
        Error::Parse { .. } | Error::UnsupportedFormat(_) => "parse",
        Error::Config(_) => "config",
        Error::ModelFormat { .. } | Error::ShapeMismatch(_) => "model",
        Error::InvalidArgument(_) => "invalid_argument",
        _ => "stage",
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let name = cli.command.name();
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let kind = error_kind(&e);
            let report = ErrorReport {
                error: ErrorBody {
                    command: name,
                    kind,
                    message: e.to_string(),
                    path: e.path().map(|p| p.display().to_string()),
                },
            };
            eprintln!("{}", serde_json::to_string(&report).expect("error serializes"));
            if kind == "missing_input" {
                EXIT_MISSING_INPUT
            } else {
                EXIT_FAILURE
            }
        }
    }
}

/// Fails with a not-found I/O error naming `path` when it does not exist.
fn require(path: &Path) -> crate::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}
