//! Argument parsing, dispatch and result files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::commands::{
    cmd_gexp, cmd_oracle, cmd_rho, cmd_solve, cmd_stability, cmd_tcsearch, Outcome, Settings,
};
use crate::error::{CliError, ExitStatus};
use crate::instance::InstanceFile;
use crate::num::parse_number;

pub const RESULT_FORMAT: &str = "mmse-result/1";

#[derive(Debug, Parser)]
#[command(
    name = "mmse",
    version,
    about = "Minimum mean square estimation under sublinear expectations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the estimator and check its certificates.
    Solve(CommonArgs),
    /// Evaluate the sublinear expectation and its conditional envelopes.
    Rho(CommonArgs),
    /// Cross-check the solver against the grid-search oracle.
    Oracle(CommonArgs),
    /// Check stability of the measure set and recursivity of the envelope.
    Stability(CommonArgs),
    /// Search random instances for a time-consistency failure.
    Tcsearch(CommonArgs),
    /// g-expectation on a scenario tree against the estimator.
    Gexp(CommonArgs),
}

fn number(s: &str) -> Result<f64, String> {
    parse_number(s)
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Instance file (optional for tcsearch).
    pub instance: Option<PathBuf>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = number)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long = "grid-step", value_parser = number)]
    pub grid_step: Option<f64>,
    /// Conditioning level within a filtration or tree.
    #[arg(long)]
    pub level: Option<usize>,
    /// tcsearch: largest number of generators per random instance.
    #[arg(long = "max-generators")]
    pub max_generators: Option<usize>,
    /// tcsearch: write the counterexample instance here.
    #[arg(long)]
    pub counterexample: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> Settings {
        Settings {
            tol: self.tol,
            seed: self.seed,
            trials: self.trials,
            grid_step: self.grid_step,
            level: self.level,
            max_generators: self.max_generators,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultFile {
    pub format: &'static str,
    pub command: String,
    pub instance_digest: Option<String>,
    pub library_version: &'static str,
    pub exit_code: i32,
    pub payload: Value,
    pub wall_time_seconds: f64,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load(path: Option<&Path>) -> Result<InstanceFile, CliError> {
    let path =
        path.ok_or_else(|| CliError::Validation("instance: file argument required".into()))?;
    InstanceFile::parse(&read(path)?)
}

fn execute(name: &str, args: &CommonArgs) -> Result<(Outcome, Option<String>), CliError> {
    if name == "tcsearch" {
        let mut settings = args.settings();
        let mut digest = None;
        if let Some(path) = &args.instance {
            let file = load(Some(path))?;
            digest = Some(file.digest()?);
            settings = settings.merged(&file.options);
        }
        let search = cmd_tcsearch(&settings)?;
        if let (Some(path), Some(file)) = (&args.counterexample, &search.counterexample) {
            write(path, &(file.to_json() + "\n"))?;
        }
        return Ok((search.outcome, digest));
    }
    let file = load(args.instance.as_deref())?;
    let model = file.validate()?;
    let settings = args.settings().merged(&file.options);
    let outcome = match name {
        "solve" => cmd_solve(&model, &settings)?,
        "rho" => cmd_rho(&model, &settings)?,
        "oracle" => cmd_oracle(&model, &settings)?,
        "stability" => cmd_stability(&model, &settings)?,
        "gexp" => cmd_gexp(&model, &settings)?,
        other => unreachable!("unknown command {other}"),
    };
    Ok((outcome, Some(file.digest()?)))
}

/// Runs one command, writes the result, and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Rho(a) => ("rho", a),
        Command::Oracle(a) => ("oracle", a),
        Command::Stability(a) => ("stability", a),
        Command::Tcsearch(a) => ("tcsearch", a),
        Command::Gexp(a) => ("gexp", a),
    };
    let start = Instant::now();
    let (outcome, digest) = match execute(name, args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.status().code();
        }
    };
    let result = ResultFile {
        format: RESULT_FORMAT,
        command: name.into(),
        instance_digest: digest,
        library_version: env!("CARGO_PKG_VERSION"),
        exit_code: outcome.status.code(),
        payload: outcome.payload,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&result).expect("result serializes") + "\n";
    match &args.out {
        Some(path) => {
            if let Err(e) = write(path, &text) {
                eprintln!("error: {e}");
                return ExitStatus::Validation.code();
            }
        }
        None => print!("{text}"),
    }
    if outcome.status != ExitStatus::Success {
        eprintln!("{name}: exit status {:?}", outcome.status);
    }
    outcome.status.code()
}
