//! `psdxc`: slack matrices, PSD factorizations, rescaling, grid rounding
//! and reconstruction from the command line.
//!
//! Exit codes: 0 success, 1 verdict failure, 2 precondition error,
//! 3 numeric error.

mod commands;
mod manifest;
mod table;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use manifest::{manifest_path, sha256_hex, RunManifest};
use psdxc::ErrorClass;
use table::Table;

#[derive(Parser, Debug)]
#[command(name = "psdxc", version, about = "PSD factorizations of slack matrices: rescaling, rounding, reconstruction")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Output file; the manifest goes to `<out>.manifest.json`. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format. Defaults to csv for `.csv` outputs, json otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Tolerance of the command's main check (verification, rescale target, budget).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Slack matrices of polytopes.
    #[command(subcommand)]
    Slack(SlackCmd),
    /// PSD factorizations.
    #[command(subcommand)]
    Fact(FactCmd),
    /// Operator-norm rescaling.
    #[command(subcommand)]
    Rescale(RescaleCmd),
    /// Grid rounding of a factorization.
    #[command(subcommand)]
    Round(RoundCmd),
    /// Membership tests for every point of {0,1}^n against a rounded system.
    Reconstruct(ReconstructArgs),
    /// Numerical checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Bound calculators.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Slack, factorization, rescaling, rounding and reconstruction in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PolytopeSource {
    /// Built-in instance.
    #[arg(long, value_parser = commands::parse_instance, conflicts_with = "polytope")]
    pub instance: Option<psdxc::polytope::Instance>,
    /// Dimension (or `d` for moment_polygon).
    #[arg(long)]
    pub n: Option<usize>,
    /// Polytope file `{"n", "rows": [{"a", "b"}], "points"}`; missing points are enumerated.
    #[arg(long)]
    pub polytope: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SlackCmd {
    /// Builds the slack matrix of a polytope.
    Build(PolytopeSource),
}

#[derive(Subcommand, Debug)]
pub enum FactCmd {
    /// Checks `<Uᵢ,Vʲ> = Sᵢⱼ` within `tol·(1+Δ)`.
    Verify {
        #[arg(long)]
        slack: PathBuf,
        #[arg(long)]
        fact: PathBuf,
    },
    /// Searches for a factorization of side `r`.
    Fit {
        #[arg(long)]
        slack: PathBuf,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        max_outer: Option<usize>,
    },
    /// The diagonal factorization of side `min(rows, cols)`.
    Embed {
        #[arg(long)]
        slack: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum RescaleCmd {
    /// Rescales a factorization towards `lmax ≤ √(dΔ)` on both sides.
    Run {
        #[arg(long)]
        slack: PathBuf,
        #[arg(long)]
        fact: PathBuf,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        /// Also write the per-iteration trace (Φ, lmax_U, lmax_V) as CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum RoundCmd {
    /// Rounds the row factors of a subsystem onto the grid.
    Run {
        /// Slack file carrying its polytope.
        #[arg(long)]
        slack: PathBuf,
        /// Factorization file, or a rescale result.
        #[arg(long)]
        fact: PathBuf,
        /// `max`, `max/<k>` or a number.
        #[arg(long, default_value = "max")]
        delta: String,
        /// Use `(n+1)^{(n+1)/2}` as Δ instead of the largest slack.
        #[arg(long)]
        worst_case: bool,
    },
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Rounded system from `round run`.
    #[arg(long)]
    pub system: PathBuf,
    /// Expected dimension; checked against the system.
    #[arg(long)]
    pub n: Option<usize>,
    /// Slack file whose points are compared with the accepted set.
    #[arg(long)]
    pub slack: Option<PathBuf>,
    /// Same as `--out`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Random restarts per point.
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum CheckCmd {
    /// Finite-difference checks of the one-sided derivatives of the operator norm.
    Derivatives {
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 0.1)]
        min_gap: f64,
        #[arg(long, default_value_t = 6)]
        max_side: usize,
        /// Same as `--out`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BoundsCmd {
    /// Evaluates one formula; logarithms are base 2.
    Eval {
        #[arg(long, value_enum)]
        formula: Formula,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        d: Option<u32>,
        /// Side `R` for `counting`.
        #[arg(long = "R")]
        big_r: Option<f64>,
        /// Side `r` for `grid`.
        #[arg(long)]
        r: Option<usize>,
        /// Box size `N` for `lemma_delta`.
        #[arg(long = "N")]
        big_n: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Formula {
    Xc01,
    Counting,
    Polygon,
    PolygonParams,
    LemmaDelta,
    WorstCase,
    Grid,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub source: PolytopeSource,
    /// Fit a factorization of this side instead of the diagonal one.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub skip_rescale: bool,
    /// Start from the diagonal factorization pushed through an ill-conditioned congruence.
    #[arg(long, conflicts_with = "r")]
    pub unbalanced: bool,
    #[arg(long)]
    pub worst_case: bool,
    /// δ is the largest admissible value divided by this.
    #[arg(long, default_value_t = 1.0)]
    pub delta_divisor: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Core(psdxc::Error),
    /// Unreadable or malformed input, bad flags.
    Input(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) => match e.class() {
                ErrorClass::Precondition => 2,
                ErrorClass::Numeric => 3,
            },
            Failure::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Input(msg) => f.write_str(msg),
        }
    }
}

impl From<psdxc::Error> for Failure {
    fn from(e: psdxc::Error) -> Self {
        Failure::Core(e)
    }
}

/// What a command produced.
pub struct Report {
    pub json: serde_json::Value,
    pub csv: Table,
    /// False for verdict failures (exit code 1).
    pub success: bool,
    /// One-line summary for stderr.
    pub summary: String,
    pub stage_ms: Vec<(String, f64)>,
    /// Extra files to write next to the main output.
    pub side_files: Vec<(PathBuf, String)>,
}

impl Report {
    pub fn new(json: serde_json::Value, csv: Table, success: bool, summary: impl Into<String>) -> Self {
        Self {
            json,
            csv,
            success,
            summary: summary.into(),
            stage_ms: Vec::new(),
            side_files: Vec::new(),
        }
    }
}

/// Shared state: hashes every file read.
pub struct Ctx {
    pub seed: u64,
    pub tol: Option<f64>,
    pub inputs: BTreeMap<String, String>,
}

impl Ctx {
    pub fn read_json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        serde_json::from_slice(&bytes).map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut manifest = RunManifest::new(cli.seed);
    let mut ctx = Ctx {
        seed: cli.seed,
        tol: cli.tol,
        inputs: BTreeMap::new(),
    };
    let out = match &cli.command {
        Command::Reconstruct(a) => a.report.clone().or(cli.out.clone()),
        Command::Check(CheckCmd::Derivatives { report, .. }) => report.clone().or(cli.out.clone()),
        _ => cli.out.clone(),
    };
    let format = cli.format.unwrap_or(match out.as_deref().and_then(Path::extension) {
        Some(ext) if ext == "csv" => Format::Csv,
        _ => Format::Json,
    });

    let result = commands::run(&cli.command, &mut ctx).and_then(|report| {
        let body = match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&report.json)
                    .map_err(|e| Failure::Input(format!("cannot serialize output: {e}")))?;
                s.push('\n');
                s
            }
            Format::Csv => report
                .csv
                .render()
                .map_err(|e| Failure::Input(format!("cannot render csv: {e}")))?,
        };
        match &out {
            Some(path) => write_file(path, &body)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(body.as_bytes())
                    .map_err(|e| Failure::Input(format!("cannot write output: {e}")))?;
            }
        }
        for (path, contents) in &report.side_files {
            write_file(path, contents)?;
        }
        manifest.output_sha256 = Some(sha256_hex(body.as_bytes()));
        Ok(report)
    });

    let code = match &result {
        Ok(report) => {
            eprintln!("{}", report.summary);
            i32::from(!report.success)
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    if let Ok(report) = result {
        manifest.stage_ms = report.stage_ms;
    }
    manifest.inputs = ctx.inputs;
    manifest.exit_code = code;
    manifest.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match &out {
        Some(path) => {
            if let Err(e) = fs::write(manifest_path(path), text + "\n") {
                eprintln!("error: cannot write manifest: {e}");
            }
        }
        None => eprintln!("{}", serde_json::to_string(&manifest).expect("manifest serializes")),
    }
    ExitCode::from(code as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(Failure::Core(psdxc::Error::Numeric("x".into())).exit_code(), 3);
        assert_eq!(Failure::Core(psdxc::Error::Invalid("x".into())).exit_code(), 2);
        assert_eq!(Failure::Input("x".into()).exit_code(), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
