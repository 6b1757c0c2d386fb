//! Commands behind the `forge` binary.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use forge_core::catalog::{self, CatalogEntry};
use forge_core::embedding::{antipodal_defect, embed, verify_center_set, CenterSet};
use forge_core::geometry::{build_config, SphereConfig};
use forge_core::io::{points_csv, to_json, write_jsonl};
use forge_core::layering::{check_antipodal_structure, enumerate_layerings, validate_layering, Layering};
use forge_core::measure::{all_pass, verify_uniformity, MeasureKind, MeasureReport, VerifyOptions};
use forge_core::spectral::{spectral_report, SpectralOptions, SpectralReport};
use forge_core::Error;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_VERIFY_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_PIPELINE_SAMPLES: u64 = 100_000;
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Layerings, spherical embeddings and 3-uniform cones")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo samples per estimate [default: 1000000 for verify, 100000 for pipeline].
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Tolerance on the smallest eigenvalue of Δ [default: 1e-9·m].
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write output here instead of stdout.
    #[arg(short = 'o', long = "output", global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stream every normalized layering of K_m as JSONL.
    Enumerate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        limit: Option<usize>,
        /// Keep only layerings whose last colour class pairs antipodes.
        #[arg(long)]
        antipodal_filter: bool,
    },
    /// Validate a distance matrix as a layering.
    CheckLayering { input: PathBuf },
    /// Graph spectrum and embeddability of a layering.
    Spectral { input: PathBuf },
    /// Center points of an embeddable layering.
    Embed {
        input: PathBuf,
        /// Export points as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Lift a center set to a sphere configuration.
    BuildCone { input: PathBuf },
    /// Check σ- and ν-uniformity of a cone by quadrature and Monte Carlo.
    Verify {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Named examples.
    Catalog {
        #[command(subcommand)]
        entry: CatalogCommand,
    },
    /// Enumerate, screen, embed, build and verify every layering of K_m.
    Pipeline {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CatalogCommand {
    Kp,
    Ck {
        #[arg(long)]
        k: u32,
    },
    Tetra8,
    Rect4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Failed = 1,
    Input = 2,
    Numeric = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Input,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) | Error::Geometry(_) | Error::DegenerateProjection => ExitCode::Numeric,
            _ => ExitCode::Input,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(format!("malformed JSON: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Wrapped { d: Vec<Vec<i64>> },
    Bare(Vec<Vec<i64>>),
}

impl MatrixInput {
    fn rows(self) -> Vec<Vec<i64>> {
        match self {
            MatrixInput::Wrapped { d } | MatrixInput::Bare(d) => d,
        }
    }
}

fn read_layering(path: &Path) -> CliResult<Layering> {
    let rows = read_json::<MatrixInput>(path)?.rows();
    let report = validate_layering(&rows)?;
    if !report.valid {
        return Err(CliError::input(format!(
            "{} is not a layering ({} violations, first: {})",
            path.display(),
            report.violations.len(),
            report.violations[0].rule
        )));
    }
    Ok(Layering::from_rows(&rows)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConeInput {
    Entry(CatalogEntry),
    Config(SphereConfig),
}

fn read_cone(path: &Path) -> CliResult<SphereConfig> {
    let config = match read_json::<ConeInput>(path)? {
        ConeInput::Entry(e) => e.config,
        ConeInput::Config(c) => c,
    };
    Ok(SphereConfig::new(config.d, config.r, config.centers)?)
}

fn spectral_options(global: &Global) -> CliResult<SpectralOptions> {
    match global.tol {
        Some(t) if t.is_nan() || t < 0.0 => Err(CliError::input(format!("--tol must be non-negative, got {t}"))),
        Some(t) => Ok(SpectralOptions::with_psd_tolerance(t)),
        None => Ok(SpectralOptions::default()),
    }
}

/// Output of one command: bytes to write and the exit status.
pub struct Outcome {
    pub body: Vec<u8>,
    pub code: ExitCode,
}

impl Outcome {
    fn ok(body: impl Into<Vec<u8>>) -> Self {
        Outcome {
            body: body.into(),
            code: ExitCode::Ok,
        }
    }

    fn judged(body: impl Into<Vec<u8>>, pass: bool) -> Self {
        Outcome {
            body: body.into(),
            code: if pass { ExitCode::Ok } else { ExitCode::Failed },
        }
    }
}

fn json_line<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut s = to_json(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Enumerate {
            m,
            limit,
            antipodal_filter,
        } => {
            let mut buf = Vec::new();
            let iter = enumerate_layerings(*m, *limit)?
                .filter(|l| !antipodal_filter || check_antipodal_structure(l).holds);
            write_jsonl(&mut buf, iter)?;
            Ok(Outcome::ok(buf))
        }
        Command::CheckLayering { input } => {
            let rows = read_json::<MatrixInput>(input)?.rows();
            let report = validate_layering(&rows)?;
            let body = if g.json {
                json_line(&report)?
            } else {
                let mut s = format!("valid: {}\n", report.valid);
                for v in &report.violations {
                    s.push_str(&format!("  {} at {:?}\n", v.rule, v.indices));
                }
                s.into_bytes()
            };
            Ok(Outcome::judged(body, report.valid))
        }
        Command::Spectral { input } => {
            let layering = read_layering(input)?;
            let report = spectral_report(&layering, &spectral_options(g)?)?;
            let body = if g.json { json_line(&report)? } else { spectral_text(&report).into_bytes() };
            Ok(Outcome::judged(body, report.embeddable))
        }
        Command::Embed { input, csv } => {
            let layering = read_layering(input)?;
            let report = spectral_report(&layering, &spectral_options(g)?)?;
            if !report.embeddable {
                return Ok(Outcome::judged(
                    format!("not embeddable: gap {} < threshold {}\n", report.gap, report.threshold),
                    false,
                ));
            }
            let centers = embed(&layering, &report)?;
            let check = verify_center_set(&centers, &layering);
            if !check.valid {
                return Err(Error::Numeric(format!("embedded centers fail validation: {:?}", check.violations)).into());
            }
            let body = if *csv { points_csv(&centers).into_bytes() } else { json_line(&centers)? };
            Ok(Outcome::ok(body))
        }
        Command::BuildCone { input } => {
            let centers: CenterSet = read_json(input)?;
            Ok(Outcome::ok(json_line(&build_config(&centers)?)?))
        }
        Command::Verify { input, trials } => {
            let config = read_cone(input)?;
            let opts = VerifyOptions {
                trials: *trials,
                samples: g.samples.unwrap_or(DEFAULT_VERIFY_SAMPLES),
                seed: g.seed,
                ..VerifyOptions::default()
            };
            let reports = verify_uniformity(&config, &opts)?;
            let body = if g.json { json_line(&reports)? } else { reports_text(&reports).into_bytes() };
            Ok(Outcome::judged(body, all_pass(&reports)))
        }
        Command::Catalog { entry } => {
            let e = match entry {
                CatalogCommand::Kp => catalog::kp_cone(),
                CatalogCommand::Ck { k } => catalog::ck_cone(*k)?,
                CatalogCommand::Tetra8 => catalog::tetra8()?,
                CatalogCommand::Rect4 => catalog::rect4()?,
            };
            Ok(Outcome::ok(json_line(&e)?))
        }
        Command::Pipeline { m, trials } => {
            let rows = run_pipeline(
                *m,
                &PipelineOptions {
                    seed: g.seed,
                    samples: g.samples.unwrap_or(DEFAULT_PIPELINE_SAMPLES),
                    trials: *trials,
                    spectral: spectral_options(g)?,
                },
            )?;
            let mut buf = Vec::new();
            if g.json {
                write_jsonl(&mut buf, &rows)?;
            } else {
                buf.extend(pipeline_text(&rows).into_bytes());
            }
            let code = if rows.iter().any(|r| r.verdict == Some(RowVerdict::Fail)) {
                ExitCode::Failed
            } else if rows.iter().any(|r| r.error.is_some()) {
                ExitCode::Numeric
            } else {
                ExitCode::Ok
            };
            Ok(Outcome { body: buf, code })
        }
    }
}

fn spectral_text(r: &SpectralReport) -> String {
    format!(
        "gap {:.12} threshold {} embeddable {} rank {}\nlaplacian {:?}\ndelta {:?}\n",
        r.gap, r.threshold, r.embeddable, r.delta_rank, r.l_eigs, r.delta_eigs
    )
}

fn reports_text(reports: &[MeasureReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let kind = match r.kind {
            MeasureKind::Sigma => "sigma",
            MeasureKind::Nu => "nu",
        };
        s.push_str(&format!(
            "trial {:>3} {kind:<5} radius {:<10.6} target {:<14.8} analytic {:<14.8} mc {:<14.8} ± {:<10.3e} {}\n",
            r.trial,
            r.radius,
            r.target,
            r.analytic,
            r.mc_estimate,
            r.mc_stderr,
            if r.passed() { "pass" } else { "FAIL" }
        ));
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    s.push_str(&format!("{} reports, {failed} failed\n", reports.len()));
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub seed: u64,
    pub samples: u64,
    pub trials: usize,
    pub spectral: SpectralOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub index: usize,
    pub d: Vec<Vec<i64>>,
    pub kept: bool,
    pub gap: Option<f64>,
    pub threshold: Option<f64>,
    pub rank: Option<usize>,
    pub antipodal_defect: Option<f64>,
    pub reports: usize,
    pub failed_reports: usize,
    pub verdict: Option<RowVerdict>,
    pub error: Option<String>,
}

/// One row per layering of `K_m`, in enumeration order. Errors at any stage
/// are recorded on the row and the remaining layerings still run.
pub fn run_pipeline(m: usize, opts: &PipelineOptions) -> CliResult<Vec<PipelineRow>> {
    let layerings: Vec<Layering> = enumerate_layerings(m, None)?.collect();
    let mut rows: Vec<PipelineRow> = layerings
        .par_iter()
        .enumerate()
        .map(|(index, l)| {
            let mut row = PipelineRow {
                index,
                d: l.rows(),
                kept: false,
                gap: None,
                threshold: None,
                rank: None,
                antipodal_defect: None,
                reports: 0,
                failed_reports: 0,
                verdict: None,
                error: None,
            };
            match spectral_report(l, &opts.spectral) {
                Ok(r) => {
                    row.kept = r.embeddable;
                    row.gap = Some(r.gap);
                    row.threshold = Some(r.threshold);
                    row.rank = Some(r.delta_rank);
                }
                Err(e) => row.error = Some(format!("spectral: {e}")),
            }
            row
        })
        .collect();

    // Verification parallelizes internally, so survivors run one at a time.
    for row in rows.iter_mut().filter(|r| r.kept) {
        let layering = &layerings[row.index];
        if let Err(message) = verify_row(layering, row, opts) {
            row.error = Some(message);
        }
    }
    Ok(rows)
}

fn verify_row(layering: &Layering, row: &mut PipelineRow, opts: &PipelineOptions) -> std::result::Result<(), String> {
    let report = spectral_report(layering, &opts.spectral).map_err(|e| format!("spectral: {e}"))?;
    let centers = embed(layering, &report).map_err(|e| format!("embed: {e}"))?;
    row.antipodal_defect = Some(antipodal_defect(&centers, layering));
    let config = build_config(&centers).map_err(|e| format!("build-cone: {e}"))?;
    let verify = VerifyOptions {
        trials: opts.trials,
        samples: opts.samples,
        seed: opts.seed,
        ..VerifyOptions::default()
    };
    let reports = verify_uniformity(&config, &verify).map_err(|e| format!("verify: {e}"))?;
    row.reports = reports.len();
    row.failed_reports = reports.iter().filter(|r| !r.passed()).count();
    row.verdict = Some(if all_pass(&reports) { RowVerdict::Pass } else { RowVerdict::Fail });
    Ok(())
}

fn pipeline_text(rows: &[PipelineRow]) -> String {
    let mut s = String::new();
    let mut kept = 0;
    for r in rows.iter().filter(|r| r.kept || r.error.is_some()) {
        kept += r.kept as usize;
        s.push_str(&format!(
            "#{:<6} kept gap {:.9} rank {} verdict {} ({}/{} reports failed){}\n",
            r.index,
            r.gap.unwrap_or(f64::NAN),
            r.rank.map_or("-".into(), |v| v.to_string()),
            match r.verdict {
                Some(RowVerdict::Pass) => "pass",
                Some(RowVerdict::Fail) => "FAIL",
                None => "-",
            },
            r.failed_reports,
            r.reports,
            r.error.as_ref().map_or(String::new(), |e| format!(" error: {e}")),
        ));
    }
    s.push_str(&format!("{} layerings, {kept} embeddable\n", rows.len()));
    s
}

pub fn emit(global: &Global, body: &[u8]) -> CliResult<()> {
    match &global.output {
        Some(path) => fs::write(path, body).map_err(|e| CliError::input(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Caps the global thread pool at `FORGE_THREADS` when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("FORGE_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(e.to_string()))
}
