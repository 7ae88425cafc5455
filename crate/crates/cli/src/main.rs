//! `lforge`: build and certify flat Littlewood polynomials.

mod config;

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lforge_core::assembler::{to_standard, LaurentLittlewood};
use lforge_core::cosine::Mode;
use lforge_core::discrepancy::{full_colour, verify_full_colouring, DiscInstance, WalkConfig};
use lforge_core::pipeline::{run_build, PipelineConfig, PipelineReport};
use lforge_core::rs::{rs_pair, rs_truncated, SignSeq};
use lforge_core::verifier::{
    certify_flatness, certify_flatness_refined, check_theorem_bounds, default_grid_size, CertificateKind,
    FlatnessReport, Targets, PAPER_MAX_FACTOR,
};
use serde::Serialize;

use crate::config::BuildSettings;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bad invocation; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "lforge", version, about = "Build and certify flat Littlewood polynomials")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction and write coeffs.txt, report.json and intervals.json.
    Build(BuildArgs),
    /// Certify min and max of |Q| on the unit circle for a coefficient file.
    Verify(VerifyArgs),
    /// Print a Rudin–Shapiro sign sequence.
    Rs(RsArgs),
    /// Colour a discrepancy instance read from JSON.
    Discrepancy(DiscArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    shift: Option<u32>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, value_parser = parse_certificate)]
    certificate: Option<CertificateKind>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    min_target: Option<f64>,
    #[arg(long)]
    push_amplitude: Option<f64>,
    #[arg(long)]
    good_threshold: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// '+'/'-' line or JSON `{n, eps}`; `-` reads stdin.
    input: PathBuf,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, value_parser = parse_certificate, default_value = "refined")]
    certificate: CertificateKind,
    #[arg(long, default_value_t = 1e-3)]
    rel_tol: f64,
    /// Fail unless the certified min ratio reaches this value.
    #[arg(long)]
    min_target: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RsArgs {
    #[arg(long, conflicts_with = "truncate", required_unless_present = "truncate")]
    t: Option<u32>,
    /// Emit Q_t instead of P_t.
    #[arg(long, requires = "t")]
    q: bool,
    /// First n coefficients of the infinite sequence.
    #[arg(long)]
    truncate: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiscArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_certificate(s: &str) -> Result<CertificateKind, String> {
    match s {
        "uniform" => Ok(CertificateKind::Uniform),
        "refined" => Ok(CertificateKind::Refined),
        _ => Err(format!("expected 'uniform' or 'refined', got '{s}'")),
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    kind: &'a str,
    message: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = init_threads() {
        return report_error(&e);
    }
    let res = match cli.cmd {
        Command::Build(a) => cmd_build(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Rs(a) => cmd_rs(a),
        Command::Discrepancy(a) => cmd_discrepancy(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &anyhow::Error) -> ExitCode {
    let (kind, code) = if e.downcast_ref::<UsageError>().is_some() {
        ("usage", 2)
    } else if let Some(core) = e.downcast_ref::<lforge_core::Error>() {
        (core.kind(), 1)
    } else {
        ("io", 1)
    };
    let line = ErrorLine { kind, message: format!("{e:#}") };
    eprintln!("{}", serde_json::to_string(&line).expect("error line serialises"));
    ExitCode::from(code)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LFORGE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| UsageError(format!("LFORGE_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(UsageError("LFORGE_THREADS must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BuildReportFile<'a> {
    version: &'a str,
    config: &'a PipelineConfig,
    #[serde(flatten)]
    report: &'a PipelineReport,
}

#[derive(Serialize)]
struct IntervalsFile {
    n: u64,
    /// Base arcs `[a, b]` in units of `pi / n`.
    base: Vec<[i64; 2]>,
    /// All arcs: each base arc followed by its three images.
    arcs: Vec<[i64; 2]>,
    violations: Vec<String>,
}

fn cmd_build(a: BuildArgs) -> anyhow::Result<bool> {
    let flags = BuildSettings {
        n: a.n,
        t: a.t,
        shift: a.shift,
        mode: a.mode,
        seed: a.seed,
        out: a.out,
        grid_size: a.grid_size,
        certificate: a.certificate,
        rel_tol: a.rel_tol,
        min_target: a.min_target,
        push_amplitude: a.push_amplitude,
        good_threshold: a.good_threshold,
        delta: a.delta,
        walk: Default::default(),
    };
    let settings = match &a.config {
        Some(p) => flags.or(BuildSettings::from_file(p)?),
        None => flags,
    };
    let pc = settings.resolve()?;
    let out_dir = settings.out_dir();
    let built = run_build(&pc)?;
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_file(&out_dir.join("coeffs.txt"), &format!("{}\n", built.coeffs.to_line()))?;
    let file = BuildReportFile { version: VERSION, config: &pc, report: &built.report };
    write_file(&out_dir.join("report.json"), &to_json(&file))?;
    let pair = |x: &lforge_core::intervals::LatticeArc| [x.a, x.b];
    let intervals = IntervalsFile {
        n: built.family.n(),
        base: built.family.base().iter().map(pair).collect(),
        arcs: built.family.full().iter().map(pair).collect(),
        violations: built.report.stages.violations.iter().map(|c| c.to_string()).collect(),
    };
    write_file(&out_dir.join("intervals.json"), &to_json(&intervals))?;
    let f = &built.report.flatness;
    println!(
        "n={} degree={} min_ratio={:e} max_ratio={:.6} pass={}",
        built.report.quarter_degree, f.degree, f.min_ratio, f.max_ratio, built.report.check.pass
    );
    for w in &built.report.stages.warnings {
        eprintln!("warning: {w}");
    }
    Ok(built.report.check.pass)
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

/// Reads a `'+'`/`'-'` line or a JSON Laurent sequence.
fn parse_coeffs(text: &str) -> anyhow::Result<SignSeq> {
    if text.trim_start().starts_with('{') {
        Ok(to_standard(&LaurentLittlewood::from_json(text)?))
    } else {
        Ok(SignSeq::parse_line(text)?)
    }
}

#[derive(Serialize)]
struct VerifyReportFile<'a> {
    version: &'a str,
    #[serde(flatten)]
    report: &'a FlatnessReport,
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<bool> {
    let q = parse_coeffs(&read_input(&a.input)?)?;
    let grid = a.grid_size.unwrap_or_else(|| default_grid_size(q.degree()));
    let mut report = match a.certificate {
        CertificateKind::Uniform => certify_flatness(&q, grid)?,
        CertificateKind::Refined => certify_flatness_refined(&q, grid, a.rel_tol)?,
    };
    let mut pass = true;
    if let Some(min) = a.min_target {
        let targets = Targets { min, max: PAPER_MAX_FACTOR };
        pass = check_theorem_bounds(&report, targets).pass;
        report.targets = Some(targets);
        report.pass = Some(pass);
    }
    emit(a.out.as_deref(), &to_json(&VerifyReportFile { version: VERSION, report: &report }))?;
    Ok(pass)
}

fn cmd_rs(a: RsArgs) -> anyhow::Result<bool> {
    let seq = match (a.t, a.truncate) {
        (Some(t), None) => {
            let (p, q) = rs_pair(t)?;
            if a.q {
                q
            } else {
                p
            }
        }
        (None, Some(n)) => rs_truncated(n)?,
        _ => return Err(UsageError("give exactly one of --t and --truncate".into()).into()),
    };
    emit(a.out.as_deref(), &format!("{}\n", seq.to_line()))?;
    Ok(true)
}

fn cmd_discrepancy(a: DiscArgs) -> anyhow::Result<bool> {
    let inst = DiscInstance::from_json(&read_input(&a.instance)?)?;
    let col = full_colour(&inst, &WalkConfig::default(), a.seed)?;
    let verified = verify_full_colouring(&inst, &col.x).is_ok();
    emit(a.out.as_deref(), &to_json(&col.to_file(verified)))?;
    Ok(verified)
}
