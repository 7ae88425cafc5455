//! End-to-end construction: cosine block, interval family, odd sine part,
//! assembly and certification.

use serde::{Deserialize, Serialize};

use crate::assembler::{assemble, to_standard, LaurentLittlewood};
use crate::cosine::{
    build_cosine, build_even_sine, BuildConfig, Mode, TrigPoly, MAX_MATERIALIZED_N, PAPER_GAMMA_LOG2,
};
use crate::discrepancy::WalkConfig;
use crate::error::{Error, Result};
use crate::intervals::{classify_intervals, Clause, IntervalFamily};
use crate::rs::SignSeq;
use crate::seed::SeedSplitter;
use crate::sine::{
    check_taylor_bounds, choose_alpha, solve_odd_sine, taylor_constraints, AlphaReport, FractionalStart,
    TaylorGrid,
};
use crate::verifier::{
    certify_flatness, certify_flatness_refined, check_theorem_bounds, default_grid_size, targets_for,
    BoundCheck, CertificateKind, FlatnessReport,
};

/// Lower target on `min |P| / sqrt(deg + 1)` in scaled mode, measured on
/// the reference runs `(n, seed) = (256, 1), (1024, 1), (4096, 1)`.
pub const SCALED_MIN_TARGET: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub build: BuildConfig,
    pub seed: u64,
    pub walk: WalkConfig,
    /// `None` means [`default_grid_size`].
    pub grid_size: Option<usize>,
    pub certificate: CertificateKind,
    /// Relative slack of the refined certificate.
    pub rel_tol: f64,
    pub min_target: f64,
}

impl PipelineConfig {
    pub fn new(build: BuildConfig, seed: u64) -> Self {
        Self {
            build,
            seed,
            walk: WalkConfig::default(),
            grid_size: None,
            certificate: CertificateKind::Refined,
            rel_tol: 1e-3,
            min_target: SCALED_MIN_TARGET,
        }
    }
}

/// Diagnostics of the intermediate stages.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    pub t: u32,
    pub shift: u32,
    pub big_t: u64,
    pub good_threshold: f64,
    pub bad_cells: u64,
    pub max_raw_run: u64,
    pub base_arcs: usize,
    pub violations: Vec<Clause>,
    pub alpha: AlphaReport,
    pub ell_max: u32,
    pub taylor_rows: usize,
    pub taylor_worst_ratio: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    #[serde(flatten)]
    pub flatness: FlatnessReport,
    pub quarter_degree: u64,
    /// `min |P| / sqrt(n)` and `max |P| / sqrt(n)` for the quarter degree `n`.
    pub achieved_delta_prime: f64,
    pub achieved_big_delta_prime: f64,
    pub check: BoundCheck,
    pub stages: StageReport,
}

pub struct BuildOutput {
    pub coeffs: SignSeq,
    pub laurent: LaurentLittlewood,
    pub family: IntervalFamily,
    pub cosine: TrigPoly,
    pub even_sine: TrigPoly,
    pub odd_sine: TrigPoly,
    pub start: FractionalStart,
    pub taylor: TaylorGrid,
    pub report: PipelineReport,
}

/// Runs every stage. Clause violations are errors in paper-exact mode and
/// warnings in scaled mode.
pub fn run_build(pc: &PipelineConfig) -> Result<BuildOutput> {
    let cfg = &pc.build;
    cfg.validate()?;
    if cfg.mode == Mode::PaperExact && cfg.n > MAX_MATERIALIZED_N {
        return Err(Error::Capacity {
            what: format!(
                "paper-exact n (gamma n = 2^(t+11) + 2^t - 1 with gamma <= 2^-{PAPER_GAMMA_LOG2}, t = {})",
                cfg.t
            ),
            requested: cfg.n as u128,
            limit: MAX_MATERIALIZED_N as u128,
        });
    }
    cfg.ensure_materializable("construction")?;
    let split = SeedSplitter::new(pc.seed);
    let n = cfg.n;

    let cosine = build_cosine(cfg)?;
    let even_sine = build_even_sine(cfg)?;
    let cls = classify_intervals(cfg)?;
    let mut warnings = Vec::new();
    if !cls.violations.is_empty() {
        if cfg.mode == Mode::PaperExact {
            return Err(Error::FamilyInvalid { clauses: cls.violations });
        }
        let list: Vec<String> = cls.violations.iter().map(|c| c.to_string()).collect();
        warnings.push(format!("interval family violates clause(s) {}", list.join(", ")));
    }
    let family = cls.family.clone();

    let (_, start, alpha) = choose_alpha(&family, cfg, &pc.walk, split.derive("alpha", 0))?;
    let taylor = TaylorGrid::new(n as usize)?;
    let inst = taylor_constraints(&start, &taylor)?;
    let (odd_sine, tcheck) = solve_odd_sine(&start, &inst, &taylor, &pc.walk, split.derive("odd", 0))?;
    drop(inst);

    let laurent = assemble(&cosine, &even_sine, &odd_sine, n)?;
    let coeffs = to_standard(&laurent);
    let grid = pc.grid_size.unwrap_or_else(|| default_grid_size(coeffs.degree()));
    let mut flat = match pc.certificate {
        CertificateKind::Uniform => certify_flatness(&coeffs, grid)?,
        CertificateKind::Refined => certify_flatness_refined(&coeffs, grid, pc.rel_tol)?,
    };
    let targets = targets_for(cfg, coeffs.degree() as u64, pc.min_target);
    let check = check_theorem_bounds(&flat, targets);
    flat.mode = Some(cfg.mode);
    flat.seed = Some(pc.seed);
    flat.targets = Some(targets);
    flat.pass = Some(check.pass);
    let conv = (coeffs.len() as f64 / n as f64).sqrt();
    let report = PipelineReport {
        achieved_delta_prime: flat.min_ratio * conv,
        achieved_big_delta_prime: flat.max_ratio * conv,
        flatness: flat,
        quarter_degree: n,
        check,
        stages: StageReport {
            t: cfg.t,
            shift: cfg.shift,
            big_t: cfg.big_t(),
            good_threshold: cfg.good_threshold,
            bad_cells: cls.bad_cells,
            max_raw_run: cls.max_raw_run,
            base_arcs: family.base_len(),
            violations: cls.violations,
            alpha,
            ell_max: taylor.ell_max,
            taylor_rows: tcheck.rows,
            taylor_worst_ratio: tcheck.worst_ratio,
            warnings,
        },
    };
    Ok(BuildOutput { coeffs, laurent, family, cosine, even_sine, odd_sine, start, taylor, report })
}

/// Re-checks the Taylor constraints of a finished build.
pub fn recheck_taylor(out: &BuildOutput) -> f64 {
    let eps: Vec<f64> = out.odd_sine.signs().iter().map(|&s| s as f64).collect();
    check_taylor_bounds(&out.taylor, &eps, &out.start.eps_hat).worst_ratio
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_build_runs() {
        let pc = PipelineConfig::new(BuildConfig::scaled_default(256).unwrap(), 1);
        let out = run_build(&pc).unwrap();
        assert_eq!(out.coeffs.degree(), 1024);
        assert_eq!(out.coeffs.coeffs()[512], 1);
        let r = &out.report;
        assert!(r.flatness.min_ratio > 0.0, "{:?}", r.flatness);
        assert!(r.flatness.max_ratio <= 4096.0);
        assert!(r.stages.taylor_worst_ratio <= 1.0);
        assert!(recheck_taylor(&out) <= 1.0);
        assert!(out.start.sup_norm() <= 1.0);
    }

    #[test]
    fn paper_exact_refuses() {
        let pc = PipelineConfig::new(BuildConfig::paper_exact(3).unwrap(), 1);
        let err = run_build(&pc).err().unwrap();
        assert_eq!(err.kind(), "capacity");
    }
}
