//! Certified bounds on `min |Q|` and `max |Q|` over the unit circle for a
//! sign sequence `Q(z) = sum_k q_k z^k`.
//!
//! Ratios are `|Q| / sqrt(deg + 1)`, so a sequence read back from disk
//! reproduces the numbers of the run that wrote it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cosine::{BuildConfig, Mode};
use crate::error::{Error, Result};
use crate::rs::{eval_signs_with_derivative, SignSeq};

/// Largest grid accepted, `2^26` points.
pub const MAX_GRID: usize = 1 << 26;
/// Upper target in units of `sqrt(n)`.
pub const PAPER_MAX_FACTOR: f64 = 4096.0;
const REFINE_DEPTH: u32 = 40;

/// `64 (deg + 1)` rounded up to a power of two.
pub fn default_grid_size(degree: usize) -> usize {
    (64 * (degree + 1)).next_power_of_two()
}

fn check_grid(degree: usize, grid_size: usize, factor: usize) -> Result<()> {
    if !grid_size.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("grid size {grid_size} is not a power of two")));
    }
    if grid_size < factor * (degree + 1) {
        return Err(Error::InvalidConfig(format!(
            "grid size {grid_size} is below {factor} (deg + 1) = {}",
            factor * (degree + 1)
        )));
    }
    if grid_size > MAX_GRID {
        return Err(Error::Capacity { what: "evaluation grid".into(), requested: grid_size as u128, limit: MAX_GRID as u128 });
    }
    Ok(())
}

fn fft_values(coeffs: impl Iterator<Item = Complex64>, grid_size: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    for (b, c) in buf.iter_mut().zip(coeffs) {
        *b = c;
    }
    FftPlanner::new().plan_fft_inverse(grid_size).process(&mut buf);
    buf
}

/// `Q(omega^j)` for `omega = e^{2 pi i / grid_size}`, `j = 0..grid_size`.
/// The offset of `q` is ignored.
pub fn eval_grid(q: &SignSeq, grid_size: usize) -> Result<Vec<Complex64>> {
    check_grid(q.degree(), grid_size, 2)?;
    Ok(fft_values(q.coeffs().iter().map(|&c| Complex64::new(c as f64, 0.0)), grid_size))
}

/// Values and `d/dtheta` of `Q(e^{i theta})` on the grid.
pub fn eval_grid_with_derivative(q: &SignSeq, grid_size: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    check_grid(q.degree(), grid_size, 2)?;
    let v = fft_values(q.coeffs().iter().map(|&c| Complex64::new(c as f64, 0.0)), grid_size);
    let d = fft_values(
        q.coeffs().iter().enumerate().map(|(k, &c)| Complex64::new(0.0, c as f64 * k as f64)),
        grid_size,
    );
    Ok((v, d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    /// Bernstein margin around every grid point.
    Uniform,
    /// Second-order bound per cell with adaptive subdivision near the minimum.
    Refined,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    /// Number of coefficients; ratios are taken against its square root.
    pub n: u64,
    pub degree: u64,
    pub grid_size: u64,
    pub certificate: CertificateKind,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub grid_min_ratio: f64,
    pub grid_max_ratio: f64,
    /// Smallest value actually evaluated, grid or refinement point.
    pub observed_min_ratio: f64,
    /// Bernstein margin, in ratio units.
    pub lipschitz_margin: f64,
    /// Relative deviation of the grid mean of `|Q|^2` from `deg + 1`.
    pub parseval_check: f64,
    /// Direct evaluations spent on refinement.
    pub refinements: u64,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub targets: Option<Targets>,
    pub pass: Option<bool>,
}

struct GridStats {
    gmin: f64,
    gmax: f64,
    parseval: f64,
}

fn grid_stats(v: &[Complex64], len: usize) -> GridStats {
    let mut gmin = f64::INFINITY;
    let mut gmax = 0.0f64;
    let mut energy = 0.0;
    for z in v {
        let a = z.norm();
        gmin = gmin.min(a);
        gmax = gmax.max(a);
        energy += z.norm_sqr();
    }
    let mean = energy / v.len() as f64;
    GridStats { gmin, gmax, parseval: (mean - len as f64).abs() / len as f64 }
}

/// `lip = pi deg / G`; the true maximum `M` obeys `M <= gmax + lip M`, so
/// the margin is `lip gmax / (1 - lip)`.
fn bernstein_margin(degree: usize, grid_size: usize, gmax: f64) -> f64 {
    let lip = PI * degree as f64 / grid_size as f64;
    lip * gmax / (1.0 - lip)
}

/// Uniform certificate. Requires `grid_size >= 16 (deg + 1)`.
pub fn certify_flatness(q: &SignSeq, grid_size: usize) -> Result<FlatnessReport> {
    check_grid(q.degree(), grid_size, 16)?;
    let v = eval_grid(q, grid_size)?;
    let st = grid_stats(&v, q.len());
    let margin = bernstein_margin(q.degree(), grid_size, st.gmax);
    let rn = (q.len() as f64).sqrt();
    Ok(FlatnessReport {
        n: q.len() as u64,
        degree: q.degree() as u64,
        grid_size: grid_size as u64,
        certificate: CertificateKind::Uniform,
        min_ratio: (st.gmin - margin) / rn,
        max_ratio: (st.gmax + margin) / rn,
        grid_min_ratio: st.gmin / rn,
        grid_max_ratio: st.gmax / rn,
        observed_min_ratio: st.gmin / rn,
        lipschitz_margin: margin / rn,
        parseval_check: st.parseval,
        refinements: 0,
        mode: None,
        seed: None,
        targets: None,
        pass: None,
    })
}

/// Distance from 0 to the segment `{a + s b : 0 <= s <= len}`.
fn segment_distance(a: Complex64, b: Complex64, len: f64) -> f64 {
    let bb = b.norm_sqr();
    if bb == 0.0 {
        return a.norm();
    }
    let s = (-(a.re * b.re + a.im * b.im) / bb).clamp(0.0, len);
    (a + b * s).norm()
}

struct Refiner<'a> {
    coeffs: &'a [i8],
    b2: f64,
    rel_tol: f64,
    slack: f64,
    observed: f64,
    evals: u64,
}

impl Refiner<'_> {
    /// Lower bound of `|Q|` on `[l, l + h]` from both endpoints.
    fn cell_bound(&self, ql: Complex64, dl: Complex64, qr: Complex64, dr: Complex64, h: f64) -> f64 {
        let half = 0.5 * h;
        let a = segment_distance(ql, dl, half);
        let b = segment_distance(qr, -dr, half);
        a.min(b) - h * h / 8.0 * self.b2 - self.slack
    }

    fn refine(&mut self, l: f64, h: f64, ends: [(Complex64, Complex64); 2], depth: u32) -> f64 {
        let [(ql, dl), (qr, dr)] = ends;
        let bound = self.cell_bound(ql, dl, qr, dr, h);
        if bound >= (1.0 - self.rel_tol) * self.observed || depth >= REFINE_DEPTH {
            return bound;
        }
        let mid = l + 0.5 * h;
        let (qm, dm) = eval_signs_with_derivative(self.coeffs, mid);
        self.evals += 1;
        self.observed = self.observed.min(qm.norm());
        let left = self.refine(l, 0.5 * h, [(ql, dl), (qm, dm)], depth + 1);
        let right = self.refine(mid, 0.5 * h, [(qm, dm), (qr, dr)], depth + 1);
        left.min(right)
    }
}

/// Second-order certificate: each grid cell is bounded using the value and
/// derivative at both ends and `|Q''| <= deg^2 max |Q|`; cells whose bound
/// is more than `rel_tol` below the smallest value seen are bisected with
/// direct evaluations. The upper bound is the uniform one.
pub fn certify_flatness_refined(q: &SignSeq, grid_size: usize, rel_tol: f64) -> Result<FlatnessReport> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidConfig(format!("rel_tol {rel_tol} outside (0, 1)")));
    }
    check_grid(q.degree(), grid_size, 16)?;
    let (v, d) = eval_grid_with_derivative(q, grid_size)?;
    let st = grid_stats(&v, q.len());
    let margin = bernstein_margin(q.degree(), grid_size, st.gmax);
    let mmax = st.gmax + margin;
    let deg = q.degree() as f64;
    let h = 2.0 * PI / grid_size as f64;
    let mut r = Refiner {
        coeffs: q.coeffs(),
        b2: deg * deg * mmax,
        rel_tol,
        slack: 1e-12 * q.len() as f64,
        observed: st.gmin,
        evals: 0,
    };
    let ends = |j: usize| (v[j % grid_size], d[j % grid_size]);
    let coarse: Vec<f64> = (0..grid_size)
        .map(|j| {
            let (ql, dl) = ends(j);
            let (qr, dr) = ends(j + 1);
            r.cell_bound(ql, dl, qr, dr, h)
        })
        .collect();
    // refine the lowest cells first so the observed minimum drops early
    let mut order: Vec<usize> = (0..grid_size).filter(|&j| coarse[j] < (1.0 - rel_tol) * st.gmin).collect();
    order.sort_by(|&a, &b| coarse[a].total_cmp(&coarse[b]).then(a.cmp(&b)));
    let mut lower = coarse.iter().copied().fold(f64::INFINITY, f64::min);
    if !order.is_empty() {
        lower = (0..grid_size)
            .filter(|j| coarse[*j] >= (1.0 - rel_tol) * st.gmin)
            .map(|j| coarse[j])
            .fold(f64::INFINITY, f64::min);
        for j in order {
            let b = r.refine(j as f64 * h, h, [ends(j), ends(j + 1)], 0);
            lower = lower.min(b);
        }
    }
    let rn = (q.len() as f64).sqrt();
    Ok(FlatnessReport {
        n: q.len() as u64,
        degree: q.degree() as u64,
        grid_size: grid_size as u64,
        certificate: CertificateKind::Refined,
        min_ratio: lower.min(st.gmin) / rn,
        max_ratio: mmax / rn,
        grid_min_ratio: st.gmin / rn,
        grid_max_ratio: st.gmax / rn,
        observed_min_ratio: r.observed / rn,
        lipschitz_margin: margin / rn,
        parseval_check: st.parseval,
        refinements: r.evals,
        mode: None,
        seed: None,
        targets: None,
        pass: None,
    })
}

/// Outcome of comparing a report with its targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub pass: bool,
    pub targets: Targets,
    /// `min_ratio - targets.min`.
    pub min_margin: f64,
    /// `targets.max - max_ratio`.
    pub max_margin: f64,
}

/// Targets in ratio units. In paper-exact mode these are `delta sqrt(n)`
/// and `2^12 sqrt(n)` converted to `sqrt(deg + 1)` units; in scaled mode
/// the lower target is `scaled_min` and the upper one is `2^12`.
pub fn targets_for(cfg: &BuildConfig, degree: u64, scaled_min: f64) -> Targets {
    match cfg.mode {
        Mode::PaperExact => {
            let conv = (cfg.n as f64 / (degree + 1) as f64).sqrt();
            Targets { min: cfg.delta * conv, max: PAPER_MAX_FACTOR * conv }
        }
        Mode::Scaled => Targets { min: scaled_min, max: PAPER_MAX_FACTOR },
    }
}

pub fn check_theorem_bounds(report: &FlatnessReport, targets: Targets) -> BoundCheck {
    let min_margin = report.min_ratio - targets.min;
    let max_margin = targets.max - report.max_ratio;
    BoundCheck { pass: min_margin >= 0.0 && max_margin >= 0.0, targets, min_margin, max_margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rs::{eval_seq, rs_pair, UnitCirclePoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(len: usize, seed: u64) -> SignSeq {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SignSeq::from_signs((0..len).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()).unwrap()
    }

    /// Direct Horner evaluation, independent of the FFT and blocked paths.
    fn horner(q: &SignSeq, theta: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, theta);
        q.coeffs().iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c as f64)
    }

    #[test]
    fn grid_matches_horner() {
        let q = random_seq(512, 1);
        let g = 4096;
        let v = eval_grid(&q, g).unwrap();
        for j in (0..g).step_by(37) {
            let want = horner(&q, 2.0 * PI * j as f64 / g as f64);
            assert!((v[j] - want).norm() <= 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn simple_grids() {
        let one = SignSeq::parse_line("+").unwrap();
        assert!(eval_grid(&one, 8).unwrap().iter().all(|z| (z - 1.0).norm() < 1e-15));
        let (p3, _) = rs_pair(3).unwrap();
        assert!((eval_grid(&p3, 64).unwrap()[0].re - 4.0).abs() < 1e-12);
        assert!(eval_grid(&p3, 8).is_err());
        assert!(eval_grid(&p3, 48).is_err());
    }

    #[test]
    fn derivative_grid() {
        let q = random_seq(100, 2);
        let (_, d) = eval_grid_with_derivative(&q, 1024).unwrap();
        for j in [0usize, 17, 900] {
            let (_, want) = eval_signs_with_derivative(q.coeffs(), 2.0 * PI * j as f64 / 1024.0);
            assert!((d[j] - want).norm() < 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn rudin_shapiro_is_flat() {
        let (p, _) = rs_pair(10).unwrap();
        let r = certify_flatness(&p, default_grid_size(p.degree())).unwrap();
        assert!(r.max_ratio <= 2f64.sqrt() + r.lipschitz_margin + 1e-12);
        assert!(r.parseval_check < 1e-9);
    }

    #[test]
    fn dirichlet_kernel() {
        let q = SignSeq::from_signs(vec![1; 101]).unwrap();
        let r = certify_flatness(&q, default_grid_size(100)).unwrap();
        // max at theta = 0 equals (deg + 1) / sqrt(deg + 1)
        assert!((r.grid_max_ratio - 101f64.sqrt()).abs() < 1e-9);
        assert!(r.min_ratio <= 0.0);
        let rr = certify_flatness_refined(&q, default_grid_size(100), 1e-3).unwrap();
        assert!(rr.min_ratio <= 1e-9);
    }

    #[test]
    fn certificates_bracket_dense_truth() {
        for seed in 0..4 {
            let q = random_seq(200, 10 + seed);
            let g = default_grid_size(q.degree());
            let uni = certify_flatness(&q, g).unwrap();
            let refd = certify_flatness_refined(&q, g, 1e-4).unwrap();
            let rn = (q.len() as f64).sqrt();
            let dense = 1 << 20;
            let mut tmin = f64::INFINITY;
            let mut tmax = 0.0f64;
            for z in eval_grid(&q, dense).unwrap() {
                tmin = tmin.min(z.norm());
                tmax = tmax.max(z.norm());
            }
            assert!(uni.min_ratio * rn <= tmin && tmin <= uni.grid_min_ratio * rn + 1e-12);
            assert!(refd.min_ratio * rn <= tmin + 1e-12);
            assert!(refd.min_ratio >= uni.min_ratio);
            // tmin can be exactly 0 when the signs sum to zero
            assert!(refd.min_ratio * rn >= (1.0 - 1e-3) * tmin - 1e-9, "{} vs {tmin}", refd.min_ratio * rn);
            assert!(uni.max_ratio * rn >= tmax);
        }
    }

    #[test]
    fn doubling_grid_never_widens() {
        let q = random_seq(300, 5);
        let mut prev = f64::INFINITY;
        for g in [8192usize, 16384, 32768, 65536] {
            let r = certify_flatness(&q, g).unwrap();
            let w = (r.max_ratio - r.grid_max_ratio) + (r.grid_min_ratio - r.min_ratio);
            assert!(w <= prev);
            prev = w;
        }
    }

    #[test]
    fn direct_eval_agrees_with_grid() {
        let q = random_seq(77, 3);
        let v = eval_grid(&q, 2048).unwrap();
        let z = eval_seq(&q, UnitCirclePoint::new(2.0 * PI * 5.0 / 2048.0).unwrap());
        assert!((v[5] - z).norm() < 1e-10);
    }

    #[test]
    fn flatness_targets() {
        let cfg = BuildConfig::scaled(256, 3, 2).unwrap();
        let q = random_seq(1025, 1);
        let r = certify_flatness(&q, default_grid_size(1024)).unwrap();
        let t = targets_for(&cfg, 1024, 0.01);
        assert_eq!(t.max, 4096.0);
        let c = check_theorem_bounds(&r, t);
        assert!(c.max_margin > 0.0);
        assert_eq!(c.pass, r.min_ratio >= 0.01);
    }
}
