//! Odd sine part: the push signs on the bad arcs, the fractional start
//! they induce on odd frequencies, and the rounding to `+-1` under the
//! Taylor-grid constraints.
//!
//! Odd frequency `2j - 1` (`j = 1..=n`) is stored at index `j - 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::cosine::{BuildConfig, Mode, TrigKind, TrigPoly};
use crate::discrepancy::{full_colour, ConstraintSystem, DiscInstance, WalkConfig};
use crate::error::{Error, Result};
use crate::intervals::{IntervalFamily, LatticeArc};
use crate::quadrature::{integrate, sinc};
use crate::seed::SeedSplitter;

/// Signs `alpha_I` on the base arcs, extended to the full family by
/// `alpha(pi - I) = alpha(I)` and `alpha(pi + I) = alpha(-I) = -alpha(I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalColouring {
    pub alpha: Vec<i8>,
}

impl IntervalColouring {
    /// One sign per entry of [`IntervalFamily::full`].
    pub fn full_signs(&self) -> Vec<i8> {
        self.alpha.iter().flat_map(|&a| [a, a, -a, -a]).collect()
    }
}

/// Fractional coefficients on the odd frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalStart {
    pub eps_hat: Vec<f64>,
    pub push_amplitude: f64,
}

impl FractionalStart {
    pub fn n(&self) -> usize {
        self.eps_hat.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.eps_hat.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `int_I sin(j theta) d theta` for the arc `I = [a pi/n, b pi/n]`, with
/// the phases reduced in integer arithmetic.
pub fn interval_sine_integral(arc: LatticeArc, n: u64, j: u64) -> f64 {
    assert!(j > 0, "frequency must be positive");
    // (cos ja - cos jb)/j = 2 sin(j(a+b)/2) sin(j(b-a)/2) / j
    let p = 4 * n as i128;
    let unit = PI / (2.0 * n as f64);
    let s = (j as i128 * (arc.a as i128 + arc.b as i128)).rem_euclid(p);
    let d = (j as i128 * (arc.b as i128 - arc.a as i128)).rem_euclid(p);
    2.0 * (s as f64 * unit).sin() * (d as f64 * unit).sin() / j as f64
}

/// Budgets for the interval colouring, `14 sqrt(log(16 n / N))`.
pub fn alpha_budget(n: usize, big_n: usize) -> f64 {
    14.0 * (16.0 * n as f64 / big_n as f64).ln().sqrt()
}

/// Report on the interval colouring step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaReport {
    pub arcs: usize,
    pub push_amplitude: f64,
    pub eps_hat_sup: f64,
    pub levels: u32,
}

/// Picks `alpha` by a full colouring of the `N`-dimensional instance with
/// rows `4 sqrt(n) int_{I_i} sin((2j-1) theta)`, and returns the induced
/// fractional start `eps_hat = K * rows . alpha`.
///
/// With no explicit push amplitude (scaled mode), `K` is the largest value
/// keeping `||eps_hat||_inf <= 1`.
pub fn choose_alpha(
    fam: &IntervalFamily,
    cfg: &BuildConfig,
    walk: &WalkConfig,
    seed: u64,
) -> Result<(IntervalColouring, FractionalStart, AlphaReport)> {
    let n = cfg.n as usize;
    let big_n = fam.base_len();
    if big_n == 0 {
        let k = cfg.push_amplitude.unwrap_or(0.0);
        return Ok((
            IntervalColouring { alpha: Vec::new() },
            FractionalStart { eps_hat: vec![0.0; n], push_amplitude: k },
            AlphaReport { arcs: 0, push_amplitude: k, eps_hat_sup: 0.0, levels: 0 },
        ));
    }
    if big_n > n {
        return Err(Error::InvalidConfig(format!("{big_n} arcs exceed n = {n}")));
    }
    let rn = (n as f64).sqrt();
    let rows: Vec<Vec<f64>> = (1..=n as u64)
        .map(|j| {
            fam.base()
                .iter()
                .map(|&arc| 4.0 * rn * interval_sine_integral(arc, cfg.n, 2 * j - 1))
                .collect()
        })
        .collect();
    let budgets = vec![alpha_budget(n, big_n); n];
    let inst = DiscInstance::dense(rows, budgets, vec![0.0; big_n])?;
    let split = SeedSplitter::new(seed);
    let attempts = walk.retries + 1;
    let mut worst = 0.0f64;
    for attempt in 0..attempts {
        let s = split.derive("alpha", attempt as u64);
        let col = full_colour(&inst, walk, s)?;
        let mut unit = vec![0.0; n];
        inst.system.apply(&col.x, &mut unit);
        let sup = unit.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let k = match cfg.push_amplitude {
            Some(k) => k,
            None if sup > 0.0 => (1.0 - 1e-12) / sup,
            None => 1.0,
        };
        let eps_hat: Vec<f64> = unit.iter().map(|v| k * v).collect();
        let achieved = sup * k;
        if achieved <= 1.0 {
            let alpha = col.x.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect();
            let report = AlphaReport { arcs: big_n, push_amplitude: k, eps_hat_sup: achieved, levels: col.levels };
            return Ok((IntervalColouring { alpha }, FractionalStart { eps_hat, push_amplitude: k }, report));
        }
        worst = worst.max(achieved);
        if cfg.mode == Mode::Scaled && cfg.push_amplitude.is_none() {
            break;
        }
    }
    Err(Error::StartTooLarge { achieved: worst })
}

/// `s_hat(theta) = sum_j eps_hat_j sin((2j-1) theta)`, differentiated
/// `order` times.
pub fn eval_s_hat(start: &FractionalStart, theta: f64, order: u32) -> f64 {
    let phase = order as f64 * PI / 2.0;
    start
        .eps_hat
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let f = (2 * i + 1) as f64;
            e * f.powi(order as i32) * (f * theta + phase).sin()
        })
        .sum()
}

/// Points `theta_k = (2k - 1) pi / (4M)`, `k = 1..=M`, with `M = 16 n`, and
/// derivative orders `0..=ell_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TaylorGrid {
    pub n: usize,
    pub points: usize,
    pub ell_max: u32,
}

impl TaylorGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        Ok(Self { n, points: 16 * n, ell_max: ell_max_for(n) })
    }

    pub fn theta(&self, k: usize) -> f64 {
        (2 * k - 1) as f64 * PI / (4 * self.points) as f64
    }

    pub fn orders(&self) -> usize {
        self.ell_max as usize + 1
    }

    pub fn constraint_count(&self) -> usize {
        self.points * self.orders()
    }

    /// `(ell, k)` of constraint row `r`.
    pub fn locate(&self, r: usize) -> (u32, usize) {
        ((r / self.points) as u32, r % self.points + 1)
    }

    /// Budget `14 sqrt((9 + ell) log 2)` of order `ell`.
    pub fn budget(ell: u32) -> f64 {
        14.0 * ((9 + ell) as f64 * std::f64::consts::LN_2).sqrt()
    }

    /// Allowed `|s_o^(ell) - s_hat^(ell)|` at a grid point.
    pub fn target(&self, ell: u32) -> f64 {
        (65 + 2 * ell) as f64 * (self.n as f64).sqrt() * (2.0 * self.n as f64).powi(ell as i32)
    }
}

/// Least `ell >= 0` with `65 + 2 ell >= 2 sqrt(n)`.
pub fn ell_max_for(n: usize) -> u32 {
    let two_rn = 2.0 * (n as f64).sqrt();
    let mut ell = 0;
    while ((65 + 2 * ell) as f64) < two_rn {
        ell += 1;
    }
    ell
}

/// The Taylor constraints as a structured operator. Row `(ell, k)` has
/// entries `w_j^ell sin((2j-1) theta_k + ell pi/2)` with
/// `w_j = (2j-1)/(2n-1)`, i.e. the derivative row divided by `(2n-1)^ell`.
/// All dot products for one order come from a single FFT.
#[derive(Clone)]
pub struct TaylorConstraints {
    grid: TaylorGrid,
    keep: Arc<Vec<usize>>,
    shared: Arc<TaylorShared>,
}

struct TaylorShared {
    weights: Vec<f64>,
    fft_apply: Arc<dyn Fft<f64>>,
    fft_norm: Arc<dyn Fft<f64>>,
    /// `e^{-i j pi / (2M)}` for `j = 1..=n`.
    tw_j: Vec<Complex64>,
    /// `e^{-i theta_k}` for `k = 1..=M`.
    tw_k: Vec<Complex64>,
    /// `e^{-i j pi / M}`.
    tw2_j: Vec<Complex64>,
    /// `e^{-i 2 theta_k}`.
    tw2_k: Vec<Complex64>,
}

const INF_SAMPLE: usize = 16;

impl TaylorConstraints {
    pub fn new(grid: TaylorGrid) -> Self {
        let n = grid.n;
        let m = grid.points;
        let mut planner = FftPlanner::new();
        let cis_frac = |p: i128, q: i128| {
            let r = p.rem_euclid(q) as f64 / q as f64;
            let (s, c) = (2.0 * PI * r).sin_cos();
            Complex64::new(c, s)
        };
        let q8 = 8 * m as i128;
        let shared = TaylorShared {
            weights: (1..=n).map(|j| (2 * j - 1) as f64 / (2 * n - 1) as f64).collect(),
            fft_apply: planner.plan_fft_inverse(2 * m),
            fft_norm: planner.plan_fft_inverse(m),
            tw_j: (1..=n).map(|j| cis_frac(-2 * j as i128, q8)).collect(),
            tw_k: (1..=m).map(|k| cis_frac(-(2 * k as i128 - 1), q8)).collect(),
            tw2_j: (1..=n).map(|j| cis_frac(-4 * j as i128, q8)).collect(),
            tw2_k: (1..=m).map(|k| cis_frac(-2 * (2 * k as i128 - 1), q8)).collect(),
        };
        Self { grid, keep: Arc::new((0..n).collect()), shared: Arc::new(shared) }
    }

    pub fn grid(&self) -> &TaylorGrid {
        &self.grid
    }

    fn entry(&self, ell: u32, k: usize, j0: usize) -> f64 {
        let m = self.grid.points as i128;
        let j = j0 as i128 + 1;
        let p = ((2 * j - 1) * (2 * k as i128 - 1) + 2 * m * ell as i128).rem_euclid(8 * m);
        self.shared.weights[j0].powi(ell as i32) * (p as f64 * PI / (4 * m) as f64).sin()
    }
}

impl ConstraintSystem for TaylorConstraints {
    fn dim(&self) -> usize {
        self.keep.len()
    }

    fn len(&self) -> usize {
        self.grid.constraint_count()
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        let m = self.grid.points;
        let sh = &self.shared;
        let mut a = vec![0.0; n];
        for (&j0, &v) in self.keep.iter().zip(y) {
            a[j0] = v;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); sh.fft_apply.get_inplace_scratch_len()];
        for ell in 0..=self.grid.ell_max {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for j0 in 0..n {
                if a[j0] != 0.0 {
                    buf[j0 + 1] = sh.tw_j[j0] * (a[j0] * sh.weights[j0].powi(ell as i32));
                }
            }
            sh.fft_apply.process_with_scratch(&mut buf, &mut scratch);
            let dst = &mut out[ell as usize * m..(ell as usize + 1) * m];
            for k in 1..=m {
                let s = sh.tw_k[k - 1] * buf[k % (2 * m)];
                // Im(i^ell s)
                dst[k - 1] = match ell % 4 {
                    0 => s.im,
                    1 => s.re,
                    2 => -s.im,
                    _ => -s.re,
                };
            }
        }
    }

    fn row(&self, r: usize, out: &mut [f64]) {
        let (ell, k) = self.grid.locate(r);
        for (o, &j0) in out.iter_mut().zip(self.keep.iter()) {
            *o = self.entry(ell, k, j0);
        }
    }

    fn norms2(&self) -> Vec<f64> {
        let n = self.grid.n;
        let m = self.grid.points;
        let sh = &self.shared;
        let mut out = vec![0.0; self.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); sh.fft_norm.get_inplace_scratch_len()];
        let mut present = vec![false; n];
        for &j0 in self.keep.iter() {
            present[j0] = true;
        }
        for ell in 0..=self.grid.ell_max {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let mut total = 0.0;
            for j0 in 0..n {
                if present[j0] {
                    let w = sh.weights[j0].powi(2 * ell as i32);
                    total += w;
                    buf[j0 + 1] = sh.tw2_j[j0] * w;
                }
            }
            sh.fft_norm.process_with_scratch(&mut buf, &mut scratch);
            let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..=m {
                let c = (sh.tw2_k[k - 1] * buf[k % m]).re;
                // sin^2(phi) = (1 - cos 2 phi) / 2 and cos(2 phi) picks up (-1)^ell
                let v = 0.5 * total - 0.5 * sign * c;
                out[ell as usize * m + k - 1] = v.max(0.0).sqrt();
            }
        }
        out
    }

    fn norms_inf_lower(&self) -> Vec<f64> {
        let top: Vec<usize> = self.keep.iter().rev().take(INF_SAMPLE).copied().collect();
        (0..self.len())
            .map(|r| {
                let (ell, k) = self.grid.locate(r);
                top.iter().fold(0.0f64, |mx, &j0| mx.max(self.entry(ell, k, j0).abs()))
            })
            .collect()
    }

    fn restrict(&self, keep: &[usize]) -> Box<dyn ConstraintSystem> {
        Box::new(TaylorConstraints {
            grid: self.grid,
            keep: Arc::new(keep.iter().map(|&i| self.keep[i]).collect()),
            shared: Arc::clone(&self.shared),
        })
    }
}

/// The rounding instance: Taylor constraints, their budgets, and
/// `eps_hat` as the start.
pub fn taylor_constraints(start: &FractionalStart, grid: &TaylorGrid) -> Result<DiscInstance> {
    if start.n() != grid.n {
        return Err(Error::InvalidConfig(format!(
            "start has {} coordinates, grid expects {}",
            start.n(),
            grid.n
        )));
    }
    let sys = TaylorConstraints::new(*grid);
    let budgets = (0..=grid.ell_max)
        .flat_map(|ell| std::iter::repeat(TaylorGrid::budget(ell)).take(grid.points))
        .collect();
    DiscInstance::new(Box::new(sys), budgets, start.eps_hat.clone())
}

/// Largest `|s_o^(ell) - s_hat^(ell)| / target(ell)` over the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorCheck {
    pub worst_ratio: f64,
    pub rows: usize,
}

pub fn check_taylor_bounds(grid: &TaylorGrid, eps: &[f64], eps_hat: &[f64]) -> TaylorCheck {
    let sys = TaylorConstraints::new(*grid);
    let diff: Vec<f64> = eps.iter().zip(eps_hat).map(|(a, b)| a - b).collect();
    let mut d = vec![0.0; sys.len()];
    sys.apply(&diff, &mut d);
    let n = grid.n as f64;
    let mut worst = 0.0f64;
    for (r, v) in d.iter().enumerate() {
        let (ell, _) = grid.locate(r);
        // rows are scaled by (2n-1)^-ell
        let allowed = (65 + 2 * ell) as f64 * n.sqrt() * (2.0 * n / (2.0 * n - 1.0)).powi(ell as i32);
        worst = worst.max(v.abs() / allowed);
    }
    TaylorCheck { worst_ratio: worst, rows: d.len() }
}

/// Rounds `eps_hat` to signs under the Taylor constraints.
pub fn solve_odd_sine(
    start: &FractionalStart,
    inst: &DiscInstance,
    grid: &TaylorGrid,
    walk: &WalkConfig,
    seed: u64,
) -> Result<(TrigPoly, TaylorCheck)> {
    let col = full_colour(inst, walk, seed)?;
    let check = check_taylor_bounds(grid, &col.x, &start.eps_hat);
    if check.worst_ratio > 1.0 {
        return Err(Error::Verification(format!(
            "Taylor bound exceeded by factor {}",
            check.worst_ratio
        )));
    }
    let terms = col
        .x
        .iter()
        .enumerate()
        .map(|(i, &v)| ((2 * i + 1) as u64, if v > 0.0 { 1 } else { -1 }))
        .collect();
    Ok((TrigPoly::new(TrigKind::Sine, terms)?, check))
}

/// Extremes of the sine-integral check over random arcs and points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiBoundsReport {
    pub cases: usize,
    pub inside_min: f64,
    pub inside_max: f64,
    pub outside_min: f64,
    pub outside_max: f64,
    /// Smallest distance to the allowed range; negative means a violation.
    pub worst_margin: f64,
}

/// `int_I sin(2n(theta - theta0)) / (theta - theta0)` lies in `[4/3, 4]`
/// when `theta0` is in `I`, and in `[-1, 2]` otherwise, for lattice arcs of
/// length at most `6 pi / n`.
pub fn check_si_bounds(n: u64, trials: usize, seed: u64, tol: f64) -> Result<SiBoundsReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = PI / n as f64;
    let two_n = 2.0 * n as f64;
    let mut rep = SiBoundsReport {
        cases: trials,
        inside_min: f64::INFINITY,
        inside_max: f64::NEG_INFINITY,
        outside_min: f64::INFINITY,
        outside_max: f64::NEG_INFINITY,
        worst_margin: f64::INFINITY,
    };
    for t in 0..trials {
        let len = rng.gen_range(1..=6i64);
        let a = rng.gen_range(0..2 * n as i64);
        let (lo, hi) = (a as f64 * u, (a + len) as f64 * u);
        let inside = t % 2 == 0;
        let theta0 = if inside {
            rng.gen_range(lo..=hi)
        } else if t % 8 == 1 {
            loop {
                let th = rng.gen_range(-PI..3.0 * PI);
                if th < lo || th > hi {
                    break th;
                }
            }
        } else {
            loop {
                let th = rng.gen_range(lo - 30.0 * u..hi + 30.0 * u);
                if th < lo || th > hi {
                    break th;
                }
            }
        };
        let q = integrate(|th| two_n * sinc(two_n * (th - theta0)), lo, hi, tol)?;
        let v = q.value;
        let margin = if inside {
            rep.inside_min = rep.inside_min.min(v);
            rep.inside_max = rep.inside_max.max(v);
            (v - 4.0 / 3.0).min(4.0 - v)
        } else {
            rep.outside_min = rep.outside_min.min(v);
            rep.outside_max = rep.outside_max.max(v);
            (v + 1.0).min(2.0 - v)
        };
        rep.worst_margin = rep.worst_margin.min(margin);
    }
    Ok(rep)
}

/// Largest absolute error in
/// `4 sum_{j<n} sin((2j+1) a) sin((2j+1) b)
///   = sin(2n(b-a))/sin(b-a) - sin(2n(b+a))/sin(b+a)`
/// over random `n <= max_n` and angles with `b +- a` at least `1e-3` away
/// from `pi Z`.
pub fn odd_kernel_identity_error(trials: usize, max_n: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let away = |x: f64| {
        let r = x.rem_euclid(PI);
        r.min(PI - r) >= 1e-3
    };
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < trials {
        let n = rng.gen_range(1..=max_n);
        let a = rng.gen_range(0.0..2.0 * PI);
        let b = rng.gen_range(0.0..2.0 * PI);
        if !(away(b - a) && away(b + a)) {
            continue;
        }
        let lhs: f64 = 4.0
            * (0..n)
                .map(|j| {
                    let f = (2 * j + 1) as f64;
                    (f * a).sin() * (f * b).sin()
                })
                .sum::<f64>();
        let m = 2.0 * n as f64;
        let rhs = (m * (b - a)).sin() / (b - a).sin() - (m * (b + a)).sin() / (b + a).sin();
        worst = worst.max((lhs - rhs).abs());
        done += 1;
    }
    worst
}

/// Largest `|int_a^b h sin(2n theta)| - |h(b) - h(a)| / n` for monotone
/// `h` on random `[a, b]` with `b - a` in `(pi/n) Z`. Non-positive values
/// confirm the bound.
pub fn check_oscillation_bound(n: u64, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = PI / n as f64;
    let two_n = 2.0 * n as f64;
    let hs: [fn(f64) -> f64; 3] = [|x| 1.0 / x.sin(), |x| 1.0 / x, |x| 1.0 / x.sin() - 1.0 / x];
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let h = hs[t % 3];
        let len = rng.gen_range(1..=6) as f64 * u;
        let a = rng.gen_range(1e-2..PI / 2.0 - len);
        let b = a + len;
        let q = integrate(|x| h(x) * (two_n * x).sin(), a, b, 1e-13)?;
        let bound = (h(b) - h(a)).abs() / n as f64;
        worst = worst.max(q.value.abs() - bound - q.error);
    }
    Ok(worst)
}
