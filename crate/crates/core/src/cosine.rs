//! Cosine part `c`, even-sine part `s_e`, and the rescaled function `H`.
//!
//! With `T = 2^(t+shift)` the cosine part lives on `C = 2C'` where
//! `C' = [T, T + 2^t) u [2T, 2T + 2^t)` and
//! `c(theta) = Re(z^T P_t(z) + z^{2T} Q_t(z))`, `z = e^{2i theta}`.
//! Writing `x = 2T theta` gives `c = 2^{(t+1)/2} Re H(x)` with
//! `H(x) = e^{ix} alpha(x) + e^{2ix} beta(x)` and `alpha, beta` the normalised
//! `P_t, Q_t` evaluated at `e^{ix/T}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, cis};
use crate::rs::{rs_truncated, rs_vectors};

/// Largest `n` for which per-frequency objects are materialised.
pub const MAX_MATERIALIZED_N: u64 = 1 << 24;

/// `log2` of the factor separating `gamma * n` from `n` in paper-exact mode.
pub const PAPER_GAMMA_LOG2: u32 = 40;

pub const PAPER_SHIFT: u32 = 10;
pub const PAPER_PUSH_AMPLITUDE: f64 = 128.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PaperExact,
    Scaled,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::PaperExact => "paper-exact",
            Mode::Scaled => "scaled",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-exact" => Ok(Mode::PaperExact),
            "scaled" => Ok(Mode::Scaled),
            _ => Err(Error::InvalidConfig(format!(
                "unknown mode '{s}', expected 'paper-exact' or 'scaled'"
            ))),
        }
    }
}

/// Parameters of one construction. `n` is the quarter degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub t: u32,
    pub shift: u32,
    pub n: u64,
    pub delta: f64,
    /// Push amplitude `K`; `None` picks the largest admissible value.
    pub push_amplitude: Option<f64>,
    pub good_threshold: f64,
    pub mode: Mode,
}

impl BuildConfig {
    /// The configuration forced by `t`, with `gamma = 2^-40`.
    pub fn paper_exact(t: u32) -> Result<Self> {
        check_t(t)?;
        let top = support_top(t, PAPER_SHIFT)?;
        let n = top
            .checked_mul(1u128 << PAPER_GAMMA_LOG2)
            .filter(|&n| n <= u64::MAX as u128)
            .ok_or_else(|| Error::Capacity {
                what: format!(
                    "paper-exact n = (2^(t+11) + 2^t - 1) * 2^{PAPER_GAMMA_LOG2} for t = {t}"
                ),
                requested: top << PAPER_GAMMA_LOG2.min(60),
                limit: u64::MAX as u128,
            })? as u64;
        let gamma = top as f64 / n as f64;
        let eta = eta_of(t, PAPER_SHIFT, n);
        let cfg = BuildConfig {
            t,
            shift: PAPER_SHIFT,
            n,
            delta: paper_delta(gamma),
            push_amplitude: Some(PAPER_PUSH_AMPLITUDE),
            good_threshold: default_threshold(eta),
            mode: Mode::PaperExact,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scaled configuration with default threshold, delta and push amplitude.
    pub fn scaled(n: u64, t: u32, shift: u32) -> Result<Self> {
        check_t(t)?;
        let eta = eta_of(t, shift, n);
        let thr = default_threshold(eta);
        let cfg = BuildConfig {
            t,
            shift,
            n,
            delta: scaled_delta(t, thr, n),
            push_amplitude: None,
            good_threshold: thr,
            mode: Mode::Scaled,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scaled configuration with `shift = 2` and the largest odd `t` for
    /// which the cosine block occupies at most half of `[n]`.
    pub fn scaled_default(n: u64) -> Result<Self> {
        let t = default_t(n, 2).ok_or_else(|| {
            Error::InvalidConfig(format!("n = {n} is too small for any odd t with shift 2"))
        })?;
        Self::scaled(n, t, 2)
    }

    /// Paper parameters (`shift = 10`, `K = 2^7`, threshold `eta^3 / 2^7`)
    /// at the reduced window `gamma = 2^-gamma_log2`.
    pub fn structural(t: u32, gamma_log2: u32) -> Result<Self> {
        check_t(t)?;
        let top = support_top(t, PAPER_SHIFT)?;
        let n = top << gamma_log2;
        if n > u64::MAX as u128 {
            return Err(Error::Capacity {
                what: "structural n".into(),
                requested: n,
                limit: u64::MAX as u128,
            });
        }
        let n = n as u64;
        let eta = eta_of(t, PAPER_SHIFT, n);
        let thr = default_threshold(eta);
        let cfg = BuildConfig {
            t,
            shift: PAPER_SHIFT,
            n,
            delta: scaled_delta(t, thr, n),
            push_amplitude: Some(PAPER_PUSH_AMPLITUDE),
            good_threshold: thr,
            mode: Mode::Scaled,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_t(self.t)?;
        if self.shift < 2 {
            return Err(Error::InvalidConfig(format!(
                "shift must be at least 2, got {}",
                self.shift
            )));
        }
        let top = support_top(self.t, self.shift)?;
        if top > self.n as u128 {
            return Err(Error::InvalidConfig(format!(
                "2T + 2^t - 1 = {top} exceeds n = {}",
                self.n
            )));
        }
        if self.n % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "n = {} must be even so that pi/2 is a lattice point",
                self.n
            )));
        }
        if !(self.good_threshold > 0.0 && self.good_threshold.is_finite()) {
            return Err(Error::InvalidConfig("good_threshold must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        if let Some(k) = self.push_amplitude {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidConfig("push amplitude must be positive".into()));
            }
        }
        if self.mode == Mode::PaperExact {
            let gamma = self.gamma();
            let lo = 2f64.powi(-43);
            let hi = 2f64.powi(-40);
            if self.shift != PAPER_SHIFT {
                return Err(Error::InvalidConfig(format!(
                    "paper-exact mode requires shift = {PAPER_SHIFT}"
                )));
            }
            if !(gamma > lo && gamma <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "paper-exact mode requires gamma n = 2^(t+11) + 2^t - 1 with gamma in (2^-43, 2^-40], got gamma = {gamma:e}"
                )));
            }
            if rel_diff(self.delta, paper_delta(gamma)) > 1e-9 {
                return Err(Error::InvalidConfig(
                    "paper-exact mode requires delta = 2^-8 gamma^(7/2)".into(),
                ));
            }
            if self.push_amplitude != Some(PAPER_PUSH_AMPLITUDE) {
                return Err(Error::InvalidConfig("paper-exact mode requires K = 2^7".into()));
            }
            if rel_diff(self.good_threshold, default_threshold(self.eta())) > 1e-9 {
                return Err(Error::InvalidConfig(
                    "paper-exact mode requires the threshold eta^3 / 2^7".into(),
                ));
            }
        }
        Ok(())
    }

    /// `T = 2^(t + shift)`.
    pub fn big_t(&self) -> u64 {
        1u64 << (self.t + self.shift)
    }

    pub fn block_len(&self) -> u64 {
        1u64 << self.t
    }

    /// `gamma n = 2T + 2^t - 1`, the top of the cosine block.
    pub fn support_top(&self) -> u64 {
        2 * self.big_t() + self.block_len() - 1
    }

    pub fn gamma(&self) -> f64 {
        self.support_top() as f64 / self.n as f64
    }

    /// Cell width `2 T pi / n` in the rescaled variable.
    pub fn eta(&self) -> f64 {
        eta_of(self.t, self.shift, self.n)
    }

    /// Push amplitude to use when the caller needs a number.
    pub fn push_amplitude_or_default(&self) -> f64 {
        self.push_amplitude.unwrap_or(PAPER_PUSH_AMPLITUDE)
    }

    pub fn with_good_threshold(mut self, thr: f64) -> Result<Self> {
        self.good_threshold = thr;
        if self.mode == Mode::Scaled {
            self.delta = scaled_delta(self.t, thr, self.n);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_push_amplitude(mut self, k: Option<f64>) -> Result<Self> {
        self.push_amplitude = k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub(crate) fn ensure_materializable(&self, what: &str) -> Result<()> {
        if self.n > MAX_MATERIALIZED_N {
            return Err(Error::Capacity {
                what: format!("{what} with n = {}", self.n),
                requested: self.n as u128,
                limit: MAX_MATERIALIZED_N as u128,
            });
        }
        Ok(())
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check_t(t: u32) -> Result<()> {
    if t % 2 == 0 || t > 25 {
        return Err(Error::InvalidConfig(format!(
            "t must be odd and at most 25, got {t}"
        )));
    }
    Ok(())
}

fn support_top(t: u32, shift: u32) -> Result<u128> {
    if t + shift > 60 {
        return Err(Error::Capacity {
            what: "exponent t + shift".into(),
            requested: (t + shift) as u128,
            limit: 60,
        });
    }
    Ok((2u128 << (t + shift)) + (1u128 << t) - 1)
}

fn eta_of(t: u32, shift: u32, n: u64) -> f64 {
    2.0 * (1u64 << (t + shift)) as f64 * PI / n as f64
}

pub fn default_threshold(eta: f64) -> f64 {
    eta.powi(3) / 128.0
}

pub fn paper_delta(gamma: f64) -> f64 {
    gamma.powf(3.5) / 256.0
}

/// Lower bound on `|c| / sqrt(n)` implied by the good-cell threshold.
fn scaled_delta(t: u32, thr: f64, n: u64) -> f64 {
    2f64.powf((t + 1) as f64 / 2.0) * thr / (n as f64).sqrt()
}

/// Largest odd `t` with `2 (2T + 2^t - 1) <= n` for `T = 2^(t + shift)`.
pub fn default_t(n: u64, shift: u32) -> Option<u32> {
    let mut best = None;
    let mut t = 1;
    while t + shift < 60 {
        let top = (2u128 << (t + shift)) + (1u128 << t) - 1;
        if 2 * top > n as u128 {
            break;
        }
        best = Some(t);
        t += 2;
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Cosine,
    Sine,
}

/// `sum_f s_f cos(f theta)` or `sum_f s_f sin(f theta)` with sorted support.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    kind: TrigKind,
    support: Vec<u64>,
    signs: Vec<i8>,
}

impl TrigPoly {
    pub fn new(kind: TrigKind, mut terms: Vec<(u64, i8)>) -> Result<Self> {
        terms.sort_unstable_by_key(|&(f, _)| f);
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidConfig(format!("repeated frequency {}", w[0].0)));
            }
        }
        if let Some(&(f, s)) = terms.iter().find(|&&(_, s)| s != 1 && s != -1) {
            return Err(Error::InvalidConfig(format!("frequency {f} has sign {s}")));
        }
        if terms.first().map_or(false, |&(f, _)| f == 0) {
            return Err(Error::InvalidConfig("frequency 0 is not allowed".into()));
        }
        let (support, signs) = terms.into_iter().unzip();
        Ok(Self { kind, support, signs })
    }

    pub fn kind(&self) -> TrigKind {
        self.kind
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn degree(&self) -> u64 {
        self.support.last().copied().unwrap_or(0)
    }

    pub fn sign(&self, freq: u64) -> Option<i8> {
        self.support.binary_search(&freq).ok().map(|i| self.signs[i])
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, i8)> + '_ {
        self.support.iter().copied().zip(self.signs.iter().copied())
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_deriv(theta, 0)
    }

    /// `order`-th derivative in `theta`.
    pub fn eval_deriv(&self, theta: f64, order: u32) -> f64 {
        let phase = order as f64 * PI / 2.0;
        self.terms()
            .map(|(f, s)| {
                let a = f as f64 * theta + phase;
                let v = match self.kind {
                    TrigKind::Cosine => a.cos(),
                    TrigKind::Sine => a.sin(),
                };
                s as f64 * (f as f64).powi(order as i32) * v
            })
            .sum()
    }
}

/// Cosine part on `2C'`: the sign at `2(T + r)` is `P_t[r]` and at
/// `2(2T + r)` it is `Q_t[r]`.
pub fn build_cosine(cfg: &BuildConfig) -> Result<TrigPoly> {
    cfg.validate()?;
    let (p, q) = rs_vectors(cfg.t);
    let tt = cfg.big_t();
    let mut terms = Vec::with_capacity(2 * p.len());
    for (r, &s) in p.iter().enumerate() {
        terms.push((2 * (tt + r as u64), s));
    }
    for (r, &s) in q.iter().enumerate() {
        terms.push((2 * (2 * tt + r as u64), s));
    }
    TrigPoly::new(TrigKind::Cosine, terms)
}

/// The cosine-block frequencies `C'` (before doubling), ascending.
pub fn cosine_block(cfg: &BuildConfig) -> Vec<u64> {
    let tt = cfg.big_t();
    let b = cfg.block_len();
    (tt..tt + b).chain(2 * tt..2 * tt + b).collect()
}

/// Even sine part on `2([n] \ C')` with the sign at `2m` equal to the
/// `m`-th coefficient of the truncated Rudin–Shapiro sequence.
pub fn build_even_sine(cfg: &BuildConfig) -> Result<TrigPoly> {
    cfg.validate()?;
    cfg.ensure_materializable("even sine part")?;
    let n = cfg.n;
    let prs = rs_truncated(n as usize + 1)?;
    let tt = cfg.big_t();
    let b = cfg.block_len();
    let in_block = |m: u64| (tt..tt + b).contains(&m) || (2 * tt..2 * tt + b).contains(&m);
    let terms = (1..=n)
        .filter(|&m| !in_block(m))
        .map(|m| (2 * m, prs.coeffs()[m as usize]))
        .collect();
    TrigPoly::new(TrigKind::Sine, terms)
}

/// `H` and its first derivatives at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct HEvaluation {
    pub x: f64,
    /// `h[k]` is the `k`-th derivative of `H`.
    pub h: Vec<Complex64>,
    pub alpha: Complex64,
    pub beta: Complex64,
}

pub const MAX_H_DERIV: usize = 4;

/// Precomputed normalised `P_t, Q_t` for fast evaluation of `H`.
#[derive(Clone, Debug)]
pub struct HField {
    inv_t: f64,
    p: Vec<f64>,
    q: Vec<f64>,
}

type Derivs = [Complex64; MAX_H_DERIV + 1];
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl HField {
    pub fn new(cfg: &BuildConfig) -> Result<Self> {
        cfg.validate()?;
        let (p, q) = rs_vectors(cfg.t);
        let norm = 2f64.powf(-((cfg.t + 1) as f64) / 2.0);
        Ok(Self {
            inv_t: 1.0 / cfg.big_t() as f64,
            p: p.iter().map(|&s| s as f64 * norm).collect(),
            q: q.iter().map(|&s| s as f64 * norm).collect(),
        })
    }

    /// `sum_m c_m (m/T)^j u^m` for `j <= kmax`; the caller applies `i^j`.
    fn raw_sums(&self, u: Complex64, kmax: usize) -> (Derivs, Derivs) {
        let mut a = [ZERO; MAX_H_DERIV + 1];
        let mut b = [ZERO; MAX_H_DERIV + 1];
        let mut w = Complex64::new(1.0, 0.0);
        for (m, (&pm, &qm)) in self.p.iter().zip(&self.q).enumerate() {
            let r = m as f64 * self.inv_t;
            let mut rp = 1.0;
            for j in 0..=kmax {
                a[j] += w * (pm * rp);
                b[j] += w * (qm * rp);
                rp *= r;
            }
            w *= u;
        }
        (a, b)
    }

    /// `(alpha^{(j)}, beta^{(j)})` for `j <= kmax`.
    pub fn alpha_beta(&self, x: f64, kmax: usize) -> (Derivs, Derivs) {
        let kmax = kmax.min(MAX_H_DERIV);
        let (mut a, mut b) = self.raw_sums(cis(x * self.inv_t), kmax);
        let mut ij = Complex64::new(1.0, 0.0);
        for j in 0..=kmax {
            a[j] *= ij;
            b[j] *= ij;
            ij *= Complex64::new(0.0, 1.0);
        }
        (a, b)
    }

    /// `H^{(k)}(x)` for `k <= kmax`, by the Leibniz rule.
    pub fn derivs(&self, x: f64, kmax: usize) -> Derivs {
        let kmax = kmax.min(MAX_H_DERIV);
        let (a, b) = self.alpha_beta(x, kmax);
        combine(cis(x), cis(2.0 * x), &a, &b, kmax)
    }

    /// `(alpha, beta)` given `u = e^{ix/T}`, by Horner's rule.
    pub(crate) fn at_u(&self, u: Complex64) -> (Complex64, Complex64) {
        let mut a = ZERO;
        let mut b = ZERO;
        for (&pm, &qm) in self.p.iter().zip(&self.q).rev() {
            a = a * u + pm;
            b = b * u + qm;
        }
        (a, b)
    }

    pub fn re_h(&self, x: f64) -> f64 {
        let u = cis(x * self.inv_t);
        let (a, b) = self.raw_sums(u, 0);
        (cis(x) * a[0] + cis(2.0 * x) * b[0]).re
    }
}

fn combine(e1: Complex64, e2: Complex64, a: &Derivs, b: &Derivs, kmax: usize) -> Derivs {
    let i = Complex64::new(0.0, 1.0);
    let mut h = [ZERO; MAX_H_DERIV + 1];
    for k in 0..=kmax {
        let mut acc = ZERO;
        for j in 0..=k {
            let c = binomial(k, j);
            let p1 = i.powu((k - j) as u32);
            let p2 = (2.0 * i).powu((k - j) as u32);
            acc += c * (p1 * e1 * a[j] + p2 * e2 * b[j]);
        }
        h[k] = acc;
    }
    h
}

/// `H` and its derivatives up to `max_deriv <= 4` at `x`.
pub fn eval_h(cfg: &BuildConfig, x: f64, max_deriv: usize) -> Result<HEvaluation> {
    if max_deriv > MAX_H_DERIV {
        return Err(Error::InvalidConfig(format!(
            "derivative order {max_deriv} exceeds {MAX_H_DERIV}"
        )));
    }
    let field = HField::new(cfg)?;
    let (a, b) = field.alpha_beta(x, 0);
    let h = field.derivs(x, max_deriv);
    Ok(HEvaluation {
        x,
        h: h[..=max_deriv].to_vec(),
        alpha: a[0],
        beta: b[0],
    })
}

/// Outcome of a grid scan of `max_{k<=3} |Re H^{(k)}|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeScan {
    pub grid_min: f64,
    pub argmin: f64,
    pub step: f64,
    pub points: u64,
}

impl DerivativeScan {
    /// Lipschitz constant of `max_{k<=3} |Re H^{(k)}|`.
    pub const LIPSCHITZ: f64 = 18.0;

    /// Lower bound valid on the whole scanned range.
    pub fn certified_floor(&self) -> f64 {
        self.grid_min - Self::LIPSCHITZ * self.step / 2.0
    }
}

pub const MAX_SCAN_STEP: f64 = 1.0 / 256.0;
const SCAN_CHUNK: u64 = 1 << 16;
const RESYNC: u64 = 64;

/// Minimum of `max_{k<=3} |Re H^{(k)}|` over the grid `x = m * step` in
/// `[0, T pi]`. `Re H` is even with period `2 pi T`, so this range covers
/// the whole line.
pub fn scan_derivative_floor(cfg: &BuildConfig, step: f64) -> Result<DerivativeScan> {
    if !(step > 0.0 && step <= MAX_SCAN_STEP) {
        return Err(Error::InvalidConfig(format!(
            "grid step {step} must lie in (0, 2^-8]"
        )));
    }
    let field = HField::new(cfg)?;
    let end = cfg.big_t() as f64 * PI;
    let points = (end / step).floor() as u64 + 1;
    let chunks = points.div_ceil(SCAN_CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SCAN_CHUNK;
            let hi = (lo + SCAN_CHUNK).min(points);
            scan_chunk(&field, step, lo, hi)
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok(DerivativeScan {
        grid_min: best.0,
        argmin: best.1 as f64 * step,
        step,
        points,
    })
}

fn scan_chunk(field: &HField, step: f64, lo: u64, hi: u64) -> (f64, u64) {
    let mut best = (f64::INFINITY, u64::MAX);
    let rot_u = cis(step * field.inv_t);
    let rot_1 = cis(step);
    let rot_2 = cis(2.0 * step);
    let (mut u, mut e1, mut e2) = (ZERO, ZERO, ZERO);
    for m in lo..hi {
        if (m - lo) % RESYNC == 0 {
            let x = m as f64 * step;
            u = cis(x * field.inv_t);
            e1 = cis(x);
            e2 = cis(2.0 * x);
        }
        let (a0, b0) = field.raw_sums(u, 0);
        let re0 = (e1 * a0[0] + e2 * b0[0]).re.abs();
        // the maximum over k is at least |Re H|, so this point cannot lower the minimum
        if re0 < best.0 {
            let (mut a, mut b) = field.raw_sums(u, 3);
            let mut ij = Complex64::new(1.0, 0.0);
            for j in 0..=3 {
                a[j] *= ij;
                b[j] *= ij;
                ij *= Complex64::new(0.0, 1.0);
            }
            let h = combine(e1, e2, &a, &b, 3);
            let v = h[..4].iter().map(|z| z.re.abs()).fold(0.0, f64::max);
            if v < best.0 {
                best = (v, m);
            }
        }
        u *= rot_u;
        e1 *= rot_1;
        e2 *= rot_2;
    }
    best
}

/// Minimum of `Re H` on `|x| <= 1/8` and `|x - T pi| <= 1/8`, on a grid of
/// the given step.
pub fn scan_origin_floor(cfg: &BuildConfig, step: f64) -> Result<f64> {
    if !(step > 0.0 && step <= MAX_SCAN_STEP) {
        return Err(Error::InvalidConfig(format!(
            "grid step {step} must lie in (0, 2^-8]"
        )));
    }
    let field = HField::new(cfg)?;
    let k = (0.125 / step).floor() as i64;
    let centre = cfg.big_t() as f64 * PI;
    let mut min = f64::INFINITY;
    for c in [0.0, centre] {
        for m in -k..=k {
            let x = c + m as f64 * step;
            min = min.min(field.re_h(x));
        }
        min = min.min(field.re_h(c - 0.125)).min(field.re_h(c + 0.125));
    }
    Ok(min)
}
