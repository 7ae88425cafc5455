//! Classification of the lattice cells `[j pi/n, (j+1) pi/n]` into good and
//! bad ones, and the resulting family of bad arcs.
//!
//! Cells are certified in the rescaled variable `x = 2T theta`, where the
//! cell `j` becomes `[j eta, (j+1) eta]` and `|d/dx Re H| <= 4`.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cosine::{BuildConfig, HField, Mode, TrigKind, TrigPoly};
use crate::error::{Error, Result};
use crate::numeric::{cis, root_of_unity};

/// Lipschitz constant of `Re H` used for cell certification.
pub const CELL_LIPSCHITZ: f64 = 4.0;
const MAX_BISECT_DEPTH: u32 = 16;
const CHUNK: u64 = 1 << 15;
const RESYNC: u64 = 64;
/// Largest `n` accepted for full classification (`2n` cells are visited).
pub const MAX_CLASSIFY_N: u64 = 1 << 31;
/// Largest grid accepted by [`min_abs_outside`].
pub const MAX_OUTSIDE_GRID: u64 = 1 << 27;

/// The six structural requirements on a family of bad arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clause {
    /// Endpoints on the lattice `(pi/n) Z`, non-negative length.
    A,
    /// Invariance under `theta -> pi - theta` and `theta -> pi + theta`.
    B,
    /// `4N` arcs with `N <= gamma n`.
    C,
    /// Each arc has length at most `6 pi / n`.
    D,
    /// Distinct arcs are at distance at least `pi / n`.
    E,
    /// Arcs avoid `(pi/2) Z + [-100 pi/n, 100 pi/n]`.
    F,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Clause::A => 'a',
            Clause::B => 'b',
            Clause::C => 'c',
            Clause::D => 'd',
            Clause::E => 'e',
            Clause::F => 'f',
        };
        write!(f, "({c})")
    }
}

/// Closed arc `[a pi/n, b pi/n]` stored by its integer endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeArc {
    pub a: i64,
    pub b: i64,
}

impl LatticeArc {
    pub fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    pub fn len(&self) -> i64 {
        self.b - self.a
    }

    pub fn is_empty(&self) -> bool {
        self.b <= self.a
    }

    /// Same arc with `a` moved into `[0, 2n)`.
    pub fn canonical(&self, n: u64) -> LatticeArc {
        let p = 2 * n as i64;
        let s = self.a.rem_euclid(p) - self.a;
        LatticeArc::new(self.a + s, self.b + s)
    }

    pub fn angles(&self, n: u64) -> (f64, f64) {
        let u = PI / n as f64;
        (self.a as f64 * u, self.b as f64 * u)
    }
}

/// Base arcs in `[0, pi/2]` together with their images under
/// `theta -> pi - theta`, `pi + theta` and `-theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalFamily {
    n: u64,
    base: Vec<LatticeArc>,
    full: Vec<LatticeArc>,
}

impl IntervalFamily {
    pub fn from_base(n: u64, base: Vec<LatticeArc>) -> Self {
        let ni = n as i64;
        let full = base
            .iter()
            .flat_map(|r| {
                [
                    LatticeArc::new(r.a, r.b),
                    LatticeArc::new(ni - r.b, ni - r.a),
                    LatticeArc::new(ni + r.a, ni + r.b),
                    LatticeArc::new(2 * ni - r.b, 2 * ni - r.a),
                ]
            })
            .map(|r| r.canonical(n))
            .collect();
        Self { n, base, full }
    }

    /// Family with an arbitrary full list, for checking the clauses.
    pub fn from_parts(n: u64, base: Vec<LatticeArc>, full: Vec<LatticeArc>) -> Self {
        Self { n, base, full }
    }

    pub fn empty(n: u64) -> Self {
        Self::from_base(n, Vec::new())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number `N` of base arcs.
    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[LatticeArc] {
        &self.base
    }

    /// All `4N` arcs; entries `4i..4i+4` are the images of base arc `i` in
    /// the order identity, `pi - theta`, `pi + theta`, `-theta`.
    pub fn full(&self) -> &[LatticeArc] {
        &self.full
    }

    /// Whether lattice cell `j` (mod `2n`) lies inside some arc.
    pub fn covers_cell(&self, j: u64) -> bool {
        let p = 2 * self.n as i64;
        let j = j as i64;
        self.full.iter().any(|r| {
            let off = (j - r.a).rem_euclid(p);
            off < r.len()
        })
    }

    /// Per-cell coverage flags for all `2n` cells.
    pub fn coverage(&self) -> Vec<bool> {
        let p = 2 * self.n as i64;
        let mut cov = vec![false; p as usize];
        for r in &self.full {
            for j in r.a..r.b {
                cov[j.rem_euclid(p) as usize] = true;
            }
        }
        cov
    }
}

/// Outcome of [`classify_intervals`].
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub family: IntervalFamily,
    /// Number of the `2n` raw cells that failed certification.
    pub bad_cells: u64,
    /// Longest cyclic run of consecutive raw bad cells.
    pub max_raw_run: u64,
    pub violations: Vec<Clause>,
}

/// Evaluates `Re H` at lattice positions `x = (j + s) eta`, reducing all
/// phases with integer arithmetic.
struct LatticeField {
    field: HField,
    n: u64,
    tt: u64,
    eta: f64,
    thr: f64,
}

impl LatticeField {
    fn new(cfg: &BuildConfig) -> Result<Self> {
        Ok(Self {
            field: HField::new(cfg)?,
            n: cfg.n,
            tt: cfg.big_t(),
            eta: cfg.eta(),
            thr: cfg.good_threshold,
        })
    }

    fn phasors(&self, j: u64) -> (Complex64, Complex64, Complex64) {
        let n = self.n as u128;
        let j = j as u128;
        let t = self.tt as u128;
        (
            root_of_unity(j, n),
            root_of_unity(t * j, n),
            root_of_unity(2 * t * j, n),
        )
    }

    fn value(&self, u: Complex64, e1: Complex64, e2: Complex64) -> f64 {
        let (a, b) = self.field.at_u(u);
        (e1 * a + e2 * b).re
    }

    fn at(&self, j: u64, s: f64) -> f64 {
        if s == 0.0 {
            let (u, e1, e2) = self.phasors(j);
            return self.value(u, e1, e2);
        }
        let n = self.n as u128;
        let jr = j as u128 % n;
        let tj = (self.tt as u128 * j as u128) % n;
        let t2j = (2 * self.tt as u128 * j as u128) % n;
        let t = self.tt as f64;
        let nf = self.n as f64;
        let ph = |base: u128, add: f64| {
            let r = ((base as f64 + add) / nf).fract();
            cis(TAU * r)
        };
        self.value(ph(jr, s), ph(tj, t * s), ph(t2j, 2.0 * t * s))
    }

    /// Values at the lattice points `lo..=hi`.
    fn sweep(&self, lo: u64, hi: u64) -> Vec<f64> {
        let n = self.n as u128;
        let r_u = root_of_unity(1, n);
        let r_1 = root_of_unity(self.tt as u128, n);
        let r_2 = root_of_unity(2 * self.tt as u128, n);
        let mut out = Vec::with_capacity((hi - lo + 1) as usize);
        let (mut u, mut e1, mut e2) = self.phasors(lo);
        for j in lo..=hi {
            if (j - lo) % RESYNC == 0 {
                (u, e1, e2) = self.phasors(j);
            }
            out.push(self.value(u, e1, e2));
            u *= r_u;
            e1 *= r_1;
            e2 *= r_2;
        }
        out
    }

    /// Whether `|Re H| >= thr` on the sub-cell `[(j+s0) eta, (j+s1) eta]`.
    fn certify(&self, j: u64, s0: f64, s1: f64, f0: f64, f1: f64, depth: u32) -> bool {
        if f0 * f1 <= 0.0 || f0.abs() < self.thr || f1.abs() < self.thr {
            return false;
        }
        let half_width = 0.5 * (s1 - s0) * self.eta;
        if 0.5 * (f0.abs() + f1.abs()) - CELL_LIPSCHITZ * half_width >= self.thr {
            return true;
        }
        if depth >= MAX_BISECT_DEPTH {
            return false;
        }
        let sm = 0.5 * (s0 + s1);
        let fm = self.at(j, sm);
        self.certify(j, s0, sm, f0, fm, depth + 1) && self.certify(j, sm, s1, fm, f1, depth + 1)
    }

    fn good_flags(&self, lo: u64, hi: u64) -> Vec<bool> {
        let vals = self.sweep(lo, hi);
        (lo..hi)
            .map(|j| {
                let k = (j - lo) as usize;
                self.certify(j, 0.0, 1.0, vals[k], vals[k + 1], 0)
            })
            .collect()
    }
}

fn check_classify_capacity(cfg: &BuildConfig) -> Result<()> {
    if cfg.n > MAX_CLASSIFY_N {
        return Err(Error::Capacity {
            what: format!("classification of 2n cells with n = {}", cfg.n),
            requested: cfg.n as u128,
            limit: MAX_CLASSIFY_N as u128,
        });
    }
    Ok(())
}

/// Good/bad flags (`true` = good) of the raw cells `start..start+count`
/// (indices mod `2n`).
pub fn classify_cells(cfg: &BuildConfig, start: u64, count: u64) -> Result<Vec<bool>> {
    cfg.validate()?;
    check_classify_capacity(cfg)?;
    let lf = LatticeField::new(cfg)?;
    let p = 2 * cfg.n;
    let mut out = Vec::with_capacity(count as usize);
    let mut j = start % p;
    let mut left = count;
    while left > 0 {
        let take = left.min(p - j);
        out.extend(lf.good_flags(j, j + take));
        left -= take;
        j = 0;
    }
    Ok(out)
}

fn quarter_index(j: u64, n: u64) -> u64 {
    let h = n / 2;
    match j / h {
        0 => j,
        1 => n - 1 - j,
        2 => j - n,
        _ => 2 * n - 1 - j,
    }
}

/// Classifies all `2n` cells and builds the symmetric family of bad arcs.
///
/// A cell is marked bad when any cell of its symmetry orbit fails, so the
/// family is invariant by construction. Runs are cut at `0` and `pi/2`.
pub fn classify_intervals(cfg: &BuildConfig) -> Result<Classification> {
    cfg.validate()?;
    check_classify_capacity(cfg)?;
    let lf = LatticeField::new(cfg)?;
    let n = cfg.n;
    let total = 2 * n;
    let chunks = total.div_ceil(CHUNK);
    let raw_bad: Vec<u64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let flags = lf.good_flags(lo, hi);
            flags
                .into_iter()
                .enumerate()
                .filter(|(_, g)| !g)
                .map(move |(k, _)| lo + k as u64)
                .collect::<Vec<_>>()
        })
        .collect();

    let max_raw_run = max_cyclic_run(&raw_bad, total);
    let quarter: BTreeSet<u64> = raw_bad.iter().map(|&j| quarter_index(j, n)).collect();
    let mut base = Vec::new();
    let mut it = quarter.iter().copied().peekable();
    while let Some(a) = it.next() {
        let mut b = a;
        while it.peek() == Some(&(b + 1)) {
            b = it.next().unwrap();
        }
        base.push(LatticeArc::new(a as i64, b as i64 + 1));
    }
    let family = IntervalFamily::from_base(n, base);
    let violations = validate_family(&family, cfg);
    if cfg.mode == Mode::PaperExact && !violations.is_empty() {
        return Err(Error::FamilyInvalid { clauses: violations });
    }
    Ok(Classification {
        family,
        bad_cells: raw_bad.len() as u64,
        max_raw_run,
        violations,
    })
}

fn max_cyclic_run(sorted: &[u64], total: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    if sorted.len() as u64 == total {
        return total;
    }
    let mut best = 0;
    let mut run = 0;
    let mut prev = None;
    let mut first_run = 0;
    for &j in sorted {
        run = if prev.map_or(false, |p: u64| p + 1 == j) { run + 1 } else { 1 };
        if sorted[0] == 0 && j as usize + 1 == run as usize {
            first_run = run;
        }
        best = best.max(run);
        prev = Some(j);
    }
    if sorted[0] == 0 && *sorted.last().unwrap() == total - 1 {
        best = best.max(run + first_run);
    }
    best
}

/// Clauses violated by `fam`, in order. Empty means the family is valid.
pub fn validate_family(fam: &IntervalFamily, cfg: &BuildConfig) -> Vec<Clause> {
    let n = fam.n;
    let ni = n as i64;
    let p = 2 * ni;
    let mut out = Vec::new();

    if fam.full.iter().chain(&fam.base).any(|r| r.b < r.a) {
        out.push(Clause::A);
    }

    let set: BTreeSet<LatticeArc> = fam.full.iter().map(|r| r.canonical(n)).collect();
    let symmetric = set.iter().all(|r| {
        let refl = LatticeArc::new(ni - r.b, ni - r.a).canonical(n);
        let shift = LatticeArc::new(ni + r.a, ni + r.b).canonical(n);
        set.contains(&refl) && set.contains(&shift)
    });
    if !symmetric {
        out.push(Clause::B);
    }

    if fam.full.len() != 4 * fam.base.len()
        || set.len() != fam.full.len()
        || fam.base.len() as u64 > cfg.support_top()
    {
        out.push(Clause::C);
    }

    if fam.full.iter().any(|r| r.len() > 6) {
        out.push(Clause::D);
    }

    let sorted: Vec<LatticeArc> = set.iter().copied().collect();
    let separated = match sorted.len() {
        0 => true,
        1 => sorted[0].len() <= p - 1,
        _ => {
            let inner = sorted.windows(2).all(|w| w[1].a - w[0].b >= 1);
            let wrap = sorted[0].a + p - sorted.last().unwrap().b >= 1;
            inner && wrap
        }
    };
    if !separated {
        out.push(Clause::E);
    }

    let margin = 100;
    let marks: Vec<i64> = (0..=5).map(|m| m * ni / 2).collect();
    let near_axis = sorted
        .iter()
        .any(|r| marks.iter().any(|&q| r.a <= q + margin && r.b >= q - margin));
    if near_axis {
        out.push(Clause::F);
    }
    out
}

/// Certified lower bound on `min |f(theta)|` over the complement of the
/// family, from a grid of at least `max(grid, 16n)` points and a Bernstein
/// bound on `f'`. A negative value means the bound could not be certified.
/// Returns `+inf` when the family covers the whole circle.
pub fn min_abs_outside(f: &TrigPoly, fam: &IntervalFamily, grid: u64) -> Result<f64> {
    let n = fam.n();
    let cells = 2 * n;
    let wanted = grid.max(16 * n);
    let per_cell = wanted.div_ceil(cells).next_power_of_two();
    let g = cells * per_cell;
    if g > MAX_OUTSIDE_GRID {
        return Err(Error::Capacity {
            what: "grid for min_abs_outside".into(),
            requested: g as u128,
            limit: MAX_OUTSIDE_GRID as u128,
        });
    }
    let deg = f.degree();
    if deg >= g {
        return Err(Error::InvalidConfig(format!(
            "grid of {g} points is too small for degree {deg}"
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); g as usize];
    for (fr, s) in f.terms() {
        buf[fr as usize] = Complex64::new(s as f64, 0.0);
    }
    FftPlanner::new().plan_fft_inverse(g as usize).process(&mut buf);
    let vals: Vec<f64> = buf
        .iter()
        .map(|z| match f.kind() {
            TrigKind::Cosine => z.re.abs(),
            TrigKind::Sine => z.im.abs(),
        })
        .collect();
    drop(buf);
    let gmax = vals.iter().cloned().fold(0.0, f64::max);
    let lip = PI * deg as f64 / g as f64;
    if lip >= 1.0 {
        return Err(Error::InvalidConfig("grid too coarse for a Bernstein bound".into()));
    }
    let lipschitz = deg as f64 * gmax / (1.0 - lip);
    let h = TAU / g as f64;
    let cov = fam.coverage();
    let mut best = f64::INFINITY;
    for (j, covered) in cov.iter().enumerate() {
        if *covered {
            continue;
        }
        let s0 = j as u64 * per_cell;
        for i in s0..s0 + per_cell {
            let a = vals[i as usize];
            let b = vals[((i + 1) % g) as usize];
            best = best.min(0.5 * (a + b - lipschitz * h));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosine::build_cosine;

    fn far_cfg() -> BuildConfig {
        BuildConfig::scaled(1 << 14, 3, 2).unwrap()
    }

    #[test]
    fn clause_display() {
        assert_eq!(Clause::E.to_string(), "(e)");
    }

    #[test]
    fn images_and_symmetry() {
        let fam = IntervalFamily::from_base(1000, vec![LatticeArc::new(200, 203)]);
        let full = fam.full();
        assert_eq!(full[1], LatticeArc::new(797, 800));
        assert_eq!(full[2], LatticeArc::new(1200, 1203));
        assert_eq!(full[3], LatticeArc::new(1797, 1800));
        let cfg = BuildConfig::scaled(1000, 3, 2).unwrap();
        assert!(validate_family(&fam, &cfg).is_empty());
    }

    #[test]
    fn touching_arcs_violate_separation_only() {
        let cfg = far_cfg();
        let fam = IntervalFamily::from_base(
            cfg.n,
            vec![LatticeArc::new(400, 402), LatticeArc::new(402, 404)],
        );
        assert_eq!(validate_family(&fam, &cfg), vec![Clause::E]);
    }

    #[test]
    fn each_clause_detected() {
        let cfg = far_cfg();
        let n = cfg.n;
        let long = IntervalFamily::from_base(n, vec![LatticeArc::new(400, 407)]);
        assert_eq!(validate_family(&long, &cfg), vec![Clause::D]);
        let axis = IntervalFamily::from_base(n, vec![LatticeArc::new(50, 52)]);
        assert_eq!(validate_family(&axis, &cfg), vec![Clause::F]);
        let ok = IntervalFamily::from_base(n, vec![LatticeArc::new(400, 402)]);
        let mut full = ok.full().to_vec();
        full.pop();
        let broken = IntervalFamily::from_parts(n, ok.base().to_vec(), full);
        let v = validate_family(&broken, &cfg);
        assert!(v.contains(&Clause::B) && v.contains(&Clause::C));
        let neg = IntervalFamily::from_parts(n, vec![LatticeArc::new(5, 3)], vec![]);
        assert!(validate_family(&neg, &cfg).contains(&Clause::A));
    }

    #[test]
    fn too_many_arcs_violate_count() {
        let cfg = BuildConfig::scaled(1 << 14, 1, 2).unwrap();
        let base: Vec<_> = (0..20).map(|i| LatticeArc::new(300 + 3 * i, 301 + 3 * i)).collect();
        let fam = IntervalFamily::from_base(cfg.n, base);
        assert!(cfg.support_top() < 20);
        assert_eq!(validate_family(&fam, &cfg), vec![Clause::C]);
    }

    #[test]
    fn cyclic_runs() {
        assert_eq!(max_cyclic_run(&[], 10), 0);
        assert_eq!(max_cyclic_run(&[2, 3, 4, 7], 10), 3);
        assert_eq!(max_cyclic_run(&[0, 1, 8, 9], 10), 4);
        assert_eq!(max_cyclic_run(&[0, 5, 9], 10), 2);
    }

    #[test]
    fn quarter_map_is_symmetric() {
        let n = 20;
        for j in 0..n / 2 {
            assert_eq!(quarter_index(n - 1 - j, n), j);
            assert_eq!(quarter_index(n + j, n), j);
            assert_eq!(quarter_index(2 * n - 1 - j, n), j);
        }
    }

    #[test]
    fn lattice_values_match_direct() {
        let cfg = BuildConfig::scaled(4096, 5, 2).unwrap();
        let lf = LatticeField::new(&cfg).unwrap();
        let f = HField::new(&cfg).unwrap();
        let sweep = lf.sweep(100, 400);
        for (k, v) in sweep.iter().enumerate() {
            let x = (100 + k) as f64 * cfg.eta();
            assert!((v - f.re_h(x)).abs() < 1e-9);
        }
        let x = (77.0 + 0.375) * cfg.eta();
        assert!((lf.at(77, 0.375) - f.re_h(x)).abs() < 1e-9);
    }

    #[test]
    fn scaled_family_is_symmetric_and_covers_zeros() {
        let cfg = BuildConfig::scaled(4096, 5, 2).unwrap();
        let cls = classify_intervals(&cfg).unwrap();
        let fam = &cls.family;
        let v = validate_family(fam, &cfg);
        assert!(!v.contains(&Clause::A) && !v.contains(&Clause::B), "{v:?}");
        // every cell where c changes sign lies inside the family
        let c = build_cosine(&cfg).unwrap();
        let cov = fam.coverage();
        let u = PI / cfg.n as f64;
        for j in 0..2 * cfg.n {
            let (a, b) = (c.eval(j as f64 * u), c.eval((j + 1) as f64 * u));
            if a * b <= 0.0 {
                assert!(cov[j as usize], "cell {j}");
            }
        }
        let m = min_abs_outside(&c, fam, 16 * cfg.n).unwrap();
        let mut sampled = f64::INFINITY;
        for j in (0..2 * cfg.n).filter(|&j| !cov[j as usize]) {
            for s in 0..=64 {
                sampled = sampled.min(c.eval((j as f64 + s as f64 / 64.0) * u).abs());
            }
        }
        assert!(m.is_finite() && m <= sampled);
    }

    #[test]
    fn good_cells_are_certified() {
        let cfg = BuildConfig::scaled(4096, 5, 2).unwrap();
        let flags = classify_cells(&cfg, 0, 2 * cfg.n).unwrap();
        let f = HField::new(&cfg).unwrap();
        for (j, g) in flags.iter().enumerate() {
            if *g {
                for s in 0..=16 {
                    let x = (j as f64 + s as f64 / 16.0) * cfg.eta();
                    assert!(f.re_h(x).abs() >= cfg.good_threshold * (1.0 - 1e-9));
                }
            }
        }
    }

    #[test]
    fn classify_cells_wraps() {
        let cfg = BuildConfig::scaled(1024, 3, 2).unwrap();
        let all = classify_cells(&cfg, 0, 2 * cfg.n).unwrap();
        let wrapped = classify_cells(&cfg, 2 * cfg.n - 5, 10).unwrap();
        assert_eq!(&wrapped[..5], &all[all.len() - 5..]);
        assert_eq!(&wrapped[5..], &all[..5]);
    }

    #[test]
    fn outside_bound_empty_and_full() {
        let cfg = BuildConfig::scaled(1024, 3, 2).unwrap();
        let c = build_cosine(&cfg).unwrap();
        let all: Vec<_> = (0..256).map(|i| LatticeArc::new(2 * i, 2 * i + 2)).collect();
        let fam = IntervalFamily::from_base(cfg.n, all);
        assert_eq!(min_abs_outside(&c, &fam, 0).unwrap(), f64::INFINITY);
        let none = IntervalFamily::empty(cfg.n);
        assert!(min_abs_outside(&c, &none, 0).unwrap() <= 0.0);
    }
}
