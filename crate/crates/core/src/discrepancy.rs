//! Partial and full colourings with per-constraint discrepancy budgets.
//!
//! The partial colouring is a Gaussian edge walk: it moves in the subspace
//! orthogonal to frozen coordinates and tight constraints, clipping each
//! step so that coordinates land exactly on `+-1` and constraints exactly on
//! their thresholds. Full colourings recurse on the unfrozen half.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, dot_compensated};
use crate::seed::SeedSplitter;

/// A family of linear constraints `<y, v_j>` on `R^dim`.
pub trait ConstraintSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `out[j] = <y, v_j>` for every constraint.
    fn apply(&self, y: &[f64], out: &mut [f64]);
    fn row(&self, j: usize, out: &mut [f64]);
    /// Euclidean norms of all rows.
    fn norms2(&self) -> Vec<f64>;
    /// Exact sup norm of one row.
    fn norm_inf(&self, j: usize) -> f64 {
        let mut r = vec![0.0; self.dim()];
        self.row(j, &mut r);
        r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    /// Cheap lower bounds on the sup norms, one per row.
    fn norms_inf_lower(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.norm_inf(j)).collect()
    }
    /// The same constraints seen only through the coordinates `keep`.
    fn restrict(&self, keep: &[usize]) -> Box<dyn ConstraintSystem>;
}

/// Row-major dense constraint matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseConstraints {
    dim: usize,
    data: Vec<f64>,
}

impl DenseConstraints {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (j, r) in rows.into_iter().enumerate() {
            if r.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "constraint {j} has length {}, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("constraint {j} is not finite")));
            }
            data.extend(r);
        }
        Ok(Self { dim, data })
    }

    pub fn row_slice(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }
}

impl ConstraintSystem for DenseConstraints {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) {
        if self.dim == 0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        out.par_iter_mut()
            .zip(self.data.par_chunks(self.dim))
            .for_each(|(o, r)| *o = dot(r, y));
    }

    fn row(&self, j: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row_slice(j));
    }

    fn norms2(&self) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        self.data.chunks(self.dim).map(|r| dot(r, r).sqrt()).collect()
    }

    fn restrict(&self, keep: &[usize]) -> Box<dyn ConstraintSystem> {
        let mut data = Vec::with_capacity(self.len() * keep.len());
        for j in 0..self.len() {
            let r = self.row_slice(j);
            data.extend(keep.iter().map(|&i| r[i]));
        }
        Box::new(DenseConstraints { dim: keep.len(), data })
    }
}

/// Constraints with budgets `c_j` and a fractional start `x0`.
pub struct DiscInstance {
    pub system: Box<dyn ConstraintSystem>,
    pub budgets: Vec<f64>,
    pub start: Vec<f64>,
}

impl DiscInstance {
    pub fn new(system: Box<dyn ConstraintSystem>, budgets: Vec<f64>, start: Vec<f64>) -> Result<Self> {
        if budgets.len() != system.len() {
            return Err(Error::InvalidConfig(format!(
                "{} budgets for {} constraints",
                budgets.len(),
                system.len()
            )));
        }
        if let Some(j) = budgets.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidConfig(format!("budget {j} must be finite and non-negative")));
        }
        if start.len() != system.dim() {
            return Err(Error::InvalidConfig(format!(
                "start has length {}, expected {}",
                start.len(),
                system.dim()
            )));
        }
        if let Some(i) = start.iter().position(|x| !(x.abs() <= 1.0)) {
            return Err(Error::InvalidConfig(format!("start coordinate {i} lies outside [-1, 1]")));
        }
        Ok(Self { system, budgets, start })
    }

    pub fn dense(rows: Vec<Vec<f64>>, budgets: Vec<f64>, start: Vec<f64>) -> Result<Self> {
        let sys = DenseConstraints::new(start.len(), rows)?;
        Self::new(Box::new(sys), budgets, start)
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: json_offset(text, &e),
            msg: e.to_string(),
        })?;
        let start = f.x0.unwrap_or_else(|| vec![0.0; f.dim]);
        if start.len() != f.dim {
            return Err(Error::InvalidConfig(format!(
                "x0 has length {}, expected {}",
                start.len(),
                f.dim
            )));
        }
        let (rows, budgets) = f.constraints.into_iter().map(|c| (c.v, c.c)).unzip();
        Self::dense(rows, budgets, start)
    }

    pub fn to_json(&self) -> String {
        let dim = self.dim();
        let mut row = vec![0.0; dim];
        let constraints = (0..self.system.len())
            .map(|j| {
                self.system.row(j, &mut row);
                ConstraintEntry { v: row.clone(), c: self.budgets[j] }
            })
            .collect();
        let f = InstanceFile { dim, constraints, x0: Some(self.start.clone()) };
        serde_json::to_string(&f).expect("instance serialises")
    }
}

pub(crate) fn json_offset(text: &str, e: &serde_json::Error) -> usize {
    let line = e.line();
    if line == 0 {
        return 0;
    }
    let before: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    before + e.column().saturating_sub(1)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintEntry {
    pub v: Vec<f64>,
    pub c: f64,
}

/// On-disk instance: `{dim, constraints: [{v, c}], x0}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub dim: usize,
    pub constraints: Vec<ConstraintEntry>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

/// On-disk colouring: `{x, seed, verified}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColouringFile {
    pub x: Vec<f64>,
    pub seed: u64,
    pub verified: bool,
}

/// Which budget condition to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetKind {
    /// `sum exp(-c^2/16) <= dim/16`, for partial colourings.
    Partial,
    /// `sum exp(-c^2/196) <= dim/16`, for full colourings.
    Full,
}

impl BudgetKind {
    pub fn denominator(self) -> f64 {
        match self {
            BudgetKind::Partial => 16.0,
            BudgetKind::Full => 196.0,
        }
    }
}

/// Relative slack allowed when the budget sum equals `dim/16` exactly.
const BUDGET_REL_TOL: f64 = 1e-9;

pub fn budget_sum(budgets: &[f64], kind: BudgetKind) -> f64 {
    let d = kind.denominator();
    budgets.iter().map(|c| (-c * c / d).exp()).sum()
}

pub fn check_budget(budgets: &[f64], dim: usize, kind: BudgetKind) -> Result<()> {
    let sum = budget_sum(budgets, kind);
    let limit = dim as f64 / 16.0;
    if sum <= limit * (1.0 + BUDGET_REL_TOL) {
        Ok(())
    } else {
        Err(Error::Budget { sum, limit, denom: kind.denominator() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Step length per coordinate; `None` means `1 / (8 sqrt(dim))`.
    pub step: Option<f64>,
    /// Iteration cap; `None` means `64 dim^2`.
    pub max_steps: Option<u64>,
    /// Constraints become tight at `(1 - tight_margin)` of their budget.
    pub tight_margin: f64,
    /// Coordinates this close to `+-1` are snapped.
    pub snap_tol: f64,
    /// Extra attempts with fresh seeds before giving up.
    pub retries: u32,
    /// Full colouring rounds directly once the dimension is this small.
    pub base_case_dim: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            step: None,
            max_steps: None,
            tight_margin: 1e-3,
            snap_tol: 1e-6,
            retries: 3,
            base_case_dim: 900,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Colouring {
    pub x: Vec<f64>,
    pub seed: u64,
    /// Number of recursion levels used (1 for a partial colouring).
    pub levels: u32,
}

impl Colouring {
    pub fn to_file(&self, verified: bool) -> ColouringFile {
        ColouringFile { x: self.x.clone(), seed: self.seed, verified }
    }

    pub fn frozen_count(&self) -> usize {
        self.x.iter().filter(|v| v.abs() == 1.0).count()
    }
}

/// Relative tolerance when checking discrepancy bounds.
const VERIFY_REL_TOL: f64 = 1e-6;

/// `x in [-1,1]^dim` with at least half the coordinates at `+-1` and
/// `|<x - x0, v_j>| <= c_j ||v_j||_2` for every constraint.
pub fn partial_colour(inst: &DiscInstance, cfg: &WalkConfig, seed: u64) -> Result<Colouring> {
    check_budget(&inst.budgets, inst.dim(), BudgetKind::Partial)?;
    let split = SeedSplitter::new(seed);
    let x = walk_with_retries(inst.system.as_ref(), &inst.budgets, &inst.start, cfg, &split)?;
    Ok(Colouring { x, seed, levels: 1 })
}

/// `x in {-1,1}^dim` with `|<x - x0, v_j>| <= (c_j + 30) sqrt(dim) ||v_j||_inf`.
pub fn full_colour(inst: &DiscInstance, cfg: &WalkConfig, seed: u64) -> Result<Colouring> {
    check_budget(&inst.budgets, inst.dim(), BudgetKind::Full)?;
    let root = SeedSplitter::new(seed);
    let mut last = String::new();
    for attempt in 0..=cfg.retries {
        let split = root.child("full", attempt as u64);
        match full_rec(inst.system.as_ref(), &inst.budgets, &inst.start, cfg, &split, 1) {
            Ok((x, levels)) => match verify_full(inst, &x) {
                Ok(()) => return Ok(Colouring { x, seed, levels }),
                Err(e) => last = e.to_string(),
            },
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::SolverFailure { attempts: cfg.retries + 1, reason: last })
}

fn full_rec(
    sys: &dyn ConstraintSystem,
    c: &[f64],
    x0: &[f64],
    cfg: &WalkConfig,
    split: &SeedSplitter,
    level: u32,
) -> Result<(Vec<f64>, u32)> {
    let dim = sys.dim();
    if dim <= cfg.base_case_dim {
        let mut rng = split.rng("tie", 0);
        let x = x0
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        return Ok((x, level));
    }
    let b: Vec<f64> = c.iter().map(|v| 2.0 * v / 7.0).collect();
    let y = walk_with_retries(sys, &b, x0, cfg, &split.child("partial", 0))?;
    let half = dim.div_ceil(2);
    let mut fixed = 0;
    let mut rest = Vec::with_capacity(dim - half);
    for (i, v) in y.iter().enumerate() {
        if fixed < half && v.abs() == 1.0 {
            fixed += 1;
        } else {
            rest.push(i);
        }
    }
    if fixed < half {
        return Err(Error::SolverFailure {
            attempts: 1,
            reason: format!("partial colouring froze {fixed} of {dim} coordinates"),
        });
    }
    let grow = 196.0 * (dim as f64 / (dim / 2) as f64).ln();
    let a: Vec<f64> = c.iter().map(|v| (v * v + grow).sqrt()).collect();
    let sub = sys.restrict(&rest);
    let sub_x0: Vec<f64> = rest.iter().map(|&i| y[i]).collect();
    let (z, levels) = full_rec(sub.as_ref(), &a, &sub_x0, cfg, &split.child("level", level as u64), level + 1)?;
    let mut x = y;
    for (k, &i) in rest.iter().enumerate() {
        x[i] = z[k];
    }
    Ok((x, levels))
}

fn walk_with_retries(
    sys: &dyn ConstraintSystem,
    budgets: &[f64],
    x0: &[f64],
    cfg: &WalkConfig,
    split: &SeedSplitter,
) -> Result<Vec<f64>> {
    let mut last = String::new();
    for attempt in 0..=cfg.retries {
        let mut rng = split.rng("walk", attempt as u64);
        match edge_walk(sys, budgets, x0, cfg, &mut rng) {
            Ok(x) => match verify_partial(sys, budgets, x0, &x) {
                Ok(()) => return Ok(x),
                Err(e) => last = e,
            },
            Err(e) => last = e,
        }
    }
    Err(Error::SolverFailure { attempts: cfg.retries + 1, reason: last })
}

fn verify_partial(sys: &dyn ConstraintSystem, budgets: &[f64], x0: &[f64], x: &[f64]) -> std::result::Result<(), String> {
    let dim = sys.dim();
    if x.iter().any(|v| v.abs() > 1.0) {
        return Err("coordinate outside [-1, 1]".into());
    }
    let frozen = x.iter().filter(|v| v.abs() == 1.0).count();
    if 2 * frozen < dim {
        return Err(format!("only {frozen} of {dim} coordinates at +-1"));
    }
    let norms = sys.norms2();
    let bounds: Vec<f64> = budgets.iter().zip(&norms).map(|(c, n)| c * n).collect();
    check_bounds(sys, x0, x, &bounds)
}

/// Checks `|<x - x0, v_j>| <= bounds[j]`, rechecking apparent failures with
/// compensated sums on the materialised row.
fn check_bounds(sys: &dyn ConstraintSystem, x0: &[f64], x: &[f64], bounds: &[f64]) -> std::result::Result<(), String> {
    let diff: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let mut d = vec![0.0; sys.len()];
    sys.apply(&diff, &mut d);
    let mut row = vec![0.0; sys.dim()];
    for (j, (&dj, &bj)) in d.iter().zip(bounds).enumerate() {
        if dj.abs() <= bj * (1.0 + VERIFY_REL_TOL) + 1e-12 {
            continue;
        }
        sys.row(j, &mut row);
        let exact = dot_compensated(&row, &diff);
        if exact.abs() > bj * (1.0 + VERIFY_REL_TOL) + 1e-12 {
            return Err(format!("constraint {j}: |<x - x0, v>| = {exact:e} exceeds {bj:e}"));
        }
    }
    Ok(())
}

fn verify_full(inst: &DiscInstance, x: &[f64]) -> std::result::Result<(), String> {
    if x.iter().any(|v| v.abs() != 1.0) {
        return Err("full colouring has a coordinate not in {-1, 1}".into());
    }
    let sys = inst.system.as_ref();
    let rd = (inst.dim() as f64).sqrt();
    let lower = sys.norms_inf_lower();
    let bounds: Vec<f64> = inst.budgets.iter().zip(&lower).map(|(c, l)| (c + 30.0) * rd * l).collect();
    if check_bounds(sys, &inst.start, x, &bounds).is_ok() {
        return Ok(());
    }
    // the lower bounds were too weak somewhere; fall back to exact norms
    let exact: Vec<f64> = inst
        .budgets
        .iter()
        .enumerate()
        .map(|(j, c)| (c + 30.0) * rd * sys.norm_inf(j))
        .collect();
    check_bounds(sys, &inst.start, x, &exact)
}

/// Public check of the full-colouring guarantee, for callers holding an
/// instance and a candidate colouring.
pub fn verify_full_colouring(inst: &DiscInstance, x: &[f64]) -> Result<()> {
    verify_full(inst, x).map_err(Error::Verification)
}

pub fn verify_partial_colouring(inst: &DiscInstance, x: &[f64]) -> Result<()> {
    verify_partial(inst.system.as_ref(), &inst.budgets, &inst.start, x).map_err(Error::Verification)
}

enum Hit {
    None,
    Coord(usize),
    Near(usize),
}

fn edge_walk(
    sys: &dyn ConstraintSystem,
    budgets: &[f64],
    x0: &[f64],
    cfg: &WalkConfig,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<f64>, String> {
    let dim = sys.dim();
    let m = sys.len();
    let mut x = x0.to_vec();
    let mut frozen = vec![false; dim];
    let mut n_frozen = 0;
    for (i, v) in x.iter_mut().enumerate() {
        if v.abs() >= 1.0 - cfg.snap_tol {
            *v = v.signum();
            frozen[i] = true;
            n_frozen += 1;
        }
    }
    let target = dim.div_ceil(2);
    if n_frozen >= target {
        return Ok(x);
    }
    let norms = sys.norms2();
    let th: Vec<f64> = budgets
        .iter()
        .zip(&norms)
        .map(|(c, n)| c * n * (1.0 - cfg.tight_margin))
        .collect();
    let step = cfg.step.unwrap_or(1.0 / (8.0 * (dim as f64).sqrt()));
    let cap = cfg.max_steps.unwrap_or(64 * (dim as u64).pow(2));
    let r_near = (8.0 * step * (dim as f64).sqrt()).max(1e-9);

    let mut is_tight = vec![false; m];
    let mut tight_rows: Vec<Vec<f64>> = Vec::new();
    let mut near: Vec<usize> = Vec::new();
    let mut near_rows: Vec<Vec<f64>> = Vec::new();
    let mut near_d: Vec<f64> = Vec::new();
    let mut near_dd: Vec<f64> = Vec::new();
    let mut x_ref = x.clone();
    let mut safe = -1.0f64;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut basis_dirty = true;
    let mut d_all = vec![0.0; m];
    let mut diff = vec![0.0; dim];
    let mut g = vec![0.0; dim];

    for _ in 0..cap {
        if n_frozen >= target {
            break;
        }
        let disp2: f64 = x.iter().zip(&x_ref).map(|(a, b)| (a - b) * (a - b)).sum();
        if disp2.sqrt() >= safe {
            for i in 0..dim {
                diff[i] = x[i] - x0[i];
            }
            sys.apply(&diff, &mut d_all);
            near.clear();
            near_rows.clear();
            near_d.clear();
            safe = f64::INFINITY;
            for j in 0..m {
                if is_tight[j] || norms[j] == 0.0 {
                    continue;
                }
                if d_all[j].abs() >= th[j] {
                    is_tight[j] = true;
                    let mut r = vec![0.0; dim];
                    sys.row(j, &mut r);
                    tight_rows.push(r);
                    basis_dirty = true;
                    continue;
                }
                let rho = (th[j] - d_all[j].abs()) / norms[j];
                if rho < r_near {
                    let mut r = vec![0.0; dim];
                    sys.row(j, &mut r);
                    near.push(j);
                    near_rows.push(r);
                    near_d.push(d_all[j]);
                } else {
                    safe = safe.min(rho);
                }
            }
            near_dd.resize(near.len(), 0.0);
            x_ref.copy_from_slice(&x);
        }
        if basis_dirty {
            basis = orthonormal_basis(&tight_rows, &frozen);
            basis_dirty = false;
        }
        let free = dim - n_frozen;
        if free <= basis.len() {
            return Err(format!(
                "walk stuck with {free} free coordinates and {} tight constraints",
                basis.len()
            ));
        }
        for i in 0..dim {
            g[i] = if frozen[i] { 0.0 } else { rng.sample(StandardNormal) };
        }
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&g, b);
                for (gi, bi) in g.iter_mut().zip(b) {
                    *gi -= c * bi;
                }
            }
        }
        let gn = dot(&g, &g).sqrt();
        if !(gn > 1e-12 * (free as f64).sqrt()) {
            return Err("walk direction vanished".into());
        }
        for v in g.iter_mut() {
            *v *= step;
        }
        let mut tau = 1.0f64;
        let mut hit = Hit::None;
        for i in 0..dim {
            if frozen[i] || g[i] == 0.0 {
                continue;
            }
            let ti = if g[i] > 0.0 { (1.0 - x[i]) / g[i] } else { (-1.0 - x[i]) / g[i] };
            if ti < tau {
                tau = ti.max(0.0);
                hit = Hit::Coord(i);
            }
        }
        for k in 0..near.len() {
            let dd = dot(&g, &near_rows[k]);
            near_dd[k] = dd;
            if dd == 0.0 {
                continue;
            }
            let d = near_d[k];
            let thj = th[near[k]];
            let tk = if d * dd >= 0.0 { (thj - d.abs()) / dd.abs() } else { (thj + d.abs()) / dd.abs() };
            if tk < tau {
                tau = tk.max(0.0);
                hit = Hit::Near(k);
            }
        }
        for i in 0..dim {
            if !frozen[i] {
                x[i] += tau * g[i];
            }
        }
        for k in 0..near.len() {
            near_d[k] += tau * near_dd[k];
        }
        match hit {
            Hit::Coord(i) => {
                x[i] = if g[i] > 0.0 { 1.0 } else { -1.0 };
            }
            Hit::Near(k) => {
                let j = near.swap_remove(k);
                let r = near_rows.swap_remove(k);
                near_d.swap_remove(k);
                near_dd.swap_remove(k);
                is_tight[j] = true;
                tight_rows.push(r);
                basis_dirty = true;
            }
            Hit::None => {}
        }
        for i in 0..dim {
            if !frozen[i] && x[i].abs() >= 1.0 - 1e-12 {
                x[i] = x[i].signum();
                frozen[i] = true;
                n_frozen += 1;
                basis_dirty = true;
            }
        }
    }
    if n_frozen < target {
        return Err(format!("iteration cap reached with {n_frozen} of {dim} coordinates frozen"));
    }
    for v in x.iter_mut() {
        if v.abs() >= 1.0 - cfg.snap_tol {
            *v = v.signum();
        }
    }
    Ok(x)
}

/// Orthonormal basis of the rows restricted to unfrozen coordinates.
fn orthonormal_basis(rows: &[Vec<f64>], frozen: &[bool]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v: Vec<f64> = r
            .iter()
            .zip(frozen)
            .map(|(&a, &f)| if f { 0.0 } else { a })
            .collect();
        let orig = dot(&v, &v).sqrt();
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-9 * orig {
            for vi in v.iter_mut() {
                *vi /= nv;
            }
            basis.push(v);
        }
    }
    basis
}
