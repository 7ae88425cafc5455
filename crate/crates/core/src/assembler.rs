//! Assembly of the centred Laurent polynomial
//! `P(e^{i theta}) = 1 + 2c(theta) + 2i(s_e(theta) + s_o(theta))` and its
//! standard re-indexing.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cosine::{TrigKind, TrigPoly};
use crate::error::{Error, Result};
use crate::rs::{eval_signs, SignSeq};

/// Number of random angles used to check the assembly identity.
const IDENTITY_POINTS: usize = 64;
const IDENTITY_SEED: u64 = 0x6c66_6f72_6765;
const MAX_PAD: usize = 3;
/// Offending frequencies listed in an assembly error.
const MAX_LISTED: usize = 16;

/// `sum_{k=-2n}^{2n} eps_k z^k`, stored with `eps[k + 2n]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentLittlewood {
    pub n: u64,
    pub eps: Vec<i8>,
}

impl LaurentLittlewood {
    pub fn new(n: u64, eps: Vec<i8>) -> Result<Self> {
        if eps.len() as u64 != 4 * n + 1 {
            return Err(Error::Assembly(format!(
                "expected {} coefficients for n = {n}, got {}",
                4 * n + 1,
                eps.len()
            )));
        }
        if let Some(i) = eps.iter().position(|&e| e != 1 && e != -1) {
            return Err(Error::Assembly(format!("coefficient at index {i} is {}", eps[i])));
        }
        Ok(Self { n, eps })
    }

    /// `eps_k` for `k` in `[-2n, 2n]`.
    pub fn coeff(&self, k: i64) -> i8 {
        self.eps[(k + 2 * self.n as i64) as usize]
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        let lead = Complex64::from_polar(1.0, -(2.0 * self.n as f64) * theta);
        lead * eval_signs(&self.eps, theta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LaurentLittlewood = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: crate::discrepancy::json_offset(text, &e),
            msg: e.to_string(),
        })?;
        Self::new(raw.n, raw.eps)
    }
}

fn list(freqs: &[u64]) -> String {
    let mut s = freqs
        .iter()
        .take(MAX_LISTED)
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if freqs.len() > MAX_LISTED {
        s.push_str(&format!(", ... ({} total)", freqs.len()));
    }
    s
}

/// Combines the cosine part and the two sine parts. Their supports must
/// partition `{1, ..., 2n}`.
pub fn assemble(c: &TrigPoly, s_e: &TrigPoly, s_o: &TrigPoly, n: u64) -> Result<LaurentLittlewood> {
    if c.kind() != TrigKind::Cosine || s_e.kind() != TrigKind::Sine || s_o.kind() != TrigKind::Sine {
        return Err(Error::Assembly("expected one cosine and two sine polynomials".into()));
    }
    let top = 2 * n;
    let mut eps = vec![0i8; (4 * n + 1) as usize];
    let mid = top as usize;
    eps[mid] = 1;
    let mut overlap = Vec::new();
    let mut outside = Vec::new();
    let parts = [(c, 1i8), (s_e, -1), (s_o, -1)];
    for (p, mirror) in parts {
        for (f, s) in p.terms() {
            if f > top {
                outside.push(f);
                continue;
            }
            let i = f as usize;
            if eps[mid + i] != 0 {
                overlap.push(f);
                continue;
            }
            eps[mid + i] = s;
            eps[mid - i] = mirror * s;
        }
    }
    let gaps: Vec<u64> = (1..=top).filter(|&k| eps[mid + k as usize] == 0).collect();
    if !(overlap.is_empty() && outside.is_empty() && gaps.is_empty()) {
        overlap.sort_unstable();
        let mut msg = Vec::new();
        if !overlap.is_empty() {
            msg.push(format!("overlapping frequencies [{}]", list(&overlap)));
        }
        if !outside.is_empty() {
            msg.push(format!("frequencies above 2n = {top}: [{}]", list(&outside)));
        }
        if !gaps.is_empty() {
            msg.push(format!("missing frequencies [{}]", list(&gaps)));
        }
        return Err(Error::Assembly(msg.join("; ")));
    }
    let p = LaurentLittlewood::new(n, eps)?;
    check_identity(&p, c, s_e, s_o)?;
    Ok(p)
}

fn check_identity(p: &LaurentLittlewood, c: &TrigPoly, s_e: &TrigPoly, s_o: &TrigPoly) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(IDENTITY_SEED);
    let scale = (p.eps.len() as f64).max(1.0);
    for _ in 0..IDENTITY_POINTS {
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let want = Complex64::new(1.0 + 2.0 * c.eval(th), 2.0 * (s_e.eval(th) + s_o.eval(th)));
        let got = p.eval(th);
        if (got - want).norm() > 1e-9 * scale {
            return Err(Error::Assembly(format!(
                "identity fails at theta = {th}: {got} vs {want}"
            )));
        }
    }
    Ok(())
}

/// Degree-`4n` sequence `q_k = eps_{k - 2n}`.
pub fn to_standard(p: &LaurentLittlewood) -> SignSeq {
    SignSeq::from_signs(p.eps.clone()).expect("Laurent coefficients are signs")
}

/// Appends `+1` coefficients up to `target_degree`, at most three.
pub fn pad_to_degree(q: &SignSeq, target_degree: usize) -> Result<SignSeq> {
    let deg = q.degree();
    if target_degree < deg {
        return Err(Error::InvalidConfig(format!(
            "target degree {target_degree} is below the current degree {deg}"
        )));
    }
    if target_degree - deg > MAX_PAD {
        return Err(Error::InvalidConfig(format!(
            "padding by {} exceeds {MAX_PAD}; rebuild at a larger n",
            target_degree - deg
        )));
    }
    let mut c = q.coeffs().to_vec();
    c.resize(target_degree + 1, 1);
    SignSeq::new(c, q.offset())
}
