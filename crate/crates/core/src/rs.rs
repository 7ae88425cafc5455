//! Rudin–Shapiro sign sequences and direct evaluation on the unit circle.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{cis, CompensatedComplex};

/// Largest `t` accepted by [`rs_pair`] unless a caller raises it.
pub const DEFAULT_MAX_T: u32 = 30;

/// Sequences longer than this are summed with compensation.
const COMPENSATE_ABOVE: usize = 1 << 12;
const BLOCK: usize = 1024;

/// Finite sequence of signs, coefficient `k` multiplying `z^(offset + k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignSeq {
    coeffs: Vec<i8>,
    offset: i64,
}

impl SignSeq {
    pub fn new(coeffs: Vec<i8>, offset: i64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("sign sequence must be non-empty".into()));
        }
        if let Some(k) = coeffs.iter().position(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidConfig(format!(
                "coefficient {k} is {}, expected +1 or -1",
                coeffs[k]
            )));
        }
        Ok(Self { coeffs, offset })
    }

    pub fn from_signs(coeffs: Vec<i8>) -> Result<Self> {
        Self::new(coeffs, 0)
    }

    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<i8> {
        self.coeffs
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree span `len - 1`; equals the degree when the offset is zero.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn prefix(&self, n: usize) -> Result<SignSeq> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidConfig(format!(
                "prefix length {n} outside 1..={}",
                self.len()
            )));
        }
        Ok(SignSeq {
            coeffs: self.coeffs[..n].to_vec(),
            offset: self.offset,
        })
    }

    /// `'+'`/`'-'` line in ascending degree, without the trailing newline.
    pub fn to_line(&self) -> String {
        self.coeffs
            .iter()
            .map(|&c| if c > 0 { '+' } else { '-' })
            .collect()
    }

    /// Parses a `'+'`/`'-'` line. One trailing LF is accepted.
    pub fn parse_line(text: &str) -> Result<SignSeq> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Err(Error::Parse {
                offset: 0,
                msg: "empty sign sequence".into(),
            });
        }
        let mut coeffs = Vec::with_capacity(body.len());
        for (i, b) in body.bytes().enumerate() {
            match b {
                b'+' => coeffs.push(1),
                b'-' => coeffs.push(-1),
                _ => {
                    return Err(Error::Parse {
                        offset: i,
                        msg: format!("unexpected byte 0x{b:02x}, expected '+' or '-'"),
                    })
                }
            }
        }
        Ok(SignSeq { coeffs, offset: 0 })
    }
}

impl fmt::Display for SignSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// Angle on the unit circle, kept reduced to `[0, 2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitCirclePoint {
    theta: f64,
}

impl UnitCirclePoint {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidConfig(format!("angle {theta} is not finite")));
        }
        let mut r = theta.rem_euclid(TAU);
        if r >= TAU {
            r = 0.0;
        }
        Ok(Self { theta: r })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn z(&self) -> Complex64 {
        cis(self.theta)
    }
}

/// The pair `(P_t, Q_t)`, each of length `2^t`.
pub fn rs_pair(t: u32) -> Result<(SignSeq, SignSeq)> {
    rs_pair_with_limit(t, DEFAULT_MAX_T)
}

pub fn rs_pair_with_limit(t: u32, max_t: u32) -> Result<(SignSeq, SignSeq)> {
    if t > max_t {
        return Err(Error::Capacity {
            what: "Rudin-Shapiro order t".into(),
            requested: t as u128,
            limit: max_t as u128,
        });
    }
    let (p, q) = rs_vectors(t);
    Ok((SignSeq { coeffs: p, offset: 0 }, SignSeq { coeffs: q, offset: 0 }))
}

pub(crate) fn rs_vectors(t: u32) -> (Vec<i8>, Vec<i8>) {
    let full = 1usize << t;
    let mut p = Vec::with_capacity(full);
    let mut q = Vec::with_capacity(full);
    p.push(1i8);
    q.push(1i8);
    for _ in 0..t {
        let len = p.len();
        // P' = P ++ Q and Q' = P ++ (-Q)
        p.extend_from_slice(&q);
        for i in 0..len {
            let c = q[i];
            q.push(-c);
        }
        q[..len].copy_from_slice(&p[..len]);
    }
    (p, q)
}

/// First `n` coefficients of `P_t` for the least `t` with `2^t >= n`.
pub fn rs_truncated(n: usize) -> Result<SignSeq> {
    if n == 0 {
        return Err(Error::InvalidConfig("truncation length must be positive".into()));
    }
    let t = n.next_power_of_two().trailing_zeros();
    let (mut p, _) = rs_pair(t).map(|(p, q)| (p.into_coeffs(), q))?;
    p.truncate(n);
    Ok(SignSeq { coeffs: p, offset: 0 })
}

/// `sum_k s_k z^(offset + k)`.
pub fn eval_seq(s: &SignSeq, z: UnitCirclePoint) -> Complex64 {
    let theta = z.theta();
    let v = eval_signs(&s.coeffs, theta);
    if s.offset == 0 {
        v
    } else {
        v * cis((s.offset as f64) * theta)
    }
}

/// `sum_k c_k e^{ik theta}` for a sign vector, blocked so that only
/// `O(len / BLOCK)` complex multiplications are needed.
pub(crate) fn eval_signs(c: &[i8], theta: f64) -> Complex64 {
    eval_signs_impl::<false>(c, theta).0
}

/// Value and angular derivative `d/dtheta` of `sum_k c_k e^{ik theta}`.
pub(crate) fn eval_signs_with_derivative(c: &[i8], theta: f64) -> (Complex64, Complex64) {
    eval_signs_impl::<true>(c, theta)
}

/// `sum_r c_r w_r` with independent lanes so the adds can overlap.
fn block_sum(c: &[i8], w: &[Complex64]) -> (f64, f64) {
    const LANES: usize = 8;
    let mut re = [0.0f64; LANES];
    let mut im = [0.0f64; LANES];
    let mut cs = c.chunks_exact(LANES);
    let mut ws = w[..c.len()].chunks_exact(LANES);
    for (cc, wc) in (&mut cs).zip(&mut ws) {
        for l in 0..LANES {
            let s = cc[l] as f64;
            re[l] += s * wc[l].re;
            im[l] += s * wc[l].im;
        }
    }
    let (mut r, mut i) = (re.iter().sum::<f64>(), im.iter().sum::<f64>());
    for (&s, w) in cs.remainder().iter().zip(ws.remainder()) {
        r += s as f64 * w.re;
        i += s as f64 * w.im;
    }
    (r, i)
}

fn eval_signs_impl<const DERIV: bool>(c: &[i8], theta: f64) -> (Complex64, Complex64) {
    let b = BLOCK.min(c.len());
    let table: Vec<Complex64> = (0..b).map(|r| cis(r as f64 * theta)).collect();
    let compensate = c.len() > COMPENSATE_ABOVE;
    let mut val = CompensatedComplex::new();
    let mut der = CompensatedComplex::new();
    let mut plain_val = Complex64::new(0.0, 0.0);
    let mut plain_der = Complex64::new(0.0, 0.0);
    for (bi, chunk) in c.chunks(BLOCK).enumerate() {
        let (mut kre, mut kim) = (0.0f64, 0.0f64);
        let (re, im) = if DERIV {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (r, (&s, w)) in chunk.iter().zip(&table).enumerate() {
                let s = s as f64;
                re += s * w.re;
                im += s * w.im;
                kre += s * r as f64 * w.re;
                kim += s * r as f64 * w.im;
            }
            (re, im)
        } else {
            block_sum(chunk, &table)
        };
        let base = bi * BLOCK;
        let factor = if base == 0 { Complex64::new(1.0, 0.0) } else { cis(base as f64 * theta) };
        let blockv = factor * Complex64::new(re, im);
        let blockd = if DERIV {
            // d/dtheta of e^{ik theta} is i k e^{ik theta}
            let kb = Complex64::new(re, im) * base as f64 + Complex64::new(kre, kim);
            factor * kb * Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        if compensate {
            val.add(blockv);
            der.add(blockd);
        } else {
            plain_val += blockv;
            plain_der += blockd;
        }
    }
    if compensate {
        (val.value(), der.value())
    } else {
        (plain_val, plain_der)
    }
}

/// Largest `| |P_t|^2 + |Q_t|^2 - 2^{t+1} |` over the given angles.
pub fn check_norm_identity(t: u32, thetas: &[f64]) -> Result<f64> {
    let (p, q) = rs_pair(t)?;
    let target = (1u64 << (t + 1)) as f64;
    let devs = thetas
        .par_iter()
        .map(|&th| {
            let z = UnitCirclePoint::new(th)?;
            Ok((eval_seq(&p, z).norm_sqr() + eval_seq(&q, z).norm_sqr() - target).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(s: &SignSeq) -> String {
        s.to_line()
    }

    /// Closed form: the k-th coefficient of P is (-1)^(number of "11" blocks in k).
    fn closed_form(k: usize) -> i8 {
        if (k & (k >> 1)).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    fn naive(c: &[i8], theta: f64) -> Complex64 {
        c.iter()
            .enumerate()
            .map(|(k, &s)| cis(k as f64 * theta) * s as f64)
            .sum()
    }

    #[test]
    fn small_cases() {
        let (p, q) = rs_pair(2).unwrap();
        assert_eq!(line(&p), "+++-");
        assert_eq!(line(&q), "++-+");
        let (p3, _) = rs_pair(3).unwrap();
        assert_eq!(line(&p3), "+++-++-+");
        let (p0, q0) = rs_pair(0).unwrap();
        assert_eq!(line(&p0), "+");
        assert_eq!(line(&q0), "+");
    }

    #[test]
    fn truncation() {
        assert_eq!(rs_truncated(3).unwrap().to_line(), "+++");
        assert_eq!(rs_truncated(1).unwrap().to_line(), "+");
        assert_eq!(rs_truncated(5).unwrap().to_line(), "+++-+");
        assert!(rs_truncated(0).is_err());
    }

    #[test]
    fn capacity_limit() {
        assert!(matches!(rs_pair(31), Err(Error::Capacity { .. })));
        assert!(rs_pair_with_limit(5, 4).is_err());
    }

    #[test]
    fn matches_closed_form() {
        let (p, _) = rs_pair(12).unwrap();
        for (k, &c) in p.coeffs().iter().enumerate() {
            assert_eq!(c, closed_form(k), "coefficient {k}");
        }
    }

    #[test]
    fn values_at_plus_minus_one() {
        // the sign pattern at -1 starts with t = 1; P_0 = Q_0 = 1
        for t in 1..12u32 {
            let (p, q) = rs_pair(t).unwrap();
            let one = UnitCirclePoint::new(0.0).unwrap();
            let minus = UnitCirclePoint::new(std::f64::consts::PI).unwrap();
            let (p1, pm) = (eval_seq(&p, one).re, eval_seq(&p, minus).re);
            let (q1, qm) = (eval_seq(&q, one).re, eval_seq(&q, minus).re);
            let h = t / 2;
            let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
            if t % 2 == 0 {
                let v = (1u64 << h) as f64;
                assert!(close(p1, v) && close(pm, v) && close(q1, v) && close(qm, -v), "t={t}");
            } else {
                let v = (1u64 << (h + 1)) as f64;
                assert!(close(p1, v) && close(qm, v) && close(pm, 0.0) && close(q1, 0.0), "t={t}");
            }
        }
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let s = SignSeq::parse_line("+-+\n").unwrap();
        assert_eq!(s.coeffs(), &[1, -1, 1]);
        assert_eq!(SignSeq::parse_line(&s.to_line()).unwrap(), s);
        match SignSeq::parse_line("++x-") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SignSeq::parse_line("\n").is_err());
    }

    #[test]
    fn rejects_non_signs() {
        assert!(SignSeq::new(vec![1, 0], 0).is_err());
        assert!(SignSeq::new(vec![], 0).is_err());
    }

    #[test]
    fn offset_shifts_phase_only() {
        let s = SignSeq::new(vec![1, -1, 1, 1], 3).unwrap();
        let z = UnitCirclePoint::new(0.7).unwrap();
        let base = naive(s.coeffs(), 0.7) * cis(2.1);
        assert!((eval_seq(&s, z) - base).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn norm_identity_holds(t in 0u32..14, theta in 0.0f64..TAU) {
            let dev = check_norm_identity(t, &[theta]).unwrap();
            prop_assert!(dev <= (1u64 << (t + 1)) as f64 * 1e-9);
        }

        #[test]
        fn blocked_sum_matches_naive(len in 1usize..5000, theta in -10.0f64..10.0, seed in any::<u64>()) {
            let c: Vec<i8> = (0..len).map(|k| if (seed >> (k % 64)) & 1 == 1 { 1 } else { -1 }).collect();
            let a = eval_signs(&c, theta);
            let b = naive(&c, theta);
            prop_assert!((a - b).norm() <= 1e-9 * (len as f64).sqrt().max(1.0));
            let (v, d) = eval_signs_with_derivative(&c, theta);
            let dn: Complex64 = c.iter().enumerate()
                .map(|(k, &s)| cis(k as f64 * theta) * Complex64::new(0.0, k as f64) * s as f64)
                .sum();
            prop_assert!((v - b).norm() <= 1e-9 * (len as f64).sqrt().max(1.0));
            prop_assert!((d - dn).norm() <= 1e-9 * (len as f64).powf(1.5));
        }

        #[test]
        fn prefix_of_longer_pair_is_shorter_pair(t in 0u32..10, extra in 1u32..4) {
            let (p, _) = rs_pair(t).unwrap();
            let (pl, _) = rs_pair(t + extra).unwrap();
            prop_assert_eq!(&pl.coeffs()[..p.len()], p.coeffs());
        }
    }
}
