//! Cross-module properties of the construction.

use std::f64::consts::PI;

use lforge_core::cosine::BuildConfig;
use lforge_core::discrepancy::{budget_sum, BudgetKind};
use lforge_core::intervals::{classify_intervals, validate_family};
use lforge_core::pipeline::{run_build, PipelineConfig};
use lforge_core::sine::{eval_s_hat, interval_sine_integral, taylor_constraints, FractionalStart, TaylorGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_start(n: usize, seed: u64) -> FractionalStart {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FractionalStart { eps_hat: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), push_amplitude: 1.0 }
}

#[test]
fn built_polynomial_has_the_centred_symmetries() {
    let pc = PipelineConfig::new(BuildConfig::scaled_default(256).unwrap(), 3);
    let out = run_build(&pc).unwrap();
    let p = &out.laurent;
    assert_eq!(p.coeff(0), 1);
    for k in 1..=512i64 {
        let mirrored = out.cosine.sign(k as u64).is_some();
        let expect = if mirrored { p.coeff(k) } else { -p.coeff(k) };
        assert_eq!(p.coeff(-k), expect, "k = {k}");
    }
    // real part is 1 + 2c, imaginary part 2(s_e + s_o)
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..32 {
        let th = rng.gen_range(0.0..2.0 * PI);
        let v = p.eval(th);
        assert!((v.re - 1.0 - 2.0 * out.cosine.eval(th)).abs() < 1e-8);
        assert!((v.im - 2.0 * (out.even_sine.eval(th) + out.odd_sine.eval(th))).abs() < 1e-8);
    }
}

#[test]
fn odd_part_stays_close_to_its_start() {
    // |s_o - s_hat| <= 72 sqrt(n) on a dense grid
    let pc = PipelineConfig::new(BuildConfig::scaled_default(256).unwrap(), 5);
    let out = run_build(&pc).unwrap();
    let n = 256.0f64;
    let mut worst = 0.0f64;
    for i in 0..20_000 {
        let th = i as f64 * 2.0 * PI / 20_000.0;
        worst = worst.max((out.odd_sine.eval(th) - eval_s_hat(&out.start, th, 0)).abs());
    }
    assert!(worst <= 72.0 * n.sqrt(), "{worst}");
}

#[test]
fn taylor_budgets_match_the_structure() {
    for n in [256usize, 1024, 4096] {
        let grid = TaylorGrid::new(n).unwrap();
        let inst = taylor_constraints(&FractionalStart { eps_hat: vec![0.0; n], push_amplitude: 0.0 }, &grid).unwrap();
        let sum = budget_sum(&inst.budgets, BudgetKind::Full);
        // each order contributes M 2^-(9 + ell); the untruncated total is n/16
        let expect: f64 = (0..=grid.ell_max).map(|l| grid.points as f64 * 2f64.powi(-(9 + l as i32))).sum();
        assert!((sum - expect).abs() <= 1e-9 * expect);
        assert!(sum <= n as f64 / 16.0);
    }
}

#[test]
fn taylor_rows_are_bounded_by_powers_of_2n() {
    let n = 64;
    let grid = TaylorGrid { n, points: 16 * n, ell_max: 6 };
    let inst = taylor_constraints(&random_start(n, 1), &grid).unwrap();
    let scale = (2 * n - 1) as f64;
    for r in (0..inst.system.len()).step_by(97) {
        let (ell, _) = grid.locate(r);
        // rows are stored divided by (2n-1)^ell
        let sup = inst.system.norm_inf(r) * scale.powi(ell as i32);
        assert!(sup <= (2.0 * n as f64).powi(ell as i32) * (1.0 + 1e-12));
    }
}

#[test]
fn structural_family_is_invariant() {
    let cfg = BuildConfig::structural(1, 6).unwrap();
    let cls = classify_intervals(&cfg).unwrap();
    let fam = &cls.family;
    let n = fam.n();
    let cov = fam.coverage();
    for j in 0..2 * n {
        let orbit = [j, (n - 1 + 2 * n - j) % (2 * n), (n + j) % (2 * n), 2 * n - 1 - j];
        assert!(orbit.iter().all(|&o| cov[o as usize] == cov[j as usize]), "cell {j}");
    }
    let bad = validate_family(fam, &cfg);
    assert_eq!(bad, cls.violations);
}

proptest! {
    #[test]
    fn s_hat_symmetries(seed in 0u64..200, th in -4.0f64..4.0) {
        let s = random_start(40, seed);
        let v = eval_s_hat(&s, th, 0);
        prop_assert!((eval_s_hat(&s, PI - th, 0) - v).abs() < 1e-9);
        prop_assert!((eval_s_hat(&s, PI + th, 0) + v).abs() < 1e-9);
    }

    #[test]
    fn alpha_row_entries_bounded(a in 0i64..4000, len in 1i64..7, j in 1u64..3000) {
        // |4 sqrt(n) int_I sin| <= 4 sqrt(n) |I| <= 24 pi / sqrt(n)
        let n = 2000u64;
        let arc = lforge_core::intervals::LatticeArc::new(a, a + len);
        let v = 4.0 * (n as f64).sqrt() * interval_sine_integral(arc, n, 2 * j - 1).abs();
        prop_assert!(v <= 24.0 * PI / (n as f64).sqrt() + 1e-12);
    }
}
