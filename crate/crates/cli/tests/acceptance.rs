//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p lforge --test acceptance`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lforge_core::cosine::{scan_derivative_floor, scan_origin_floor, BuildConfig};
use lforge_core::discrepancy::{full_colour, ConstraintEntry, DiscInstance, InstanceFile, WalkConfig};
use lforge_core::intervals::{classify_intervals, validate_family};
use lforge_core::numeric::root_of_unity;
use lforge_core::pipeline::{run_build, PipelineConfig, SCALED_MIN_TARGET};
use lforge_core::rs::{check_norm_identity, rs_truncated, SignSeq};
use lforge_core::sine::{check_si_bounds, eval_s_hat, odd_kernel_identity_error};
use lforge_core::verifier::{certify_flatness, default_grid_size, eval_grid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let el = start.elapsed();
    match limit {
        Some(l) => {
            o.detail.push_str(&format!(" [{:.1}s, limit {}s]", el.as_secs_f64(), l.as_secs()));
            o.pass &= el <= l;
        }
        None => o.detail.push_str(&format!(" [{:.1}s]", el.as_secs_f64())),
    }
    o
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

/// Rudin–Shapiro norm identity for t = 1..=20 at 1024 angles.
fn c1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let thetas: Vec<f64> = (0..1024).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut worst = 0.0f64;
    let mut pass = true;
    for t in 1..=20 {
        let dev = check_norm_identity(t, &thetas).unwrap();
        let rel = dev / 2f64.powi(t as i32 + 1);
        worst = worst.max(rel);
        pass &= rel <= 1e-9;
    }
    Outcome { pass, detail: format!("worst relative deviation {worst:.2e} (tol 1e-9)") }
}

/// Certified max of truncated Rudin–Shapiro polynomials.
fn c2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2usize, 3, 5, 100, 1 << 10, 1 << 16] {
        let q = rs_truncated(n).unwrap();
        let r = certify_flatness(&q, default_grid_size(q.degree())).unwrap();
        // deg + 1 = n, so max_ratio is max |P| / sqrt(n)
        pass &= r.max_ratio <= 5.0;
        parts.push(format!("{n}:{:.3}", r.max_ratio));
    }
    Outcome { pass, detail: format!("certified max/sqrt(n) <= 5: {}", parts.join(" ")) }
}

/// Derivative floor and the two windows where Re H >= 1/2, shift 10.
fn c3() -> Outcome {
    let step = 1.0 / 1024.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [1u32, 3, 5] {
        let cfg = BuildConfig::structural(t, 13).unwrap();
        let scan = scan_derivative_floor(&cfg, step).unwrap();
        let cert = scan.certified_floor();
        pass &= cert >= 0.25 - 18.0 * step;
        // |d/dx Re H| <= |H'| <= 4
        let origin = scan_origin_floor(&cfg, step).unwrap() - 2.0 * step;
        pass &= origin >= 0.5;
        parts.push(format!("t={t}: floor {cert:.4} window {origin:.4}"));
    }
    Outcome {
        pass,
        detail: format!("need floor >= {:.4}, window >= 0.5; {}", 0.25 - 18.0 * step, parts.join(", ")),
    }
}

/// Clauses (a)-(f) for the structural family at gamma = 2^-13.
fn c4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [1u32, 3] {
        let cfg = BuildConfig::structural(t, 13).unwrap();
        let cls = classify_intervals(&cfg).unwrap();
        let bad = validate_family(&cls.family, &cfg);
        pass &= bad.is_empty() && cls.violations.is_empty();
        let list: Vec<String> = bad.iter().map(|c| c.to_string()).collect();
        parts.push(format!(
            "t={t} n={} arcs={} violations=[{}]",
            cfg.n,
            cls.family.base_len(),
            list.join(",")
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// 50 random instances with Taylor-like budgets, checked by direct products.
fn c5() -> Outcome {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let dim = [64usize, 256, 1024][i as usize % 3];
        // level ell gets about dim 2^(3 + ell) / (ell + 1)^2 rows, each
        // contributing 2^-(9 + ell); the total stays below dim/16
        let mut constraints = Vec::new();
        for ell in 0..8u32 {
            let rows = (dim as f64 * 2f64.powi(3 + ell as i32) / ((ell + 1) * (ell + 1)) as f64) as usize;
            let rows = rows.min(10_000 - constraints.len());
            let c = 14.0 * ((9 + ell) as f64 * std::f64::consts::LN_2).sqrt();
            for _ in 0..rows {
                let v: Vec<f64> = match rng.gen_range(0..3) {
                    0 => (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    1 => (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
                    _ => {
                        let f = rng.gen_range(1..2 * dim) as f64;
                        let th = rng.gen_range(0.0..PI);
                        (0..dim).map(|j| ((2 * j + 1) as f64 * th + f).sin()).collect()
                    }
                };
                constraints.push(ConstraintEntry { v, c });
            }
        }
        let x0: Vec<f64> = if i % 2 == 0 {
            vec![0.0; dim]
        } else {
            (0..dim).map(|_| rng.gen_range(-0.9..0.9)).collect()
        };
        let file = InstanceFile { dim, constraints: constraints.clone(), x0: Some(x0.clone()) };
        let inst = DiscInstance::from_json(&serde_json::to_string(&file).unwrap()).unwrap();
        let walk = WalkConfig { retries: 3, ..WalkConfig::default() };
        match full_colour(&inst, &walk, i) {
            Ok(col) => {
                let ok_signs = col.x.iter().all(|v| v.abs() == 1.0);
                let mut ok = ok_signs;
                for e in &constraints {
                    let d: f64 = e.v.iter().zip(col.x.iter().zip(&x0)).map(|(v, (x, y))| v * (x - y)).sum();
                    let bound = (e.c + 30.0) * (dim as f64).sqrt() * sup(&e.v);
                    worst = worst.max(d.abs() / bound);
                    ok &= d.abs() <= bound;
                }
                if !ok {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("50 instances, {failures} failures, worst |<x-x0,v>| / bound = {worst:.3}"),
    }
}

/// Sine-integral bounds on 10^4 random cases.
fn c6() -> Outcome {
    let mut worst = f64::INFINITY;
    for (i, n) in [16u64, 256, 4096, 65_536].into_iter().enumerate() {
        let r = check_si_bounds(n, 2500, 60 + i as u64, 1e-8).unwrap();
        worst = worst.min(r.worst_margin);
    }
    Outcome { pass: worst >= 0.0, detail: format!("10^4 cases, smallest margin to the allowed range {worst:.4}") }
}

fn c7() -> Outcome {
    let err = odd_kernel_identity_error(1000, 1 << 10, 7);
    Outcome { pass: err <= 1e-6, detail: format!("10^3 cases, max abs error {err:.2e} (tol 1e-6)") }
}

/// Taylor constraints of a full build at n = 1024, by direct evaluation.
fn c8() -> Outcome {
    let n = 1024usize;
    let pc = PipelineConfig::new(BuildConfig::scaled_default(n as u64).unwrap(), 1);
    let out = run_build(&pc).unwrap();
    let grid = out.taylor;
    let mut worst = 0.0f64;
    for ell in 0..=grid.ell_max {
        let target = grid.target(ell);
        for k in 1..=grid.points {
            let th = grid.theta(k);
            let d = out.odd_sine.eval_deriv(th, ell) - eval_s_hat(&out.start, th, ell);
            worst = worst.max(d.abs() / target);
        }
    }
    Outcome {
        pass: worst <= 1.0,
        detail: format!(
            "M={} points, orders 0..={}, worst |s_o - s_hat| / bound = {worst:.4}",
            grid.points, grid.ell_max
        ),
    }
}

fn build(n: u64, seed: u64, dir: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_lforge"))
        .args(["build", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out"])
        .arg(dir)
        .env("LFORGE_THREADS", "1")
        .output()
        .map_err(|e| e.to_string())?;
    match o.status.code() {
        Some(0) | Some(1) if dir.join("report.json").exists() => Ok(()),
        _ => Err(String::from_utf8_lossy(&o.stderr).into_owned()),
    }
}

const RUNS: [(u64, u64); 3] = [(256, 1), (1024, 1), (4096, 1)];

/// End-to-end builds through the binary.
fn c9(root: &Path) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, seed) in RUNS {
        let dir = root.join(format!("a-{n}-{seed}"));
        if let Err(e) = build(n, seed, &dir) {
            return Outcome { pass: false, detail: format!("build n={n} failed: {e}") };
        }
        let q = SignSeq::parse_line(&std::fs::read_to_string(dir.join("coeffs.txt")).unwrap()).unwrap();
        let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        let min = r["min_ratio"].as_f64().unwrap();
        let max = r["max_ratio"].as_f64().unwrap();
        pass &= q.degree() as u64 == 4 * n && max <= 4096.0 && min >= SCALED_MIN_TARGET;
        parts.push(format!("n={n}: min {min:.3e} max {max:.3}"));
    }
    Outcome {
        pass,
        detail: format!(
            "pinned min target {SCALED_MIN_TARGET:e}, max 4096; {} (0.05 not reached)",
            parts.join(", ")
        ),
    }
}

/// Rebuilds the criterion-9 runs and compares bytes.
fn c10(root: &Path) -> Outcome {
    let mut pass = true;
    for (n, seed) in RUNS {
        let a = root.join(format!("a-{n}-{seed}"));
        let b = root.join(format!("b-{n}-{seed}"));
        if let Err(e) = build(n, seed, &b) {
            return Outcome { pass: false, detail: format!("rebuild n={n} failed: {e}") };
        }
        for f in ["coeffs.txt", "report.json", "intervals.json"] {
            pass &= std::fs::read(a.join(f)).ok() == std::fs::read(b.join(f)).ok();
        }
    }
    Outcome { pass, detail: "coeffs.txt, report.json, intervals.json byte-identical on rerun".into() }
}

/// FFT grid against a direct sum built from exact roots of unity.
fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let deg = rng.gen_range(0..=512usize);
        let q = SignSeq::from_signs((0..=deg).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()).unwrap();
        let g = (2 * (deg + 1)).next_power_of_two().max(1024);
        let v = eval_grid(&q, g).unwrap();
        let scale = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for j in (0..g).step_by(7) {
            let direct = q
                .coeffs()
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (k, &c)| acc + root_of_unity((j * k) as u128, g as u128) * c as f64);
            worst = worst.max((v[j] - direct).norm() / scale);
        }
    }
    Outcome { pass: worst < 1e-9, detail: format!("20 sequences, max relative deviation {worst:.2e}") }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("Rudin-Shapiro norm identity", Box::new(|| timed(secs(10), c1))),
        ("Shapiro bound on truncations", Box::new(|| timed(secs(30), c2))),
        ("derivative floor of Re H", Box::new(|| timed(secs(120), c3))),
        ("interval family clauses (a)-(f)", Box::new(|| timed(None, c4))),
        ("discrepancy full colouring", Box::new(|| timed(secs(300), c5))),
        ("sine-integral bounds", Box::new(|| timed(secs(60), c6))),
        ("odd kernel identity", Box::new(|| timed(None, c7))),
        ("Taylor constraints at n = 1024", Box::new(|| timed(None, c8))),
        ("end-to-end flatness", Box::new(|| timed(secs(600), || c9(root)))),
        ("determinism", Box::new(|| timed(None, || c10(root)))),
        ("FFT vs direct evaluation", Box::new(|| timed(None, c11))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of 11 criteria pass", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
