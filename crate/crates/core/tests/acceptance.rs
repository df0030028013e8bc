//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

mod common;

use std::time::Instant;

use blowup_asym::report::validate_problem;
use blowup_asym::series::{primitive, ThetaSeries, ThetaTerm};
use blowup_asym::validate::ValidateOptions;
use common::{at_root, close, coeff, ensure, expand, label, load, params, EXAMPLES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

fn c1_one_dim_cubic() -> Check {
    // y = (1 - e^{-2 theta})^{-1/2} solves y' = -y + y^3 exactly.
    let exps = expand(&load("one_dim_cubic", &[])?, 3)?;
    let y = exps[0].y_series(0);
    let s2 = 2f64.sqrt();
    close("theta^-1/2", coeff(&y, -0.5, 0), 1.0 / s2, 1e-9)?;
    close("theta^1/2", coeff(&y, 0.5, 0), 1.0 / (2.0 * s2), 1e-9)?;
    close("theta^3/2", coeff(&y, 1.5, 0), 1.0 / (24.0 * s2), 1e-9)?;
    close("printed value 0.0294628", coeff(&y, 1.5, 0), 0.0294628, 1e-6)
}

fn c2_ishiwata_yazaki() -> Check {
    let (a, i) = (0.5_f64, 1.0_f64);
    let exps = expand(&load("ishiwata_yazaki", &[])?, 3)?;
    let e = &exps[0];
    let u = e.y_series(0);
    close("u leading", coeff(&u, -a, 0), i.powf(-a * a / (a - 1.0)), 1e-8)?;
    let second = i.powf((-2.0 * a * a + 1.0) / (a - 1.0)) * a * a / ((1.0 - a) * (2.0 - a));
    close("u second", coeff(&u, 1.0 - 2.0 * a, 0), second, 1e-8)?;
    close("u second = 1/3", second, 1.0 / 3.0, 1e-12)?;
    let v = &e.derived.iter().find(|(n, _)| n == "v").ok_or("derived v missing")?.1;
    close("v leading", coeff(v, 0.0, 0), 1.0, 1e-8)?;
    let v2 = -a / (1.0 - a) * i.powf(1.0 / (a - 1.0) - a);
    close("v second", coeff(v, 1.0 - a, 0), v2, 1e-8)?;

    let exps = expand(&load("ishiwata_yazaki_i0", &[])?, 3)?;
    let e = &exps[0];
    ensure(e.exact, || "I = 0 expansion is not flagged exact".into())?;
    let p = a / (a + 1.0);
    close("I=0 leading", coeff(&e.y_series(0), -p, 0), (1.0 / (a + 1.0)).powf(p), 1e-8)?;
    ensure(e.y_terms[1..].iter().flatten().all(ThetaSeries::is_empty), || "I = 0: some Y_j, j >= 1, is nonzero".into())
}

fn c3_two_phase() -> Check {
    let (rho1, rho2, c, c1) = (1.0, 2.0, 0.5, 0.25);
    let l = load("two_phase", &[])?;
    let exps = expand(&l, 3)?;
    let e = at_root(&exps, &[2.0, 4.0])?;
    let mut eig: Vec<f64> = e.spectral.eigenvalues.iter().flat_map(|x| vec![x.re; x.alg_mult]).collect();
    eig.sort_by(f64::total_cmp);
    ensure(eig.len() == 2, || format!("eigenvalues {eig:?}"))?;
    close("eigenvalue 1", eig[0], 1.0, 1e-8)?;
    close("eigenvalue 2", eig[1], 2.0, 1e-8)?;
    ensure(e.spectral.m_a == 0, || format!("m_A = {}", e.spectral.m_a))?;
    close("b1", coeff(&e.sum[0], 1.0, 0), (c * rho2 + c1) / 3.0, 1e-8)?;
    let v1 = -2.0 * rho1 * (c * rho2 + c1) / (3.0 * (rho2 - rho1) * (rho2 - rho1)) + c * rho2 / (rho2 - rho1);
    close("V1", coeff(&e.sum[1], 1.0, 0), v1, 1e-8)
}

fn c4_andrews1() -> Check {
    let a = 0.25_f64;
    let exps = expand(&load("andrews1", &[])?, 3)?;
    let w0 = ((1.0 - 2.0 * a) / (8.0 * a * a)).sqrt();
    let v0 = (1.0 / (2.0 * (1.0 - 2.0 * a))).sqrt();
    let e = at_root(&exps, &[w0, v0])?;
    let stable = -1.5 + 1.0 / (4.0 * a * (1.0 - a));
    close("stable exponent", stable, -1.0 / 6.0, 1e-12)?;
    let cw = coeff(&e.y_series(0), stable, 1);
    let cv = coeff(&e.y_series(1), stable, 1);
    ensure(cw.abs() > 1e-8, || "no free-parameter term at the stable exponent in w".into())?;
    close("C_v / C_w", cv / cw, 2.0 * a * a / ((1.0 - a) * (2.0 * a - 1.0)), 1e-8)
}

fn c5_andrews2() -> Check {
    let (a, b) = (1.0_f64, 1.0_f64);
    let exps = expand(&load("andrews2", &[])?, 3)?;
    let e = &exps[0];
    let bind = params(&[("C1", 1.0)]);
    let u = e.y_series(0).bind(&bind);
    let v = e.y_series(1).bind(&bind);
    let s2 = 2f64.sqrt();
    let (g0, g1, g2) = (-0.5, a / b - 1.0, 2.0 * a / b - 1.5);
    close("u leading", coeff(&u, g0, 0), (2.0 * a - b).sqrt() / (s2 * b), 1e-8)?;
    close("u C-term", coeff(&u, g1, 0), 1.0, 1e-8)?;
    let u2 = b * (4.0 * a - b) * (4.0 * a + b) / (4.0 * s2 * a * a * (2.0 * a - b).sqrt());
    close("u C^2-term", coeff(&u, g2, 0), u2, 1e-8)?;
    close("v leading", coeff(&v, g0, 0), 1.0 / (2.0 * (2.0 * a - b)).sqrt(), 1e-8)?;
    close("v C-term", coeff(&v, g1, 0), -b * b / (2.0 * a * (2.0 * a - b)), 1e-8)?;
    let v2 = -b.powi(3) * (4.0 * a - b) / (4.0 * s2 * a * a * (2.0 * a - b).powf(1.5));
    close("v C^2-term", coeff(&v, g2, 0), v2, 1e-8)
}

fn c6_keyfitz_kranser_quasi() -> Check {
    let s3 = 3f64.sqrt();
    let exps = expand(&load("keyfitz_kranser", &[("eps", 0.0)])?, 3)?;
    let e = at_root(&exps, &[3.0 - s3, 9.0 - 5.0 * s3])?;
    let r = 2.0 * s3 - 2.0;
    close("U at r", coeff(&e.sum[0], r, 1), 1.0, 1e-8)?;
    close("U at 2r", coeff(&e.sum[0], 2.0 * r, 2), -(3.0 + 4.0 * s3) / 26.0, 1e-8)?;
    close("V at r", coeff(&e.sum[1], r, 1), 3.0, 1e-8)?;
    close("V at 2r", coeff(&e.sum[1], 2.0 * r, 2), -(1.0 + 10.0 * s3) / 26.0, 1e-8)?;
    let e = at_root(&exps, &[3.0 + s3, 9.0 + 5.0 * s3])?;
    ensure(e.exact, || "root 3 + sqrt 3 is not flagged exact".into())?;
    ensure(e.y_terms[1..].iter().flatten().all(ThetaSeries::is_empty), || "root 3 + sqrt 3: some Y_j is nonzero".into())
}

fn c7_keyfitz_kranser() -> Check {
    let s3 = 3f64.sqrt();
    let exps = expand(&load("keyfitz_kranser", &[])?, 3)?;
    let r = 2.0 * s3 - 2.0;
    let sink = at_root(&exps, &[3.0 - s3, 9.0 - 5.0 * s3])?;
    for g in [r, 2.0] {
        ensure(sink.lattice.iter().any(|x| (x - g).abs() < 1e-9), || format!("lattice lacks {g}"))?;
    }
    close("sink U at 2", coeff(&sink.sum[0], 2.0, 0), (3.0 + s3) / 6.0, 1e-8)?;
    close("sink V at 2", coeff(&sink.sum[1], 2.0, 0), (15.0 + s3) / 6.0, 1e-8)?;
    let saddle = at_root(&exps, &[3.0 + s3, 9.0 + 5.0 * s3])?;
    close("saddle U at 2", coeff(&saddle.sum[0], 2.0, 0), (3.0 - s3) / 6.0, 1e-8)?;
    close("saddle V at 2", coeff(&saddle.sum[1], 2.0, 0), (15.0 - s3) / 6.0, 1e-8)
}

fn c8_jordan_block() -> Check {
    let no_logs = |e: &blowup_asym::expansion::BlowupExpansion, what: &str| {
        ensure(e.final_sum().iter().all(|s| s.max_log_power() == 0), || format!("{what}: final series has ln(theta)"))
    };
    let exps = expand(&load("log_jordan", &[])?, 3)?;
    let e = at_root(&exps, &[1.0, 0.0])?;
    close("U at 1", coeff(&e.sum[0], 1.0, 0), -0.25, 1e-10)?;
    close("U at 2", coeff(&e.sum[0], 2.0, 0), -1.0 / 144.0, 1e-10)?;
    close("V at 1", coeff(&e.sum[1], 1.0, 0), 0.5, 1e-10)?;
    close("V at 2", coeff(&e.sum[1], 2.0, 0), -1.0 / 24.0, 1e-10)?;
    no_logs(e, "m = 2")?;
    let exps = expand(&load("log_jordan", &[("m", 1.0)])?, 3)?;
    let e = at_root(&exps, &[1.0, 0.0])?;
    close("u at theta^1", coeff(&e.y_series(0), 1.0, 0), -1.0 / 9.0, 1e-10)?;
    close("v constant", coeff(&e.y_series(1), 0.0, 0), 1.0 / 3.0, 1e-10)?;
    no_logs(e, "m = 1")
}

fn random_term(rng: &mut ChaCha8Rng) -> ThetaTerm {
    let gamma = if rng.random_bool(0.1) { -1.0 } else { (rng.random_range(-30..=30) as f64) / 7.0 };
    ThetaTerm::constant(rng.random_range(-5.0..5.0), gamma, rng.random_range(0..4))
}

fn c9_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (name, ov) in EXAMPLES {
        let l = load(name, ov)?;
        let n = l.spec.field.n();
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let res = l.spec.field.euler_residual(&x).map_err(|e| e.to_string())?;
            let f = l.spec.field.eval_quasi(&x).map_err(|e| e.to_string())?;
            let scale = 1.0 + f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let worst = res.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            ensure(worst / scale < 1e-8, || format!("{}: Euler residual {worst:e} at {x:?}", label(name, ov)))?;
        }
        for e in expand(&l, 3)? {
            let delta = e.gap.delta;
            for (j, y) in e.y_terms.iter().enumerate().skip(1) {
                for (i, s) in y.iter().enumerate() {
                    ensure(!delta.is_finite() || s.deg() >= j as f64 * delta - 1e-9, || {
                        format!("{}: deg Y_{j}[{i}] = {} < {j} delta = {}", label(name, ov), s.deg(), j as f64 * delta)
                    })?;
                    if l.spec.field.is_polynomial() {
                        for t in s.terms() {
                            ensure(e.lattice.iter().any(|g| (g - t.gamma).abs() < 1e-9), || {
                                format!("{}: exponent {} of Y_{j}[{i}] is off the lattice", label(name, ov), t.gamma)
                            })?;
                        }
                    }
                }
            }
        }
    }
    for _ in 0..1000 {
        let t = random_term(&mut rng);
        let back = primitive(&t).differentiate();
        let want = ThetaSeries::from_terms(vec![t.clone()], f64::INFINITY);
        let diff = back.sub(&want);
        let c = t.coeff.constant_part();
        ensure(diff.terms().iter().all(|d| d.coeff.max_abs() <= 1e-12 * c.abs().max(1.0)), || {
            format!("d/dt primitive({t:?}) = {back}")
        })?;
    }
    Ok(())
}

fn c10_numeric_validation() -> Check {
    let start = Instant::now();
    let opts = ValidateOptions::default();
    let mut failures = Vec::new();
    for (name, ov) in EXAMPLES {
        let l = load(name, ov)?;
        let summary = validate_problem(&l.spec, &l.report, &l.roots, None, 3, &l.spec.analysis.bind, &opts);
        if !summary.pass || summary.roots.is_empty() {
            failures.push(label(name, ov));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(failures.is_empty(), || format!("validation failed for {failures:?}"))?;
    ensure(elapsed < 60.0, || format!("validation took {elapsed:.1} s"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("1D cubic coefficients", c1_one_dim_cubic),
        ("Ishiwata-Yazaki, I = 1 and I = 0", c2_ishiwata_yazaki),
        ("two-phase flow", c3_two_phase),
        ("Andrews I", c4_andrews1),
        ("Andrews II", c5_andrews2),
        ("Keyfitz-Kranser quasi-homogeneous part", c6_keyfitz_kranser_quasi),
        ("Keyfitz-Kranser full system", c7_keyfitz_kranser),
        ("Jordan-block examples", c8_jordan_block),
        ("property suite", c9_properties),
        ("numeric validation", c10_numeric_validation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match check() {
            Ok(()) => println!("criterion {:>2} PASS  {name} ({:.2} s)", i + 1, t.elapsed().as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
