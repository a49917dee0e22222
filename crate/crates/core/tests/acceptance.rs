//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (outside the harness capture) and then asserts.

mod common;

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use pnmtrem_core::constraint::{Anchor, ConstraintCell, ConstraintSolution};
use pnmtrem_core::data::export;
use pnmtrem_core::eb::{estimate_effects, ProbabilitySurface, SubjectPosterior};
use pnmtrem_core::fit::{fit, information_baseline, information_main, jkb_transform, lrt, FitControls};
use pnmtrem_core::kernels::{delta_method_sd, gauss_hermite, probit_cdf};
use pnmtrem_core::likelihood::{loglik_baseline, loglik_main, score_baseline, score_main};
use pnmtrem_core::params::{BaselineParams, MainParams};
use pnmtrem_core::sim::{run_monte_carlo, simulate_panel, TruthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "\ncriterion {n} [{name}]: {verdict} ({detail})");
}

#[test]
fn criterion_1_simulation_study() {
    let truth = TruthConfig::default();
    let data = simulate_panel(&truth, 1).unwrap();
    let start = Instant::now();
    let one = fit(&data, 20, &FitControls::default()).unwrap();
    let seconds = start.elapsed().as_secs_f64();

    let mc = run_monte_carlo(&truth, 200, 2024, 20, &FitControls::default()).unwrap();
    let mut ok = one.converged() && seconds < 10.0;
    let mut detail = format!("one fit {seconds:.2}s, {} failed fits", mc.failures.len());
    for name in ["beta*[(Intercept)]", "beta*[x1]", "beta[(Intercept)]", "beta[x1]", "beta[x2]"] {
        let r = mc.row(name).unwrap();
        let good = r.bias.abs() <= 0.05 && (r.se - r.mese).abs() <= 0.03 && (90.0..=99.0).contains(&r.cp);
        ok &= good;
        detail += &format!(
            "; {name} bias {:+.3} SE {:.3} meSE {:.3} CP {:.1}",
            r.bias, r.se, r.mese, r.cp
        );
    }
    report(1, "simulation study", ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_2_convolution_identity() {
    let rule = gauss_hermite(20).unwrap();
    let mut worst = (0.0_f64, 0.0, 0.0, 0.0);
    for a in 0..50 {
        let d = -3.0 + 6.0 * a as f64 / 49.0;
        for b in 0..20 {
            let lambda = 2.0 * b as f64 / 19.0;
            for c in 0..20 {
                let sigma = c as f64 / 19.0;
                let s = lambda * sigma;
                let quad = rule.expect_normal(|z| probit_cdf(d + s * z).unwrap());
                let closed = probit_cdf(d / (1.0 + s * s).sqrt()).unwrap();
                let err = (quad - closed).abs();
                if err > worst.0 {
                    worst = (err, d, lambda, sigma);
                }
            }
        }
    }
    let ok = worst.0 <= 1e-5;
    let (err, d, lambda, sigma) = worst;
    report(
        2,
        "convolution identity",
        ok,
        &format!("max error {err:.2e} at delta* {d:.3}, lambda {lambda:.3}, sigma {sigma:.3}"),
    );
    assert!(ok);
}

fn score_error(analytic: &[f64], f: impl Fn(&[f64]) -> f64, theta: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for c in 0..theta.len() {
        let fd = common::central_difference(&f, theta, c, 1e-3);
        let abs = (analytic[c] - fd).abs();
        if abs > 1e-8 {
            worst = worst.max(abs / fd.abs());
        }
    }
    worst
}

#[test]
fn criterion_3_gradients() {
    let data = common::simulated(40, 3);
    let rule = gauss_hermite(20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (p1, k) = (data.n_baseline_covariates(), data.n_responses());
    let (p, l, nt) = (data.n_main_covariates(), data.n_transition_covariates(), data.n_times() - 1);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let bp = common::random_baseline(&mut rng);
        let theta = bp.pack();
        let u = score_baseline(&bp, &data, &rule).unwrap();
        let f = |th: &[f64]| loglik_baseline(&BaselineParams::unpack(th, p1, k), &data, &rule).unwrap();
        worst = worst.max(score_error(&u, f, &theta));

        let mp = common::random_main(&mut rng, nt);
        let cs = common::zero_constraints(&data, &bp.beta_star);
        let theta = mp.pack();
        let u = score_main(&mp, &data, &rule, &cs).unwrap();
        let f = |th: &[f64]| loglik_main(&MainParams::unpack(th, p, l, k, nt + 1), &data, &rule, &cs).unwrap();
        worst = worst.max(score_error(&u, f, &theta));
    }
    let ok = worst <= 1e-5;
    report(3, "score vs finite differences", ok, &format!("max relative error {worst:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_4_constraint_fidelity() {
    let data = common::simulated(30, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let beta_star = [-1.0, 1.9];

    // (a) anchor roots
    let mut worst_f = 0.0_f64;
    for _ in 0..200 {
        let (i, t, j) = (
            rng.random_range(0..data.n_subjects()),
            rng.random_range(1..data.n_times()),
            rng.random_range(0..data.n_responses()),
        );
        let cell = ConstraintCell::from_panel(&data, &beta_star, i, t, j);
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let alpha = [rng.random_range(-2.0..2.0)];
        let d = cell.solve(&beta, &alpha).unwrap();
        worst_f = worst_f.max(cell.residual(d, &beta, &alpha).abs());
    }

    // (b) zero anchor
    let cs = ConstraintSolution::compute(&data, &Anchor::zero_for(&data), &beta_star).unwrap();
    let zero_later = (0..data.n_subjects())
        .all(|i| (2..data.n_times()).all(|t| (0..data.n_responses()).all(|j| cs.delta0(i, t, j) == 0.0)));

    // (c) second-order residual: max over every cell of the panel for a
    // random anchor and direction
    let mut worst_ratio = 0.0_f64;
    let nt = data.n_times() - 1;
    for _ in 0..20 {
        let anchor = Anchor {
            beta0: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            alpha0: (0..nt).map(|_| vec![rng.random_range(-1.0..1.0)]).collect(),
        };
        let db: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let da: Vec<f64> = (0..nt).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cs = ConstraintSolution::compute(&data, &anchor, &beta_star).unwrap();
        let residual = |eps: f64| {
            let beta: Vec<f64> = anchor.beta0.iter().zip(&db).map(|(x, d)| x + eps * d).collect();
            let mut worst = 0.0_f64;
            for i in 0..data.n_subjects() {
                for t in 1..data.n_times() {
                    let alpha = [anchor.alpha0[t - 1][0] + eps * da[t - 1]];
                    for j in 0..data.n_responses() {
                        let cell = ConstraintCell::from_panel(&data, &beta_star, i, t, j);
                        let delta = cs.delta(i, t, j, &beta, &alpha);
                        worst = worst.max(cell.residual(delta, &beta, &alpha).abs());
                    }
                }
            }
            worst
        };
        for eps in [0.2, 0.1] {
            worst_ratio = worst_ratio.max(residual(eps / 2.0) / residual(eps));
        }
    }
    let ok = worst_f <= 1e-10 && zero_later && worst_ratio <= 0.35;
    report(
        4,
        "constraint fidelity",
        ok,
        &format!("max |F| {worst_f:.1e}, zero anchors {zero_later}, max residual ratio {worst_ratio:.3}"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_micro_oracles() {
    let data = common::micro_panel();
    let bp = BaselineParams::new(vec![-0.4, 1.1], vec![1.0, 0.8], -0.3).unwrap();
    let mp = MainParams::new(vec![-0.2, 0.9, 0.3], vec![vec![0.6]], vec![1.0, 1.2], vec![-0.5]).unwrap();
    let cs = common::zero_constraints(&data, &bp.beta_star);
    let engine = |order: usize| {
        let rule = gauss_hermite(order).unwrap();
        loglik_baseline(&bp, &data, &rule).unwrap() + loglik_main(&mp, &data, &rule, &cs).unwrap()
    };
    let (ll20, ll60) = (engine(20), engine(60));
    let oracle = common::oracle_loglik_two_times(&data, &bp, &mp);
    let ll_err = (ll20 - ll60).abs().max((ll20 - oracle).abs());

    let panel = common::simulated(50, 5);
    let f = fit(&panel, 20, &FitControls::default()).unwrap();
    let effects = estimate_effects(&f, &panel);
    let mut z_err = 0.0_f64;
    for i in 0..panel.n_subjects() {
        let post = SubjectPosterior::new(&f, &panel, i);
        let n = 100_000;
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        for g in 0..=n {
            let z = -6.0 + 12.0 * g as f64 / n as f64;
            let v = post.log_posterior(z);
            if v > best {
                best = v;
                arg = z;
            }
        }
        z_err = z_err.max((effects.z_hat[i] - arg).abs());
    }
    let ok = ll_err <= 1e-8 && z_err <= 1e-4;
    report(
        5,
        "micro oracles",
        ok,
        &format!("log-likelihood error {ll_err:.1e}, max |z - grid| {z_err:.1e}"),
    );
    assert!(ok);
}

fn symmetric_psd(m: &DMatrix<f64>) -> (f64, f64) {
    let asym = (m - m.transpose()).amax();
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let rel_min = eig.min() / eig.max().max(f64::MIN_POSITIVE);
    (asym, rel_min)
}

#[test]
fn criterion_6_information_and_delta_method() {
    let data = common::simulated(60, 6);
    let rule = gauss_hermite(20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut asym, mut rel_min) = (0.0_f64, f64::INFINITY);
    for _ in 0..20 {
        let bp = common::random_baseline(&mut rng);
        let mp = common::random_main(&mut rng, data.n_times() - 1);
        let cs = common::zero_constraints(&data, &bp.beta_star);
        for m in [
            information_baseline(&bp, &data, &rule).unwrap(),
            information_main(&mp, &data, &rule, &cs).unwrap(),
        ] {
            let (a, r) = symmetric_psd(&m);
            asym = asym.max(a);
            rel_min = rel_min.min(r);
        }
    }
    let (sigma, se) = delta_method_sd(-0.41, 0.41);
    let ok = asym <= 1e-10 && rel_min >= -1e-12 && (sigma - 0.66).abs() <= 5e-3 && (se - 0.27).abs() <= 5e-3;
    report(
        6,
        "information and delta method",
        ok,
        &format!("max asymmetry {asym:.1e}, min relative eigenvalue {rel_min:.1e}, sigma {sigma:.4} se {se:.4}"),
    );
    assert!(ok);
}

#[test]
fn criterion_7_post_fit_statistics() {
    let (stat, p) = lrt(-1023.71, -1026.00, 6).unwrap();
    let c = jkb_transform(&[(-0.14 + 0.38) - (0.14 - 0.38), (0.14 - 0.38) - (-0.14 - 0.38)]);
    let (or1, or2) = (c[0].exp(), c[1].exp());
    let ok = format!("{stat:.2}") == "4.58"
        && format!("{p:.2}") == "0.60"
        && (or1 - 2.26).abs() <= 0.01
        && (or2 - 1.60).abs() <= 0.01;
    report(
        7,
        "post-fit statistics",
        ok,
        &format!("LRT {stat:.4} p {p:.4}; JKB {or1:.4} {or2:.4}"),
    );
    assert!(ok);
}

fn artifacts(threads: usize) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let truth = TruthConfig {
            n_subjects: 120,
            ..TruthConfig::default()
        };
        let mut mc = Vec::new();
        run_monte_carlo(&truth, 6, 77, 20, &FitControls::default())
            .unwrap()
            .write_csv(&mut mc)
            .unwrap();
        let data = simulate_panel(&truth, 77).unwrap();
        let mut panel = Vec::new();
        export(&data, &mut panel).unwrap();
        let f = fit(&data, 20, &FitControls::default()).unwrap();
        let effects = estimate_effects(&f, &data);
        let mut pred = Vec::new();
        ProbabilitySurface::compute(&f, &data, &effects).write_csv(&mut pred).unwrap();
        vec![mc, panel, pred]
    })
}

#[test]
fn criterion_8_determinism() {
    let a = artifacts(1);
    let b = artifacts(1);
    let c = artifacts(4);
    let ok = a == b && a == c;
    report(
        8,
        "determinism",
        ok,
        &format!("repeat identical {}, 1 vs 4 threads identical {}", a == b, a == c),
    );
    assert!(ok);
}
