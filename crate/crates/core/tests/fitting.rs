mod common;

use pnmtrem_core::fit::{fit, fit_baseline_stage, fit_main_stage, FitControls};
use pnmtrem_core::kernels::gauss_hermite;
use pnmtrem_core::likelihood::loglik_baseline;
use pnmtrem_core::params::{BaselineParams, MainParams};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn estimate_is_a_fixed_point() {
    let data = common::simulated(150, 21);
    let controls = FitControls::default();
    let f = fit(&data, 20, &controls).unwrap();
    assert!(f.converged());
    let rule = gauss_hermite(20).unwrap();
    let again = fit_baseline_stage(&data, &rule, &f.baseline, &controls).unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 2, "{}", again.iterations);
    assert!(max_diff(&again.theta, &f.stage1.theta) < 1e-5);
    let again = fit_main_stage(&data, &rule, &f.constraints, &f.main, &controls).unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 2, "{}", again.iterations);
    assert!(max_diff(&again.theta, &f.stage2.theta) < 1e-5);
}

#[test]
fn poor_start_reaches_the_same_maximum() {
    let data = common::simulated(150, 22);
    let controls = FitControls::default();
    let f = fit(&data, 20, &controls).unwrap();
    let rule = gauss_hermite(20).unwrap();

    let start = BaselineParams::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap();
    let b = fit_baseline_stage(&data, &rule, &start, &controls).unwrap();
    assert!(b.converged);
    assert!((b.loglik - f.stage1.loglik).abs() < 1e-6 * f.stage1.loglik.abs());
    assert!(max_diff(&b.theta[..2], &f.stage1.theta[..2]) < 1e-3);

    let start = MainParams::new(vec![0.0; 3], vec![vec![0.0]; 3], vec![1.0, 1.0], vec![0.0; 3]).unwrap();
    let m = fit_main_stage(&data, &rule, &f.constraints, &start, &controls).unwrap();
    assert!(m.converged);
    assert!((m.loglik - f.stage2.loglik).abs() < 1e-6 * f.stage2.loglik.abs());
    assert!(max_diff(&m.theta[..6], &f.stage2.theta[..6]) < 1e-3);
}

#[test]
fn subject_order_does_not_matter() {
    let data = common::simulated(120, 23);
    let mut idx: Vec<usize> = (0..data.n_subjects()).rev().collect();
    idx.swap(3, 50);
    let shuffled = data.select_subjects(&idx);
    let controls = FitControls::default();
    let a = fit(&data, 20, &controls).unwrap();
    let b = fit(&shuffled, 20, &controls).unwrap();
    assert!((a.loglik_total - b.loglik_total).abs() < 1e-8 * a.loglik_total.abs());
    assert!(max_diff(&a.stage1.theta[..2], &b.stage1.theta[..2]) < 1e-6);
    assert!(max_diff(&a.stage2.theta[..6], &b.stage2.theta[..6]) < 1e-6);
}

#[test]
fn estimates_stable_in_quadrature_order() {
    let data = common::simulated(250, 24);
    let controls = FitControls::default();
    let a = fit(&data, 20, &controls).unwrap();
    let b = fit(&data, 40, &controls).unwrap();
    assert!(a.converged() && b.converged());
    assert!((a.loglik_total - b.loglik_total).abs() < 1e-3);
    assert!(max_diff(&a.stage1.theta[..2], &b.stage1.theta[..2]) < 1e-3);
    assert!(max_diff(&a.stage2.theta[..6], &b.stage2.theta[..6]) < 1e-3);
    assert_eq!(a.quadrature_order, 20);
}

#[test]
fn two_responses_identify_only_the_latent_correlation() {
    // With k = 2 each integral depends on (λ₂, σ) only through
    // ρ = λσ² / (√(1+σ²) √(1+λ²σ²)).
    let data = common::simulated(60, 25);
    let rule = gauss_hermite(60).unwrap();
    let rho = |l: f64, s: f64| l * s * s / ((1.0 + s * s).sqrt() * (1.0 + l * l * s * s).sqrt());
    let target = rho(1.0, 0.8);
    let ll = |l: f64| {
        let (mut lo, mut hi) = (1e-6, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rho(l, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = BaselineParams::new(vec![-1.0, 1.9], vec![1.0, l], (0.5 * (lo + hi)).ln()).unwrap();
        loglik_baseline(&p, &data, &rule).unwrap()
    };
    let base = ll(1.0);
    for l in [0.6, 1.5, 2.5] {
        assert!((ll(l) - base).abs() < 1e-8, "{l}: {} vs {base}", ll(l));
    }
}

#[test]
fn glm_comparison_is_reported() {
    let data = common::simulated(100, 26);
    let f = fit(&data, 20, &FitControls::default()).unwrap();
    assert!(f.glm_baseline.converged && f.glm_main.converged);
    assert_eq!(f.glm_baseline.coefficients.len(), 2);
    assert_eq!(f.glm_main.coefficients.len(), 3);
    assert!((f.loglik_total - (f.stage1.loglik + f.stage2.loglik)).abs() < 1e-12);
    let sig = f.sigmas();
    assert_eq!(sig.len(), 4);
    assert!(sig.iter().all(|(s, _)| *s > 0.0));
}

#[test]
fn maximum_beyond_quadrature_range_is_reported() {
    use pnmtrem_core::sim::{replication_rng, simulate_with_rng, TruthConfig};
    use pnmtrem_core::Error;
    let truth = TruthConfig {
        n_subjects: 150,
        ..TruthConfig::default()
    };
    let data = simulate_with_rng(&truth, &mut replication_rng(9, 14)).unwrap();
    match fit(&data, 20, &FitControls::default()) {
        Err(Error::QuadratureRange { scale, limit }) => assert!(scale > limit),
        other => panic!("expected a quadrature range error, got {:?}", other.map(|f| f.stage1.theta)),
    }
    assert!(fit(&data, 40, &FitControls::default()).unwrap().converged());
}
