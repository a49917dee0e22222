#![allow(dead_code)]

use pnmtrem_core::constraint::{Anchor, ConstraintSolution};
use pnmtrem_core::data::{Design, PanelData, INTERCEPT};
use pnmtrem_core::params::{BaselineParams, MainParams};
use pnmtrem_core::sim::{simulate_panel, TruthConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn simulated(n: usize, seed: u64) -> PanelData {
    let truth = TruthConfig {
        n_subjects: n,
        ..TruthConfig::default()
    };
    simulate_panel(&truth, seed).unwrap()
}

pub fn random_baseline(rng: &mut ChaCha8Rng) -> BaselineParams {
    BaselineParams::new(
        vec![-1.0 + rng.random_range(-0.5..0.5), 1.9 + rng.random_range(-0.5..0.5)],
        vec![1.0, rng.random_range(0.5..1.5)],
        rng.random_range(-1.5..0.0),
    )
    .unwrap()
}

pub fn random_main(rng: &mut ChaCha8Rng, n_main_times: usize) -> MainParams {
    MainParams::new(
        vec![
            -1.0 + rng.random_range(-0.5..0.5),
            2.0 + rng.random_range(-0.5..0.5),
            0.2 + rng.random_range(-0.5..0.5),
        ],
        (0..n_main_times).map(|_| vec![rng.random_range(0.0..1.0)]).collect(),
        vec![1.0, rng.random_range(0.5..1.5)],
        (0..n_main_times).map(|_| rng.random_range(-1.5..0.0)).collect(),
    )
    .unwrap()
}

pub fn zero_constraints(data: &PanelData, beta_star: &[f64]) -> ConstraintSolution {
    ConstraintSolution::compute(data, &Anchor::zero_for(data), beta_star).unwrap()
}

/// Fourth-order central difference `∂f/∂θ_c`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64], c: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut v = theta.to_vec();
        v[c] += s * h;
        f(&v)
    };
    (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h)
}

/// Two subjects, two times, two responses, hand-picked covariates.
pub fn micro_panel() -> PanelData {
    let x1 = [0.3, 0.8];
    let baseline = Design {
        names: vec![INTERCEPT.into(), "x1".into()],
        values: x1.iter().flat_map(|&x| [1.0, x, 1.0, x]).collect(),
    };
    let main = Design {
        names: vec![INTERCEPT.into(), "x1".into(), "x2".into()],
        values: x1.iter().flat_map(|&x| [1.0, x, 0.0, 1.0, x, 1.0]).collect(),
    };
    let transition = Design {
        names: vec![INTERCEPT.into()],
        values: vec![1.0; 4],
    };
    PanelData::new(
        vec!["a".into(), "b".into()],
        2,
        2,
        vec![1, 0, 1, 1, 0, 0, 0, 1],
        baseline,
        main,
        transition,
    )
    .unwrap()
}

/// `∫ f(z) φ(z) dz` by composite Simpson on `[-12, 12]`.
pub fn simpson_normal<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = 8000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for q in 0..=n {
        let z = a + q as f64 * h;
        let w = if q == 0 || q == n {
            1.0
        } else if q % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(z) * phi_pdf(z);
    }
    s * h / 3.0
}

fn bernoulli(y: u8, p: f64) -> f64 {
    if y == 1 {
        p
    } else {
        1.0 - p
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Total log-likelihood of a two-time panel under the zero anchor, built
/// from the model definitions alone.
pub fn oracle_loglik_two_times(data: &PanelData, bp: &BaselineParams, mp: &MainParams) -> f64 {
    assert_eq!(data.n_times(), 2);
    let k = data.n_responses();
    let s1 = bp.c1.exp();
    let s2 = mp.c[0].exp();
    let mut total = 0.0;
    for i in 0..data.n_subjects() {
        let base = simpson_normal(|z| {
            (0..k)
                .map(|j| {
                    let ls = bp.lambda_star[j] * s1;
                    let d = (1.0 + ls * ls).sqrt() * dot(data.x_baseline(i, j), &bp.beta_star);
                    bernoulli(data.y(i, 0, j), phi_cdf(d + ls * z))
                })
                .product()
        });
        let main = simpson_normal(|z| {
            (0..k)
                .map(|j| {
                    let zt = data.z_transition(i, 1, j);
                    let gamma = dot(&mp.alpha[0], zt);
                    let lag = phi_cdf(dot(data.x_baseline(i, j), &bp.beta_star));
                    let delta = dot(data.x_main(i, 1, j), &mp.beta) - lag * gamma;
                    let ls = mp.lambda[j] * s2;
                    let d = (1.0 + ls * ls).sqrt() * (delta + gamma * data.y(i, 0, j) as f64);
                    bernoulli(data.y(i, 1, j), phi_cdf(d + ls * z))
                })
                .product()
        });
        total += base.ln() + main.ln();
    }
    total
}
