//! Linking intercepts between the three model levels.
//!
//! The marginal constraint ties the transition intercept `Δ` to the
//! marginal predictor:
//!
//! ```text
//! F(Δ) = Φ(x_t β) − Φ(Δ)(1 − Φ(x_lag β_lag)) − Φ(Δ + α·z) Φ(x_lag β_lag) = 0
//! ```
//!
//! where `β_lag` is `β` itself for `t > 2` and the frozen baseline estimate
//! `β̂*` for `t = 2`. `F` has no closed-form root, so `Δ` is linearized
//! around an anchor `(β0, α0, Δ0)`:
//!
//! ```text
//! Δ ≈ Δ0 + A·(β − β0) + B·(α − α0),   A = −F_β / F_Δ,   B = −F_α / F_Δ
//! ```
//!
//! with `Δ0` the exact root at the anchor. The random-effects intercepts
//! follow in closed form from the probit-normal convolution identity
//! `∫ Φ(a + λσ z) φ(z) dz = Φ(a / √(1 + λ²σ²))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PanelData;
use crate::error::{Error, Result};
use crate::kernels::{norm_cdf, norm_pdf};
use crate::params::MainParams;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How the lagged marginal probability depends on the parameters.
#[derive(Debug, Clone, Copy)]
pub enum LagCoefficients<'a> {
    /// `t > 2`: the lag uses the same `β` as the current time.
    Shared,
    /// `t = 2`: the lag uses the frozen baseline coefficients.
    Frozen(&'a [f64]),
}

/// Design rows entering the constraint for one (i, t, j) cell.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintCell<'a> {
    pub x_t: &'a [f64],
    pub x_lag: &'a [f64],
    pub z: &'a [f64],
    pub lag: LagCoefficients<'a>,
}

impl<'a> ConstraintCell<'a> {
    /// Cell `(i, t, j)` of a panel, `t >= 1` (zero-based).
    pub fn from_panel(data: &'a PanelData, beta_star: &'a [f64], i: usize, t: usize, j: usize) -> Self {
        if t == 1 {
            Self {
                x_t: data.x_main(i, t, j),
                x_lag: data.x_baseline(i, j),
                z: data.z_transition(i, t, j),
                lag: LagCoefficients::Frozen(beta_star),
            }
        } else {
            Self {
                x_t: data.x_main(i, t, j),
                x_lag: data.x_main(i, t - 1, j),
                z: data.z_transition(i, t, j),
                lag: LagCoefficients::Shared,
            }
        }
    }

    fn lag_eta(&self, beta: &[f64]) -> f64 {
        match self.lag {
            LagCoefficients::Shared => dot(self.x_lag, beta),
            LagCoefficients::Frozen(b) => dot(self.x_lag, b),
        }
    }

    /// `F(Δ)` at `(β, α)`.
    pub fn residual(&self, delta: f64, beta: &[f64], alpha: &[f64]) -> f64 {
        let lag_eta = self.lag_eta(beta);
        constraint_residual_eta(delta, dot(self.x_t, beta), lag_eta, dot(alpha, self.z))
    }

    /// `∂F/∂Δ`; strictly negative for finite inputs.
    pub fn d_delta(&self, delta: f64, beta: &[f64], alpha: &[f64]) -> f64 {
        let lag_eta = self.lag_eta(beta);
        let gamma = dot(alpha, self.z);
        -norm_pdf(delta) * norm_cdf(-lag_eta) - norm_pdf(delta + gamma) * norm_cdf(lag_eta)
    }

    /// Exact root of `F(Δ) = 0` at `(β, α)`.
    pub fn solve(&self, beta: &[f64], alpha: &[f64]) -> Result<f64> {
        let eta = dot(self.x_t, beta);
        let lag_eta = self.lag_eta(beta);
        let gamma = dot(alpha, self.z);
        solve_root(eta, lag_eta, gamma)
    }

    /// `(A, B)` at the anchor `(β0, α0, Δ0)`.
    pub fn ift_coefficients(&self, beta0: &[f64], alpha0: &[f64], delta0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let eta = dot(self.x_t, beta0);
        let lag_eta = self.lag_eta(beta0);
        let gamma = dot(alpha0, self.z);
        let p_lag = norm_cdf(lag_eta);
        let f_delta = -norm_pdf(delta0) * norm_cdf(-lag_eta) - norm_pdf(delta0 + gamma) * p_lag;
        if !(f_delta.abs() >= 1e-14) {
            return Err(Error::SingularLinearization {
                context: format!("eta {eta}, lag eta {lag_eta}, gamma {gamma}"),
                derivative: f_delta,
            });
        }
        let phi_eta = norm_pdf(eta);
        let mut a: Vec<f64> = self.x_t.iter().map(|x| x * phi_eta).collect();
        if let LagCoefficients::Shared = self.lag {
            let w = (norm_cdf(delta0) - norm_cdf(delta0 + gamma)) * norm_pdf(lag_eta);
            for (ai, xl) in a.iter_mut().zip(self.x_lag) {
                *ai += w * xl;
            }
        }
        for ai in &mut a {
            *ai = -*ai / f_delta;
        }
        let f_alpha = -norm_pdf(delta0 + gamma) * p_lag;
        let b = self.z.iter().map(|z| -(f_alpha * z) / f_delta).collect();
        Ok((a, b))
    }
}

fn constraint_residual_eta(delta: f64, eta: f64, lag_eta: f64, gamma: f64) -> f64 {
    norm_cdf(eta) - norm_cdf(delta) * norm_cdf(-lag_eta) - norm_cdf(delta + gamma) * norm_cdf(lag_eta)
}

/// `Φ(x_t·β) − Φ(Δ)(1 − Φ(x_lag·β_lag)) − Φ(Δ + α·z) Φ(x_lag·β_lag)`.
pub fn constraint_residual(
    delta: f64,
    beta_cur: &[f64],
    beta_lag: &[f64],
    alpha: &[f64],
    x_t: &[f64],
    x_lag: &[f64],
    z: &[f64],
) -> f64 {
    constraint_residual_eta(delta, dot(x_t, beta_cur), dot(x_lag, beta_lag), dot(alpha, z))
}

/// Safeguarded Newton iteration on the monotone decreasing residual,
/// started at the marginal predictor and falling back to bisection when a
/// step leaves the current bracket.
fn solve_root(eta: f64, lag_eta: f64, gamma: f64) -> Result<f64> {
    let f = |d: f64| constraint_residual_eta(d, eta, lag_eta, gamma);
    let fp = |d: f64| -norm_pdf(d) * norm_cdf(-lag_eta) - norm_pdf(d + gamma) * norm_cdf(lag_eta);
    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    // F decreases in Δ: widen until F(lo) >= 0 >= F(hi).
    while f(lo) < 0.0 && lo > -60.0 {
        lo *= 2.0;
    }
    while f(hi) > 0.0 && hi < 60.0 {
        hi *= 2.0;
    }
    let mut x = eta.clamp(lo, hi);
    let mut trace = Vec::with_capacity(NEWTON_MAX_ITER);
    for _ in 0..NEWTON_MAX_ITER {
        let fx = f(x);
        trace.push(fx);
        if fx.abs() <= NEWTON_TOL {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = fp(x);
        let newton = x - fx / d;
        x = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            // Bracket exhausted; the residual is at rounding level.
            let fx = f(x);
            if fx.abs() <= 1e-10 {
                return Ok(x);
            }
        }
    }
    let fx = f(x);
    if fx.abs() <= NEWTON_TOL {
        return Ok(x);
    }
    trace.push(fx);
    Err(Error::NoConvergence {
        what: "Newton-Raphson for the anchor intercept".into(),
        iterations: NEWTON_MAX_ITER,
        trace,
    })
}

/// Expansion point of the linearization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub beta0: Vec<f64>,
    /// One row per main-model time.
    pub alpha0: Vec<Vec<f64>>,
}

impl Anchor {
    /// The all-zero anchor.
    pub fn zero(p: usize, l: usize, n_main_times: usize) -> Self {
        Self {
            beta0: vec![0.0; p],
            alpha0: vec![vec![0.0; l]; n_main_times],
        }
    }

    pub fn zero_for(data: &PanelData) -> Self {
        Self::zero(
            data.n_main_covariates(),
            data.n_transition_covariates(),
            data.n_times() - 1,
        )
    }
}

/// Exact anchor intercept `Δ0` for one cell.
pub fn solve_anchor_delta0(cell: &ConstraintCell<'_>, beta0: &[f64], alpha0: &[f64]) -> Result<f64> {
    cell.solve(beta0, alpha0)
}

/// `Δ = Δ0 + A·(β − β0) + B·(α − α0)`.
pub fn delta_ift(delta0: f64, a: &[f64], b: &[f64], beta: &[f64], beta0: &[f64], alpha: &[f64], alpha0: &[f64]) -> f64 {
    let da: f64 = a.iter().zip(beta.iter().zip(beta0)).map(|(c, (x, x0))| c * (x - x0)).sum();
    let db: f64 = b.iter().zip(alpha.iter().zip(alpha0)).map(|(c, (x, x0))| c * (x - x0)).sum();
    delta0 + da + db
}

/// `Δ* = √(1 + λ²σ²) · (Δ + α·z·y_lag)`.
#[inline]
pub fn delta_star_main(delta: f64, alpha_z_y: f64, lambda_j: f64, sigma_t: f64) -> f64 {
    (1.0 + lambda_j * lambda_j * sigma_t * sigma_t).sqrt() * (delta + alpha_z_y)
}

/// `Δ*_1 = √(1 + λ*²σ₁²) · x·β*`.
#[inline]
pub fn delta_star_baseline(x_row: &[f64], beta_star: &[f64], lambda_star_j: f64, sigma_1: f64) -> f64 {
    (1.0 + lambda_star_j * lambda_star_j * sigma_1 * sigma_1).sqrt() * dot(x_row, beta_star)
}

/// Linearization coefficients for every main-model cell, computed once per
/// fit since they depend only on the data, the anchor and `β̂*`.
#[derive(Debug, Clone)]
pub struct ConstraintSolution {
    anchor: Anchor,
    n_times: usize,
    n_responses: usize,
    p: usize,
    l: usize,
    delta0: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ConstraintSolution {
    pub fn compute(data: &PanelData, anchor: &Anchor, beta_star: &[f64]) -> Result<Self> {
        let (nt, k) = (data.n_times(), data.n_responses());
        let (p, l) = (data.n_main_covariates(), data.n_transition_covariates());
        if anchor.beta0.len() != p || anchor.alpha0.len() != nt - 1 || anchor.alpha0.iter().any(|a| a.len() != l) {
            return Err(Error::Config("anchor dimensions do not match the panel".into()));
        }
        if beta_star.len() != data.n_baseline_covariates() {
            return Err(Error::Config("beta_star length does not match the baseline design".into()));
        }
        let per_subject: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..data.n_subjects())
            .into_par_iter()
            .map(|i| {
                let mut d0 = Vec::with_capacity((nt - 1) * k);
                let mut a = Vec::with_capacity((nt - 1) * k * p);
                let mut b = Vec::with_capacity((nt - 1) * k * l);
                for t in 1..nt {
                    let alpha0 = &anchor.alpha0[t - 1];
                    for j in 0..k {
                        let cell = ConstraintCell::from_panel(data, beta_star, i, t, j);
                        let delta0 = solve_anchor_delta0(&cell, &anchor.beta0, alpha0)?;
                        let (ca, cb) = cell.ift_coefficients(&anchor.beta0, alpha0, delta0)?;
                        d0.push(delta0);
                        a.extend(ca);
                        b.extend(cb);
                    }
                }
                Ok((d0, a, b))
            })
            .collect();
        let mut out = Self {
            anchor: anchor.clone(),
            n_times: nt,
            n_responses: k,
            p,
            l,
            delta0: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
        };
        for r in per_subject {
            let (d0, a, b) = r?;
            out.delta0.extend(d0);
            out.a.extend(a);
            out.b.extend(b);
        }
        Ok(out)
    }

    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    #[inline]
    fn cell(&self, i: usize, t: usize, j: usize) -> usize {
        (i * (self.n_times - 1) + t - 1) * self.n_responses + j
    }

    pub fn delta0(&self, i: usize, t: usize, j: usize) -> f64 {
        self.delta0[self.cell(i, t, j)]
    }

    pub fn a_coef(&self, i: usize, t: usize, j: usize) -> &[f64] {
        let c = self.cell(i, t, j);
        &self.a[c * self.p..(c + 1) * self.p]
    }

    pub fn b_coef(&self, i: usize, t: usize, j: usize) -> &[f64] {
        let c = self.cell(i, t, j);
        &self.b[c * self.l..(c + 1) * self.l]
    }

    /// Linearized `Δ_itj` at the given parameters (`t >= 1`).
    #[inline]
    pub fn delta(&self, i: usize, t: usize, j: usize, beta: &[f64], alpha_t: &[f64]) -> f64 {
        delta_ift(
            self.delta0(i, t, j),
            self.a_coef(i, t, j),
            self.b_coef(i, t, j),
            beta,
            &self.anchor.beta0,
            alpha_t,
            &self.anchor.alpha0[t - 1],
        )
    }

    /// `Δ*_itj` for `t >= 1` at the given main-model parameters.
    pub fn delta_star(&self, data: &PanelData, params: &MainParams, i: usize, t: usize, j: usize) -> f64 {
        let alpha_t = &params.alpha[t - 1];
        let delta = self.delta(i, t, j, &params.beta, alpha_t);
        let azy = dot(alpha_t, data.z_transition(i, t, j)) * data.y_lag(i, t, j) as f64;
        delta_star_main(delta, azy, params.lambda[j], params.c[t - 1].exp())
    }
}
