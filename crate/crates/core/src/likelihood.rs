//! Baseline and main-model log-likelihoods with analytic scores.
//!
//! Each subject (baseline) or subject-time (main model) contributes
//!
//! ```text
//! h = (1/√π) Σ_q w_q exp( Σ_j log P(y_j | d_jq) ),
//! ```
//!
//! where `d_jq` is the random-effects linear predictor evaluated at the
//! Gauss-Hermite abscissa `√2 z_q`. The `1/√π` factor makes `h` a proper
//! probability. Scores are `h⁻¹ ∂h/∂θ`, computed as a posterior-weighted
//! average over quadrature points so that nothing underflows for large `k`.
//!
//! Reductions over subjects are parallel but always summed in ascending
//! subject order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::constraint::{dot, ConstraintSolution};
use crate::data::PanelData;
use crate::error::{Error, Result};
use crate::kernels::{log_norm_cdf, mills, QuadratureRule};
use crate::params::{BaselineParams, Layout, MainParams};

/// Contribution of one integral (a subject at baseline, or a subject-time
/// in the main model).
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub log_h: f64,
    /// `h⁻¹ ∂h/∂θ` in packed order; empty when scores were not requested.
    pub score: Vec<f64>,
}

/// Standard-normal quadrature prepared for repeated use.
#[derive(Debug, Clone)]
pub(crate) struct Abscissae {
    pub x: Vec<f64>,
    pub log_w: Vec<f64>,
}

impl Abscissae {
    pub fn new(rule: &QuadratureRule) -> Self {
        let (x, w) = rule.standard_normal();
        Self {
            x,
            log_w: w.iter().map(|w| w.ln()).collect(),
        }
    }
}

/// Folds per-point log integrands and gradients into `(log h, h⁻¹ ∂h)`.
fn fold_points(log_terms: &[f64], grads: &[f64], n_par: usize, want_score: bool) -> (f64, Vec<f64>) {
    let m = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_terms.iter().map(|&v| (v - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let log_h = m + total.ln();
    let mut score = Vec::new();
    if want_score {
        score = vec![0.0; n_par];
        for (q, w) in weights.iter().enumerate() {
            let pi = w / total;
            for (s, g) in score.iter_mut().zip(&grads[q * n_par..(q + 1) * n_par]) {
                *s += pi * g;
            }
        }
    }
    (log_h, score)
}

#[inline]
fn observed_terms(y: u8, d: f64) -> (f64, f64) {
    // log P(y | d) and its derivative in d.
    if y == 1 {
        (log_norm_cdf(d), mills(d))
    } else {
        (log_norm_cdf(-d), -mills(-d))
    }
}

pub(crate) fn check_baseline(params: &BaselineParams, data: &PanelData) -> Result<()> {
    params.check()?;
    if params.beta_star.len() != data.n_baseline_covariates() || params.lambda_star.len() != data.n_responses() {
        return Err(Error::Config(format!(
            "baseline parameters sized ({}, {}) but panel needs ({}, {})",
            params.beta_star.len(),
            params.lambda_star.len(),
            data.n_baseline_covariates(),
            data.n_responses()
        )));
    }
    Ok(())
}

pub(crate) fn check_main(params: &MainParams, data: &PanelData) -> Result<()> {
    params.check()?;
    let ok = params.beta.len() == data.n_main_covariates()
        && params.alpha.len() == data.n_times() - 1
        && params.n_transition() == data.n_transition_covariates()
        && params.lambda.len() == data.n_responses();
    if !ok {
        return Err(Error::Config("main parameters do not match the panel dimensions".into()));
    }
    Ok(())
}

/// Baseline contribution of subject `i`, optionally ignoring responses with
/// `mask[j] == false`.
pub(crate) fn baseline_subject(
    params: &BaselineParams,
    data: &PanelData,
    ab: &Abscissae,
    i: usize,
    mask: Option<&[bool]>,
    want_score: bool,
) -> Result<Contribution> {
    let k = data.n_responses();
    let p = params.beta_star.len();
    let n_par = p + k;
    let q_n = ab.x.len();
    let sigma = params.c1.exp();
    let mut log_terms: Vec<f64> = ab.log_w.clone();
    let mut grads = if want_score { vec![0.0; q_n * n_par] } else { Vec::new() };
    for j in 0..k {
        if mask.is_some_and(|m| !m[j]) {
            continue;
        }
        let x = data.x_baseline(i, j);
        let eta = dot(x, &params.beta_star);
        let lam = params.lambda_star[j];
        let ls = lam * sigma;
        let s = (1.0 + ls * ls).sqrt();
        let y = data.y(i, 0, j);
        for q in 0..q_n {
            let d = s * eta + ls * ab.x[q];
            let (lp, u) = observed_terms(y, d);
            if !lp.is_finite() || !u.is_finite() {
                return Err(Error::NonFinite(format!(
                    "baseline likelihood at subject {i}, response {}, node {q}",
                    j + 1
                )));
            }
            log_terms[q] += lp;
            if want_score {
                let g = &mut grads[q * n_par..(q + 1) * n_par];
                for (gc, xc) in g[..p].iter_mut().zip(x) {
                    *gc += u * s * xc;
                }
                if j > 0 {
                    g[p + j - 1] += u * (lam * sigma * sigma / s * eta + sigma * ab.x[q]);
                }
                g[n_par - 1] += u * (ls * ls / s * eta + ls * ab.x[q]);
            }
        }
    }
    let (log_h, score) = fold_points(&log_terms, &grads, n_par, want_score);
    Ok(Contribution { log_h, score })
}

/// Per-subject baseline contributions in subject order.
pub fn baseline_contributions(
    params: &BaselineParams,
    data: &PanelData,
    rule: &QuadratureRule,
    want_score: bool,
) -> Result<Vec<Contribution>> {
    check_baseline(params, data)?;
    let ab = Abscissae::new(rule);
    (0..data.n_subjects())
        .into_par_iter()
        .map(|i| baseline_subject(params, data, &ab, i, None, want_score))
        .collect()
}

pub fn loglik_baseline(params: &BaselineParams, data: &PanelData, rule: &QuadratureRule) -> Result<f64> {
    Ok(baseline_contributions(params, data, rule, false)?
        .iter()
        .map(|c| c.log_h)
        .sum())
}

/// Gradient of the baseline log-likelihood, packed `(β*, λ*_2..λ*_k, c_1)`.
pub fn score_baseline(params: &BaselineParams, data: &PanelData, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let contribs = baseline_contributions(params, data, rule, true)?;
    Ok(sum_scores(contribs.iter().map(|c| c.score.as_slice()), params.n_packed()))
}

/// Score of the baseline log-likelihood restricted to the responses kept by `mask`.
pub fn score_baseline_masked(
    params: &BaselineParams,
    data: &PanelData,
    rule: &QuadratureRule,
    mask: &[bool],
) -> Result<Vec<f64>> {
    check_baseline(params, data)?;
    let ab = Abscissae::new(rule);
    let contribs: Vec<Contribution> = (0..data.n_subjects())
        .map(|i| baseline_subject(params, data, &ab, i, Some(mask), true))
        .collect::<Result<_>>()?;
    Ok(sum_scores(contribs.iter().map(|c| c.score.as_slice()), params.n_packed()))
}

fn sum_scores<'a>(scores: impl Iterator<Item = &'a [f64]>, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for s in scores {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out
}

/// Main-model contribution of subject `i` at time `t >= 1`.
pub(crate) fn main_subject_time(
    params: &MainParams,
    data: &PanelData,
    cs: &ConstraintSolution,
    ab: &Abscissae,
    lay: &Layout,
    i: usize,
    t: usize,
    want_score: bool,
) -> Result<Contribution> {
    let k = data.n_responses();
    let n_par = lay.len();
    let q_n = ab.x.len();
    let alpha_t = &params.alpha[t - 1];
    let sigma = params.c[t - 1].exp();
    let c_idx = lay.c + t - 1;
    let a_idx = lay.alpha + (t - 1) * lay.l;
    let mut log_terms: Vec<f64> = ab.log_w.clone();
    let mut grads = if want_score { vec![0.0; q_n * n_par] } else { Vec::new() };
    for j in 0..k {
        let z = data.z_transition(i, t, j);
        let y_lag = data.y_lag(i, t, j) as f64;
        let delta = cs.delta(i, t, j, &params.beta, alpha_t);
        let m = delta + dot(alpha_t, z) * y_lag;
        let lam = params.lambda[j];
        let ls = lam * sigma;
        let s = (1.0 + ls * ls).sqrt();
        let y = data.y(i, t, j);
        let a = cs.a_coef(i, t, j);
        let b = cs.b_coef(i, t, j);
        for q in 0..q_n {
            let d = s * m + ls * ab.x[q];
            let (lp, u) = observed_terms(y, d);
            if !lp.is_finite() || !u.is_finite() {
                return Err(Error::NonFinite(format!(
                    "main likelihood at subject {i}, time {}, response {}, node {q}",
                    t + 1,
                    j + 1
                )));
            }
            log_terms[q] += lp;
            if want_score {
                let g = &mut grads[q * n_par..(q + 1) * n_par];
                let us = u * s;
                for (gc, ac) in g[..lay.p].iter_mut().zip(a) {
                    *gc += us * ac;
                }
                for f in 0..lay.l {
                    g[a_idx + f] += us * (b[f] + z[f] * y_lag);
                }
                if j > 0 {
                    g[lay.lambda + j - 1] += u * (lam * sigma * sigma / s * m + sigma * ab.x[q]);
                }
                g[c_idx] += u * (ls * ls / s * m + ls * ab.x[q]);
            }
        }
    }
    let (log_h, score) = fold_points(&log_terms, &grads, n_par, want_score);
    Ok(Contribution { log_h, score })
}

/// Main-model contributions indexed `[subject][t - 1]`.
pub fn main_contributions(
    params: &MainParams,
    data: &PanelData,
    rule: &QuadratureRule,
    cs: &ConstraintSolution,
    want_score: bool,
) -> Result<Vec<Vec<Contribution>>> {
    check_main(params, data)?;
    let ab = Abscissae::new(rule);
    let lay = Layout::main(
        data.n_main_covariates(),
        data.n_transition_covariates(),
        data.n_responses(),
        data.n_times(),
    );
    (0..data.n_subjects())
        .into_par_iter()
        .map(|i| {
            (1..data.n_times())
                .map(|t| main_subject_time(params, data, cs, &ab, &lay, i, t, want_score))
                .collect()
        })
        .collect()
}

pub fn loglik_main(
    params: &MainParams,
    data: &PanelData,
    rule: &QuadratureRule,
    cs: &ConstraintSolution,
) -> Result<f64> {
    Ok(main_contributions(params, data, rule, cs, false)?
        .iter()
        .flatten()
        .map(|c| c.log_h)
        .sum())
}

/// Gradient of the main-model log-likelihood, packed
/// `(β, α_2..α_T, λ_2..λ_k, c_2..c_T)`.
pub fn score_main(
    params: &MainParams,
    data: &PanelData,
    rule: &QuadratureRule,
    cs: &ConstraintSolution,
) -> Result<Vec<f64>> {
    let contribs = main_contributions(params, data, rule, cs, true)?;
    Ok(sum_scores(
        contribs.iter().flatten().map(|c| c.score.as_slice()),
        params.n_packed(),
    ))
}
