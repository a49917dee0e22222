//! Empirical-Bayes subject effects, probability surfaces and prediction
//! accuracy.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::constraint::{delta_star_baseline, dot};
use crate::data::PanelData;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::kernels::{log_norm_cdf, mills, norm_cdf};
use crate::linalg::r_squared;

const MAX_NEWTON: usize = 100;
const SCORE_TOL: f64 = 1e-10;
const BRACKET: f64 = 8.0;

/// Posterior modes of the standardized random effects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectEffects {
    pub z_hat: Vec<f64>,
    /// `b̂_it = σ̂_t ẑ_i`, indexed `[i][t]`.
    pub b_hat: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

/// Log-posterior of one subject's `z`, held as `(y, Δ̂*, λ̂σ̂)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectPosterior {
    terms: Vec<(u8, f64, f64)>,
}

impl SubjectPosterior {
    pub fn from_terms(terms: Vec<(u8, f64, f64)>) -> Self {
        Self { terms }
    }

    /// Terms for subject `i`: baseline cells use `(λ̂*, σ̂₁)`, later cells `(λ̂, σ̂_t)`.
    pub fn new(fit: &FitResult, data: &PanelData, i: usize) -> Self {
        let (nt, k) = (data.n_times(), data.n_responses());
        let b = &fit.baseline;
        let s1 = b.sigma1();
        let mut terms = Vec::with_capacity(nt * k);
        for j in 0..k {
            let ds = delta_star_baseline(data.x_baseline(i, j), &b.beta_star, b.lambda_star[j], s1);
            terms.push((data.y(i, 0, j), ds, b.lambda_star[j] * s1));
        }
        for t in 1..nt {
            let sigma = fit.main.c[t - 1].exp();
            for j in 0..k {
                let ds = fit.constraints.delta_star(data, &fit.main, i, t, j);
                terms.push((data.y(i, t, j), ds, fit.main.lambda[j] * sigma));
            }
        }
        Self { terms }
    }

    pub fn log_posterior(&self, z: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(y, ds, ls)| {
                let d = ds + ls * z;
                if y == 1 {
                    log_norm_cdf(d)
                } else {
                    log_norm_cdf(-d)
                }
            })
            .sum::<f64>()
            - 0.5 * z * z
    }

    pub fn score(&self, z: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(y, ds, ls)| {
                let d = ds + ls * z;
                if y == 1 {
                    ls * mills(d)
                } else {
                    -ls * mills(-d)
                }
            })
            .sum::<f64>()
            - z
    }

    /// Second derivative; always negative.
    fn curvature(&self, z: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(y, ds, ls)| {
                let d = if y == 1 { ds + ls * z } else { -(ds + ls * z) };
                let m = mills(d);
                -ls * ls * m * (d + m)
            })
            .sum::<f64>()
            - 1.0
    }

    /// Posterior mode by damped Newton-Raphson from 0, with a bisection
    /// fallback on `[-8, 8]`. Returns the mode and a convergence flag.
    pub fn mode(&self) -> (f64, bool) {
        let mut z = 0.0;
        for _ in 0..MAX_NEWTON {
            let s = self.score(z);
            if s.abs() <= SCORE_TOL {
                return (z, true);
            }
            let mut step = -s / self.curvature(z);
            if !step.is_finite() {
                break;
            }
            if step.abs() > 2.0 {
                step *= 0.5;
            }
            z += step;
        }
        self.bisect()
    }

    fn bisect(&self) -> (f64, bool) {
        let (mut lo, mut hi) = (-BRACKET, BRACKET);
        if self.score(lo) < 0.0 {
            return (lo, false);
        }
        if self.score(hi) > 0.0 {
            return (hi, false);
        }
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if self.score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = 0.5 * (lo + hi);
        (z, self.score(z).abs() <= 1e-8)
    }
}

/// `ẑ_i` with its convergence flag.
pub fn estimate_z(i: usize, fit: &FitResult, data: &PanelData) -> (f64, bool) {
    SubjectPosterior::new(fit, data, i).mode()
}

pub fn estimate_effects(fit: &FitResult, data: &PanelData) -> SubjectEffects {
    let modes: Vec<(f64, bool)> = (0..data.n_subjects())
        .into_par_iter()
        .map(|i| estimate_z(i, fit, data))
        .collect();
    let mut sigmas = vec![fit.baseline.sigma1()];
    sigmas.extend(fit.main.c.iter().map(|c| c.exp()));
    SubjectEffects {
        b_hat: modes.iter().map(|(z, _)| sigmas.iter().map(|s| s * z).collect()).collect(),
        z_hat: modes.iter().map(|m| m.0).collect(),
        converged: modes.iter().map(|m| m.1).collect(),
    }
}

/// Probabilities for one (subject, time, response) cell. Time and response
/// are one-based here, matching the input CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityRow {
    pub subject: String,
    pub time: usize,
    pub response: usize,
    pub observed: u8,
    pub marginal: f64,
    pub conditional: f64,
    pub conditional_average: f64,
    #[serde(skip)]
    pub marginal_eta: f64,
    #[serde(skip)]
    pub conditional_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilitySurface {
    pub rows: Vec<ProbabilityRow>,
}

impl ProbabilitySurface {
    /// Marginal `Φ(Xβ̂)`, conditional `Φ(Δ̂* + λ̂b̂)` and average-person `Φ(Δ̂*)`.
    pub fn compute(fit: &FitResult, data: &PanelData, effects: &SubjectEffects) -> Self {
        let (nt, k) = (data.n_times(), data.n_responses());
        let b = &fit.baseline;
        let mut rows = Vec::with_capacity(data.n_subjects() * nt * k);
        for i in 0..data.n_subjects() {
            for t in 0..nt {
                for j in 0..k {
                    let (eta, ds, lam) = if t == 0 {
                        let x = data.x_baseline(i, j);
                        let ds = delta_star_baseline(x, &b.beta_star, b.lambda_star[j], b.sigma1());
                        (dot(x, &b.beta_star), ds, b.lambda_star[j])
                    } else {
                        let ds = fit.constraints.delta_star(data, &fit.main, i, t, j);
                        (dot(data.x_main(i, t, j), &fit.main.beta), ds, fit.main.lambda[j])
                    };
                    let cond = ds + lam * effects.b_hat[i][t];
                    rows.push(ProbabilityRow {
                        subject: data.subject_ids()[i].clone(),
                        time: t + 1,
                        response: j + 1,
                        observed: data.y(i, t, j),
                        marginal: norm_cdf(eta),
                        conditional: norm_cdf(cond),
                        conditional_average: norm_cdf(ds),
                        marginal_eta: eta,
                        conditional_eta: cond,
                    });
                }
            }
        }
        Self { rows }
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Accuracy of the three probability columns against the observed responses.
    pub fn accuracy(&self) -> Result<[(&'static str, AccuracyMetrics); 3]> {
        let y: Vec<u8> = self.rows.iter().map(|r| r.observed).collect();
        let col = |f: fn(&ProbabilityRow) -> f64| self.rows.iter().map(f).collect::<Vec<_>>();
        Ok([
            ("marginal", accuracy_metrics(&y, &col(|r| r.marginal))?),
            ("conditional", accuracy_metrics(&y, &col(|r| r.conditional))?),
            ("conditional_average", accuracy_metrics(&y, &col(|r| r.conditional_average))?),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R2Row {
    pub response: usize,
    /// `"t=1"` or `"t>=2"`.
    pub period: &'static str,
    pub r2: Option<f64>,
}

/// R² of the conditional linear predictor regressed on the marginal one, per
/// response, for the baseline and the pooled later times.
pub fn probit_r2(surface: &ProbabilitySurface, n_responses: usize) -> Vec<R2Row> {
    let mut out = Vec::new();
    for j in 1..=n_responses {
        for (period, baseline) in [("t=1", true), ("t>=2", false)] {
            let cells: Vec<&ProbabilityRow> = surface
                .rows
                .iter()
                .filter(|r| r.response == j && (r.time == 1) == baseline)
                .collect();
            out.push(R2Row {
                response: j,
                period,
                r2: r2_of(&cells),
            });
        }
    }
    out
}

fn r2_of(cells: &[&ProbabilityRow]) -> Option<f64> {
    if cells.len() < 2 {
        return None;
    }
    let x0 = cells[0].marginal_eta;
    let spread = cells.iter().map(|c| (c.marginal_eta - x0).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * x0.abs().max(1.0) {
        return None;
    }
    let x = DMatrix::from_fn(cells.len(), 2, |r, c| if c == 0 { 1.0 } else { cells[r].marginal_eta });
    let y = DVector::from_iterator(cells.len(), cells.iter().map(|c| c.conditional_eta));
    r_squared(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyMetrics {
    pub epcp: f64,
    /// `None` when `y` is constant.
    pub auroc: Option<f64>,
}

/// Expected proportion correctly predicted and the Mann-Whitney AUROC with
/// midranks for ties.
pub fn accuracy_metrics(y: &[u8], p: &[f64]) -> Result<AccuracyMetrics> {
    if y.len() != p.len() || y.is_empty() {
        return Err(Error::Domain(format!(
            "accuracy needs equal non-empty lengths, got {} and {}",
            y.len(),
            p.len()
        )));
    }
    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("probability {v} outside [0, 1]")));
    }
    let n = y.len() as f64;
    let epcp = y
        .iter()
        .zip(p)
        .map(|(&y, &p)| if y == 1 { p } else { 1.0 - p })
        .sum::<f64>()
        / n;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    let auroc = if n_pos == 0 || n_neg == 0 {
        None
    } else {
        let ranks = midranks(p);
        let rank_sum: f64 = y.iter().zip(&ranks).filter(|(&y, _)| y == 1).map(|(_, r)| r).sum();
        let np = n_pos as f64;
        Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
    };
    Ok(AccuracyMetrics { epcp, auroc })
}

fn midranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}
