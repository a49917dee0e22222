//! Independence probit regression, used to start Fisher scoring and as the
//! GLM comparison fit in reports.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{log_norm_cdf, mills, norm_quantile};
use crate::linalg;

const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
const TOL_LOGLIK: f64 = 1e-10;
const TOL_SCORE: f64 = 1e-8;
/// Coefficients beyond this magnitude are taken as a sign of separation.
const SEPARATION_BOUND: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Explanation when `converged` is false.
    pub diagnostic: Option<String>,
}

struct Eval {
    loglik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

fn evaluate(y: &[u8], x: &DMatrix<f64>, beta: &DVector<f64>, want_derivs: bool) -> Eval {
    let p = x.ncols();
    let eta = x * beta;
    let mut loglik = 0.0;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for (r, (&yi, &e)) in y.iter().zip(eta.iter()).enumerate() {
        let s = if yi == 1 { 1.0 } else { -1.0 };
        loglik += log_norm_cdf(s * e);
        if want_derivs {
            let row = x.row(r);
            let u = s * mills(s * e);
            let w = mills(e) * mills(-e);
            score += row.transpose() * u;
            info += row.transpose() * row * w;
        }
    }
    Eval {
        loglik,
        score,
        info,
    }
}

/// Maximizes the independence probit likelihood by Fisher scoring with
/// step halving. `x` is row-major with `p` columns.
pub fn fit_glm_probit(y: &[u8], x: &[f64], p: usize) -> Result<GlmFit> {
    let n = y.len();
    if p == 0 || x.len() != n * p {
        return Err(Error::Config(format!(
            "design has {} values, expected {n} rows x {p} columns",
            x.len()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Domain("probit GLM needs binary responses".into()));
    }
    let xm = DMatrix::from_row_slice(n, p, x);
    let rank = linalg::rank(&xm);
    if rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }

    let mut beta = DVector::zeros(p);
    let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let has_intercept = (0..n).all(|r| xm[(r, 0)] == 1.0);
    if has_intercept {
        beta[0] = norm_quantile(ybar.clamp(1e-4, 1.0 - 1e-4));
    }

    let mut cur = evaluate(y, &xm, &beta, true);
    let mut converged = false;
    let mut diagnostic = None;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let step = match linalg::spd_solve(&cur.info, &cur.score) {
            Ok(s) => s,
            Err(cond) => {
                diagnostic = Some(format!(
                    "information became singular (condition {cond:e}); likely separation"
                ));
                break;
            }
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = &beta + &step * scale;
            let ll = evaluate(y, &xm, &cand, false).loglik;
            if ll.is_finite() && ll >= cur.loglik - 1e-12 * cur.loglik.abs() {
                accepted = Some(cand);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            diagnostic = Some("step halving failed to increase the log-likelihood".into());
            break;
        };
        let next_eval = evaluate(y, &xm, &next, true);
        let rel = (next_eval.loglik - cur.loglik).abs() / (cur.loglik.abs() + 1e-300);
        beta = next;
        cur = next_eval;
        if beta.amax() > SEPARATION_BOUND {
            diagnostic = Some(format!(
                "coefficients diverging (max |beta| = {:.1}); perfect or quasi-complete separation",
                beta.amax()
            ));
            break;
        }
        if rel <= TOL_LOGLIK && cur.score.amax() <= TOL_SCORE {
            converged = true;
            break;
        }
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence within {MAX_ITER} iterations"));
    }

    let inv = linalg::sym_inverse(&cur.info);
    // Probit scores underflow long before separated coefficients blow up,
    // so a flat likelihood at the stopping point is checked as well.
    if converged && (inv.pseudo || inv.condition > linalg::CONDITION_LIMIT || relative_information(&xm, &cur.info) < 1e-8) {
        converged = false;
        diagnostic = Some("information vanishes at the fit; perfect or quasi-complete separation".into());
    }
    let se = (0..p)
        .map(|c| {
            let v = inv.inverse[(c, c)];
            if inv.pseudo || v <= 0.0 {
                f64::NAN
            } else {
                v.sqrt()
            }
        })
        .collect();
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        se,
        loglik: cur.loglik,
        converged,
        iterations,
        diagnostic,
    })
}

/// Smallest eigenvalue of the information relative to `XᵀX`, i.e. the
/// smallest effective observation weight; near zero under separation.
fn relative_information(xm: &DMatrix<f64>, info: &DMatrix<f64>) -> f64 {
    let Some(chol) = (xm.transpose() * xm).cholesky() else {
        return 0.0;
    };
    let l_inv = chol.l().try_inverse().unwrap_or_else(|| DMatrix::zeros(xm.ncols(), xm.ncols()));
    let scaled = &l_inv * info * l_inv.transpose();
    let scaled = (&scaled + scaled.transpose()) * 0.5;
    scaled.symmetric_eigen().eigenvalues.min()
}

/// Gradient of the independence probit log-likelihood.
pub fn glm_score(y: &[u8], x: &[f64], p: usize, beta: &[f64]) -> Vec<f64> {
    let xm = DMatrix::from_row_slice(y.len(), p, x);
    evaluate(y, &xm, &DVector::from_column_slice(beta), true)
        .score
        .iter()
        .copied()
        .collect()
}

/// Independence probit log-likelihood.
pub fn glm_loglik(y: &[u8], x: &[f64], p: usize, beta: &[f64]) -> f64 {
    let xm = DMatrix::from_row_slice(y.len(), p, x);
    evaluate(y, &xm, &DVector::from_column_slice(beta), false).loglik
}

/// Variance inflation factors `1 / (1 - R²_j)` for every column after an
/// all-ones leading column (if present), regressing each on all others.
/// Exact collinearity yields `+∞`.
pub fn vif(x: &[f64], p: usize) -> Result<Vec<f64>> {
    if p == 0 || x.len() % p != 0 {
        return Err(Error::Config("design length is not a multiple of its width".into()));
    }
    let n = x.len() / p;
    let xm = DMatrix::from_row_slice(n, p, x);
    let has_intercept = (0..n).all(|r| xm[(r, 0)] == 1.0);
    let first = usize::from(has_intercept);
    if p - first < 2 {
        return Err(Error::Config("VIF needs at least two non-intercept columns".into()));
    }
    let out = (first..p)
        .map(|c| {
            let target = xm.column(c).into_owned();
            let rest: Vec<usize> = (first..p).filter(|&o| o != c).collect();
            let mut others = DMatrix::from_element(n, rest.len() + 1, 1.0);
            for (slot, &o) in rest.iter().enumerate() {
                others.set_column(slot + 1, &xm.column(o));
            }
            match linalg::r_squared(&others, &target) {
                Some(r2) if r2 < 1.0 - 1e-12 => 1.0 / (1.0 - r2),
                _ => f64::INFINITY,
            }
        })
        .collect();
    Ok(out)
}
