//! Two-stage Fisher scoring, empirical information matrices and the
//! post-fit test statistics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::constraint::{Anchor, ConstraintSolution};
use crate::data::PanelData;
use crate::error::{Error, Result};
use crate::glm::{fit_glm_probit, GlmFit};
use crate::kernels::{
    delta_method_sd, gauss_hermite, norm_cdf, reliable_scale, QuadratureRule, CONVOLUTION_TOLERANCE,
};
use crate::likelihood::{baseline_contributions, main_contributions, Contribution};
use crate::linalg::{self, CONDITION_LIMIT};
use crate::params::{BaselineParams, MainParams};

/// Probit-to-logit rescaling constant `(15/16)(π/√3)`.
pub const JKB_CONSTANT: f64 = 15.0 / 16.0 * std::f64::consts::PI / 1.732_050_807_568_877_2;

/// Starting value for every `c = log σ`.
pub const INITIAL_LOG_SIGMA: f64 = -std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitControls {
    pub max_iter: usize,
    /// Convergence requires `max |score|` at or below this.
    pub tol_score: f64,
    /// ...and a relative log-likelihood change at or below this.
    pub tol_loglik: f64,
    pub max_halvings: usize,
}

impl Default for FitControls {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_score: 1e-6,
            tol_loglik: 1e-10,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub loglik: f64,
    pub step_norm: f64,
    pub max_score: f64,
    pub halvings: usize,
    /// Near-null information directions left out of this step.
    pub dropped_directions: usize,
}

/// Result of one Fisher-scoring stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageFit {
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    #[serde(skip)]
    pub info: DMatrix<f64>,
    pub loglik: f64,
    pub max_score: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub condition: f64,
    /// SEs came from a pseudo-inverse because the information was near singular.
    pub pseudo_inverse: bool,
}

/// Both stages of a fit plus the GLM comparison fits.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub baseline: BaselineParams,
    pub main: MainParams,
    pub stage1: StageFit,
    pub stage2: StageFit,
    pub loglik_total: f64,
    pub glm_baseline: GlmFit,
    pub glm_main: GlmFit,
    pub constraints: ConstraintSolution,
    pub quadrature_order: usize,
    pub labels1: Vec<String>,
    pub labels2: Vec<String>,
    pub null1: Vec<f64>,
    pub null2: Vec<f64>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.stage1.converged && self.stage2.converged
    }

    /// `(σ̂_t, se(σ̂_t))` for every time, baseline first.
    pub fn sigmas(&self) -> Vec<(f64, f64)> {
        let p1 = self.stage1.theta.len();
        let mut out = vec![delta_method_sd(self.baseline.c1, self.stage1.se[p1 - 1])];
        let n2 = self.stage2.theta.len();
        let nc = self.main.c.len();
        for (s, &c) in self.main.c.iter().enumerate() {
            out.push(delta_method_sd(c, self.stage2.se[n2 - nc + s]));
        }
        out
    }
}

/// Log-likelihood and per-subject score contributions at one parameter point.
struct StageEval {
    loglik: f64,
    subject_scores: Vec<Vec<f64>>,
}

impl StageEval {
    fn score(&self, n: usize) -> DVector<f64> {
        let mut s = DVector::zeros(n);
        for u in &self.subject_scores {
            s += DVector::from_column_slice(u);
        }
        s
    }

    fn information(&self, n: usize) -> DMatrix<f64> {
        outer_sum(&self.subject_scores, n)
    }
}

fn outer_sum(scores: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let mut info = DMatrix::zeros(n, n);
    for u in scores {
        for r in 0..n {
            for c in 0..=r {
                info[(r, c)] += u[r] * u[c];
            }
        }
    }
    for r in 0..n {
        for c in 0..r {
            info[(c, r)] = info[(r, c)];
        }
    }
    info
}

fn baseline_eval(params: &BaselineParams, data: &PanelData, rule: &QuadratureRule, want: bool) -> Result<StageEval> {
    let cs = baseline_contributions(params, data, rule, want)?;
    Ok(StageEval {
        loglik: cs.iter().map(|c| c.log_h).sum(),
        subject_scores: cs.into_iter().map(|c| c.score).collect(),
    })
}

fn main_eval(
    params: &MainParams,
    data: &PanelData,
    rule: &QuadratureRule,
    cons: &ConstraintSolution,
    want: bool,
) -> Result<StageEval> {
    let per = main_contributions(params, data, rule, cons, want)?;
    let n = params.n_packed();
    let mut loglik = 0.0;
    let mut subject_scores = Vec::with_capacity(per.len());
    for terms in per {
        loglik += terms.iter().map(|c: &Contribution| c.log_h).sum::<f64>();
        if want {
            let mut u = vec![0.0; n];
            for c in &terms {
                for (a, b) in u.iter_mut().zip(&c.score) {
                    *a += b;
                }
            }
            subject_scores.push(u);
        }
    }
    Ok(StageEval { loglik, subject_scores })
}

/// Empirical information `Σ_i u_i u_iᵀ` of the baseline stage.
pub fn information_baseline(params: &BaselineParams, data: &PanelData, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    Ok(baseline_eval(params, data, rule, true)?.information(params.n_packed()))
}

/// Empirical information of the main stage. Each subject's score is summed
/// over its times before the outer product is taken.
pub fn information_main(
    params: &MainParams,
    data: &PanelData,
    rule: &QuadratureRule,
    cons: &ConstraintSolution,
) -> Result<DMatrix<f64>> {
    Ok(main_eval(params, data, rule, cons, true)?.information(params.n_packed()))
}

/// Eigen-directions of the unit-scaled information below this fraction of
/// the largest eigenvalue are left out of the scoring step.
pub const STEP_CUTOFF: f64 = 1e-5;

/// Scoring step `I⁻¹ U` computed on the unit-scaled information
/// `D^{-1/2} I D^{-1/2}` (`D = diag I`), restricted to its well-determined
/// eigen-directions. On an identified problem this is the plain scoring
/// step. On a flat ridge, where several parameters enter the likelihood
/// only through one combination, it is the minimum-norm step and does not
/// move along the ridge. Returns the step and the score projected onto the
/// retained directions.
fn scoring_step(info: &DMatrix<f64>, score: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let n = info.nrows();
    let top = (0..n).map(|r| info[(r, r)]).fold(0.0_f64, f64::max);
    let scale = DVector::from_fn(n, |r, _| {
        let d = info[(r, r)];
        if d > top * f64::EPSILON {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    let scaled = DMatrix::from_fn(n, n, |r, c| info[(r, c)] * scale[r] * scale[c]);
    let rhs = score.component_mul(&scale);
    let t = linalg::truncated_solve(&scaled, &rhs, STEP_CUTOFF).ok_or_else(|| Error::SingularInformation {
        condition: linalg::sym_inverse(info).condition,
    })?;
    let projected = DVector::from_fn(n, |r, _| if scale[r] > 0.0 { t.projected[r] / scale[r] } else { 0.0 });
    let dropped = t.dropped + scale.iter().filter(|s| **s == 0.0).count();
    Ok((t.x.component_mul(&scale), projected, dropped))
}

/// Consecutive iterations a fit may spend held back by the quadrature range.
const MAX_PRESSED: usize = 5;

/// Iterations of plain scoring before Newton steps take over.
const NEWTON_AFTER: usize = 20;

/// Newton step `H⁻¹ U` confined to the directions the scoring step keeps.
fn restricted_newton_step(info: &DMatrix<f64>, hess: &DMatrix<f64>, score: &DVector<f64>) -> Option<DVector<f64>> {
    let n = info.nrows();
    let top = (0..n).map(|r| info[(r, r)]).fold(0.0_f64, f64::max);
    let scale = DVector::from_fn(n, |r, _| {
        let d = info[(r, r)];
        if d > top * f64::EPSILON {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    let scaled = DMatrix::from_fn(n, n, |r, c| info[(r, c)] * scale[r] * scale[c]);
    let eig = scaled.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let kept: Vec<usize> = (0..n).filter(|&j| eig.eigenvalues[j] > max * STEP_CUTOFF).collect();
    if kept.is_empty() {
        return None;
    }
    let basis = DMatrix::from_fn(n, kept.len(), |r, j| eig.eigenvectors[(r, kept[j])] * scale[r]);
    let reduced = basis.transpose() * hess * &basis;
    let chol = reduced.cholesky()?;
    let a = chol.solve(&(basis.transpose() * score));
    let step = basis * a;
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Negative Hessian from central differences of the analytic score.
fn observed_information<F>(eval: &F, theta: &DVector<f64>, n: usize) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64], bool) -> Result<StageEval>,
{
    let mut h = DMatrix::zeros(n, n);
    for c in 0..n {
        let e = 1e-5 * theta[c].abs().max(1.0);
        let mut up = theta.clone();
        up[c] += e;
        let mut dn = theta.clone();
        dn[c] -= e;
        let su = eval(up.as_slice(), true).ok()?.score(n);
        let sd = eval(dn.as_slice(), true).ok()?.score(n);
        h.set_column(c, &((sd - su) / (2.0 * e)));
    }
    let h = (&h + h.transpose()) * 0.5;
    h.iter().all(|v| v.is_finite()).then_some(h)
}

/// Maximizes a stage log-likelihood from `init`.
///
/// Each iteration takes the scoring step `I⁻¹ U`, halving it until the
/// log-likelihood does not decrease. Once the log-likelihood stops moving
/// without the score vanishing, or after [`NEWTON_AFTER`] iterations, steps
/// use the observed information instead.
/// When every trial point leaves the quadrature range, `regauge` may move
/// to an equivalent point with the same likelihood. Convergence is judged on
/// the score projected onto the directions the step can move in, which is
/// the full score unless the information is numerically singular.
fn fisher_scoring<F, G>(init: Vec<f64>, eval: F, regauge: G, controls: &FitControls) -> Result<StageFit>
where
    F: Fn(&[f64], bool) -> Result<StageEval>,
    G: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = init.len();
    let mut theta = DVector::from_vec(init);
    let mut cur = eval(theta.as_slice(), true)?;
    if !cur.loglik.is_finite() {
        return Err(Error::NonFinite("initial log-likelihood".into()));
    }
    let mut score = cur.score(n);
    let mut info = cur.information(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut rel = f64::INFINITY;
    let mut pressed = 0;
    loop {
        let (mut step, projected, dropped) = scoring_step(&info, &score)?;
        if projected.amax() <= controls.tol_score && (iterations == 0 || rel <= controls.tol_loglik) {
            converged = true;
            break;
        }
        if iterations == controls.max_iter {
            break;
        }
        if rel <= controls.tol_loglik || iterations >= NEWTON_AFTER {
            // Scoring has stalled or is creeping along a curved flat
            // direction; finish with Newton.
            if let Some(h) = observed_information(&eval, &theta, n) {
                if let Some(newton) = restricted_newton_step(&info, &h, &score) {
                    step = newton;
                }
            }
        }
        iterations += 1;
        let mut scale = 1.0;
        let mut accepted = None;
        let mut halvings = 0;
        let mut out_of_range = None;
        loop {
            let cand = &theta + &step * scale;
            match eval(cand.as_slice(), false) {
                Ok(e) if e.loglik.is_finite() && e.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() => {
                    accepted = Some((cand, e.loglik));
                    break;
                }
                Err(e @ Error::QuadratureRange { .. }) => out_of_range = Some(e),
                Ok(_) | Err(Error::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
            if halvings == controls.max_halvings {
                break;
            }
            halvings += 1;
            scale *= 0.5;
        }
        let mut regauged = None;
        if let Some(range) = out_of_range {
            // The step ran into the quadrature range. Move to the equivalent
            // point with the smallest scales if there is one; if the fit keeps
            // pressing against the range from there, its maximum lies where
            // the rule is unreliable.
            match regauge(theta.as_slice()).map(DVector::from_vec) {
                Some(v) if (&v - &theta).amax() > 1e-10 => {
                    if let Ok(e) = eval(v.as_slice(), false) {
                        if e.loglik.is_finite() {
                            regauged = Some((v, e.loglik));
                        }
                    }
                }
                _ => {
                    pressed += 1;
                    if accepted.is_none() || pressed >= MAX_PRESSED {
                        return Err(range);
                    }
                }
            }
        } else {
            pressed = 0;
        }
        let accepted = if regauged.is_some() { None } else { accepted };
        let next = match (accepted, regauged) {
            (Some((v, ll)), _) => {
                rel = (ll - cur.loglik).abs() / cur.loglik.abs().max(1e-300);
                v
            }
            (None, Some((v, _))) => {
                rel = f64::INFINITY;
                v
            }
            (None, None) => return Err(Error::LineSearch { iteration: iterations, halvings }),
        };
        let step_norm = (&next - &theta).norm();
        theta = next;
        cur = eval(theta.as_slice(), true)?;
        score = cur.score(n);
        info = cur.information(n);
        trace.push(IterationRecord {
            loglik: cur.loglik,
            step_norm,
            max_score: score.amax(),
            halvings,
            dropped_directions: dropped,
        });
    }
    let inv = linalg::sym_inverse(&info);
    let se = (0..n)
        .map(|c| {
            let v = inv.inverse[(c, c)];
            if v > 0.0 {
                v.sqrt()
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(StageFit {
        theta: theta.iter().copied().collect(),
        se,
        info,
        loglik: cur.loglik,
        max_score: score.amax(),
        converged,
        iterations,
        trace,
        condition: inv.condition,
        pseudo_inverse: inv.pseudo || inv.condition > CONDITION_LIMIT,
    })
}

/// Rejects parameter points whose random-effect scales `|λ_j| σ_t` exceed
/// what the rule integrates to [`CONVOLUTION_TOLERANCE`]. Beyond that range
/// quadrature error, not the data, shapes the likelihood surface.
fn within_range(scales: impl Iterator<Item = f64>, limit: f64) -> Result<()> {
    let scale = scales.fold(0.0, f64::max);
    if scale > limit {
        return Err(Error::QuadratureRange { scale, limit });
    }
    Ok(())
}

/// With two responses each integral depends on `(λ₂, σ)` only through the
/// latent correlation `ρ = λσ² / (√(1+σ²) √(1+λ²σ²))`. Returns the point
/// `(target, log σ')` with `|target| = 1` that has the same `ρ`.
fn equivalent_unit_loading(lambda: f64, target: f64, c: f64) -> Option<(f64, f64)> {
    let s2 = (2.0 * c).exp();
    let rho = (lambda * s2 / ((1.0 + s2).sqrt() * (1.0 + lambda * lambda * s2).sqrt())).abs();
    if !(rho > 1e-12 && rho < 1.0 - 1e-12) || target == 0.0 {
        return None;
    }
    Some((target, 0.5 * (rho / (1.0 - rho)).ln()))
}

/// Fits the baseline stage from `init`.
pub fn fit_baseline_stage(
    data: &PanelData,
    rule: &QuadratureRule,
    init: &BaselineParams,
    controls: &FitControls,
) -> Result<StageFit> {
    let (p, k) = (data.n_baseline_covariates(), data.n_responses());
    crate::likelihood::check_baseline(init, data)?;
    let limit = reliable_scale(rule, CONVOLUTION_TOLERANCE);
    fisher_scoring(
        init.pack(),
        |theta, want| {
            let params = BaselineParams::unpack(theta, p, k);
            let sigma = params.sigma1();
            within_range(params.lambda_star.iter().map(|l| l.abs() * sigma), limit)?;
            baseline_eval(&params, data, rule, want)
        },
        |theta| {
            if k != 2 {
                return None;
            }
            let mut v = theta.to_vec();
            let (lam, c) = equivalent_unit_loading(v[p], v[p].signum(), v[p + 1])?;
            v[p] = lam;
            v[p + 1] = c;
            Some(v)
        },
        controls,
    )
}

/// Fits the main stage from `init` with the constraint coefficients held fixed.
pub fn fit_main_stage(
    data: &PanelData,
    rule: &QuadratureRule,
    cons: &ConstraintSolution,
    init: &MainParams,
    controls: &FitControls,
) -> Result<StageFit> {
    let (p, l, k, nt) = (
        data.n_main_covariates(),
        data.n_transition_covariates(),
        data.n_responses(),
        data.n_times(),
    );
    crate::likelihood::check_main(init, data)?;
    let limit = reliable_scale(rule, CONVOLUTION_TOLERANCE);
    fisher_scoring(
        init.pack(),
        |theta, want| {
            let params = MainParams::unpack(theta, p, l, k, nt);
            let scales = params
                .c
                .iter()
                .flat_map(|c| params.lambda.iter().map(move |lam| lam.abs() * c.exp()));
            within_range(scales, limit)?;
            main_eval(&params, data, rule, cons, want)
        },
        |theta| {
            if k != 2 {
                return None;
            }
            let mut params = MainParams::unpack(theta, p, l, k, nt);
            let lam = params.lambda[1];
            for c in params.c.iter_mut() {
                *c = equivalent_unit_loading(lam, lam.signum(), *c)?.1;
            }
            params.lambda[1] = lam.signum();
            Some(params.pack())
        },
        controls,
    )
}

/// Independence probit fit on the baseline slice.
pub fn glm_baseline(data: &PanelData) -> Result<GlmFit> {
    let (n, k) = (data.n_subjects(), data.n_responses());
    let mut y = Vec::with_capacity(n * k);
    let mut x = Vec::with_capacity(n * k * data.n_baseline_covariates());
    for i in 0..n {
        for j in 0..k {
            y.push(data.y(i, 0, j));
            x.extend_from_slice(data.x_baseline(i, j));
        }
    }
    fit_glm_probit(&y, &x, data.n_baseline_covariates())
}

/// Independence probit fit pooling every main-model time.
pub fn glm_main(data: &PanelData) -> Result<GlmFit> {
    let (n, nt, k) = (data.n_subjects(), data.n_times(), data.n_responses());
    let mut y = Vec::with_capacity(n * (nt - 1) * k);
    let mut x = Vec::with_capacity(n * (nt - 1) * k * data.n_main_covariates());
    for i in 0..n {
        for t in 1..nt {
            for j in 0..k {
                y.push(data.y(i, t, j));
                x.extend_from_slice(data.x_main(i, t, j));
            }
        }
    }
    fit_glm_probit(&y, &x, data.n_main_covariates())
}

pub fn default_baseline_start(data: &PanelData, glm: &GlmFit) -> BaselineParams {
    BaselineParams {
        beta_star: glm.coefficients.clone(),
        lambda_star: vec![1.0; data.n_responses()],
        c1: INITIAL_LOG_SIGMA,
    }
}

pub fn default_main_start(data: &PanelData, glm: &GlmFit) -> MainParams {
    let nt = data.n_times();
    MainParams {
        beta: glm.coefficients.clone(),
        alpha: vec![vec![0.0; data.n_transition_covariates()]; nt - 1],
        lambda: vec![1.0; data.n_responses()],
        c: vec![INITIAL_LOG_SIGMA; nt - 1],
    }
}

/// Full two-stage fit with GLM starting values and the zero anchor.
pub fn fit(data: &PanelData, quadrature_order: usize, controls: &FitControls) -> Result<FitResult> {
    fit_with_anchor(data, quadrature_order, controls, &Anchor::zero_for(data))
}

pub fn fit_with_anchor(
    data: &PanelData,
    quadrature_order: usize,
    controls: &FitControls,
    anchor: &Anchor,
) -> Result<FitResult> {
    let rule = gauss_hermite(quadrature_order)?;
    let glm1 = glm_baseline(data)?;
    let stage1 = fit_baseline_stage(data, &rule, &default_baseline_start(data, &glm1), controls)?;
    let (p1, k) = (data.n_baseline_covariates(), data.n_responses());
    let baseline = BaselineParams::unpack(&stage1.theta, p1, k);
    let cons = ConstraintSolution::compute(data, anchor, &baseline.beta_star)?;
    let glm2 = glm_main(data)?;
    let stage2 = fit_main_stage(data, &rule, &cons, &default_main_start(data, &glm2), controls)?;
    let (p2, l, nt) = (data.n_main_covariates(), data.n_transition_covariates(), data.n_times());
    let main = MainParams::unpack(&stage2.theta, p2, l, k, nt);
    Ok(FitResult {
        labels1: BaselineParams::labels(&data.baseline_design().names, k),
        labels2: MainParams::labels(&data.main_design().names, &data.transition_design().names, k, nt),
        null1: BaselineParams::null_values(p1, k),
        null2: MainParams::null_values(p2, l, k, nt),
        loglik_total: stage1.loglik + stage2.loglik,
        baseline,
        main,
        stage1,
        stage2,
        glm_baseline: glm1,
        glm_main: glm2,
        constraints: cons,
        quadrature_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldRow {
    pub stage: &'static str,
    pub parameter: String,
    pub estimate: f64,
    pub se: f64,
    pub null: f64,
    pub z: f64,
    pub p: f64,
}

/// Two-sided normal p-value for `z`.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * norm_cdf(-z.abs())).min(1.0)
}

pub fn wald_test(estimate: f64, se: f64, null: f64) -> (f64, f64) {
    let z = (estimate - null) / se;
    if estimate == null {
        return (0.0, 1.0);
    }
    (z, two_sided_p(z))
}

/// Wald table for both stages; λ-type parameters are tested against 1,
/// everything else against 0.
pub fn wald_tests(fit: &FitResult) -> Vec<WaldRow> {
    let mut rows = Vec::new();
    let stages = [
        ("baseline", &fit.stage1, &fit.labels1, &fit.null1),
        ("main", &fit.stage2, &fit.labels2, &fit.null2),
    ];
    for (stage, sf, labels, nulls) in stages {
        for (idx, label) in labels.iter().enumerate() {
            let (z, p) = wald_test(sf.theta[idx], sf.se[idx], nulls[idx]);
            rows.push(WaldRow {
                stage,
                parameter: label.clone(),
                estimate: sf.theta[idx],
                se: sf.se[idx],
                null: nulls[idx],
                z,
                p,
            });
        }
    }
    rows
}

/// Likelihood ratio test of a reduced model nested in a full one.
pub fn lrt(loglik_full: f64, loglik_reduced: f64, df: usize) -> Result<(f64, f64)> {
    let stat = -2.0 * (loglik_reduced - loglik_full);
    if stat < -1e-6 {
        return Err(Error::NestingViolation(stat));
    }
    let stat = stat.max(0.0);
    if df == 0 {
        return Err(Error::Domain("likelihood ratio test needs df >= 1".into()));
    }
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((stat, chi.sf(stat)))
}

/// Test of `σ = 0` on the boundary: half the two-sided Wald p-value of
/// `σ̂ / se(σ̂)`, with both obtained from `c = log σ` by the delta method.
pub fn boundary_variance_test(c_hat: f64, se_c: f64) -> f64 {
    let (sigma, se) = delta_method_sd(c_hat, se_c);
    boundary_p_value(sigma, se)
}

pub fn boundary_p_value(sigma: f64, se_sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.5;
    }
    0.5 * two_sided_p(sigma / se_sigma)
}

/// Rescales probit coefficients to the approximate logit scale.
pub fn jkb_transform(beta_probit: &[f64]) -> Vec<f64> {
    beta_probit.iter().map(|b| JKB_CONSTANT * b).collect()
}
