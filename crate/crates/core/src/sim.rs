//! Panel simulation under the model and the Monte Carlo harness.
//!
//! The covariate recipe is fixed: one `X1 ~ Uniform(0, 1)` draw per subject
//! used at every time, a baseline design `(1, X1)`, a main design
//! `(1, X1, X2)` with `X2` the indicator of the first response, and an
//! intercept-only transition design.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::{delta_star_baseline, delta_star_main, Anchor, ConstraintCell, ConstraintSolution};
use crate::data::{Design, PanelData, INTERCEPT};
use crate::error::{Error, Result};
use crate::fit::{fit, FitControls};
use crate::kernels::norm_cdf;
use crate::params::{BaselineParams, MainParams};

const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub n_subjects: usize,
    pub n_times: usize,
    pub n_responses: usize,
    pub beta_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub sigma1: f64,
    pub beta: Vec<f64>,
    /// Transition intercept for each main-model time.
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `σ_t` for each main-model time.
    pub sigma: Vec<f64>,
    /// Solve the constraint exactly instead of using the linearization.
    pub exact_delta: bool,
    /// Reuse one `z_i` at every time instead of drawing a fresh standard
    /// normal per (subject, time). The likelihood integrates each time
    /// separately, so a shared effect makes the fitted model misspecified.
    pub shared_effect: bool,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 250,
            n_times: 4,
            n_responses: 2,
            beta_star: vec![-1.0, 1.9],
            lambda_star: vec![1.0, 1.07],
            sigma1: 0.7,
            beta: vec![-1.0, 2.0, 0.2],
            alpha: vec![0.5, 0.7, 0.9],
            lambda: vec![1.0, 1.05],
            sigma: vec![0.66, 0.63, 0.60],
            exact_delta: false,
            shared_effect: false,
        }
    }
}

impl TruthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_subjects == 0 || self.n_times < 2 || self.n_responses < 2 {
            return bad("need n_subjects >= 1, n_times >= 2 and n_responses >= 2");
        }
        if self.beta_star.len() != 2 || self.beta.len() != 3 {
            return bad("beta_star needs 2 entries and beta 3");
        }
        let nm = self.n_times - 1;
        if self.alpha.len() != nm || self.sigma.len() != nm {
            return bad("alpha and sigma need one entry per time after the first");
        }
        if self.lambda_star.len() != self.n_responses || self.lambda.len() != self.n_responses {
            return bad("lambda_star and lambda need one entry per response");
        }
        if self.lambda_star[0] != 1.0 || self.lambda[0] != 1.0 {
            return bad("the first lambda_star and lambda must equal 1");
        }
        if !(self.sigma1 > 0.0) || self.sigma.iter().any(|s| !(*s > 0.0)) {
            return bad("sigmas must be positive");
        }
        let all = [&self.beta_star, &self.lambda_star, &self.beta, &self.alpha, &self.lambda];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) || !self.sigma1.is_finite() {
            return bad("truth values must be finite");
        }
        Ok(())
    }

    pub fn baseline_params(&self) -> BaselineParams {
        BaselineParams {
            beta_star: self.beta_star.clone(),
            lambda_star: self.lambda_star.clone(),
            c1: self.sigma1.ln(),
        }
    }

    pub fn main_params(&self) -> MainParams {
        MainParams {
            beta: self.beta.clone(),
            alpha: self.alpha.iter().map(|&a| vec![a]).collect(),
            lambda: self.lambda.clone(),
            c: self.sigma.iter().map(|s| s.ln()).collect(),
        }
    }
}

/// Random stream for replication `stream` under `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate_panel(truth: &TruthConfig, seed: u64) -> Result<PanelData> {
    simulate_with_rng(truth, &mut replication_rng(seed, 0))
}

/// Simulates one panel: `(X1, z)` per subject, then the responses in
/// (subject, time, response) order, with a fresh `z` before each later time
/// unless `shared_effect` is set.
pub fn simulate_with_rng(truth: &TruthConfig, rng: &mut ChaCha8Rng) -> Result<PanelData> {
    truth.check()?;
    let (n, nt, k) = (truth.n_subjects, truth.n_times, truth.n_responses);
    let mut x1 = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        x1.push(rng.random::<f64>());
        z.push(rng.sample::<f64, _>(StandardNormal));
    }
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut bvals = Vec::with_capacity(n * k * 2);
    let mut mvals = Vec::with_capacity(n * (nt - 1) * k * 3);
    for &x in &x1 {
        bvals.extend((0..k).flat_map(|_| [1.0, x]));
    }
    for &x in &x1 {
        for _ in 1..nt {
            for j in 0..k {
                mvals.extend([1.0, x, if j == 0 { 1.0 } else { 0.0 }]);
            }
        }
    }
    let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let skeleton = PanelData::new(
        ids.clone(),
        nt,
        k,
        vec![0; n * nt * k],
        Design {
            names: names(&[INTERCEPT, "x1"]),
            values: bvals.clone(),
        },
        Design {
            names: names(&[INTERCEPT, "x1", "x2"]),
            values: mvals.clone(),
        },
        Design {
            names: names(&[INTERCEPT]),
            values: vec![1.0; n * (nt - 1) * k],
        },
    )?;
    let main = truth.main_params();
    let deltas = if truth.exact_delta {
        let mut d = Vec::with_capacity(n * (nt - 1) * k);
        for i in 0..n {
            for t in 1..nt {
                for j in 0..k {
                    let cell = ConstraintCell::from_panel(&skeleton, &truth.beta_star, i, t, j);
                    d.push(cell.solve(&main.beta, &main.alpha[t - 1])?);
                }
            }
        }
        d
    } else {
        let cs = ConstraintSolution::compute(&skeleton, &Anchor::zero_for(&skeleton), &truth.beta_star)?;
        let mut d = Vec::with_capacity(n * (nt - 1) * k);
        for i in 0..n {
            for t in 1..nt {
                for j in 0..k {
                    d.push(cs.delta(i, t, j, &main.beta, &main.alpha[t - 1]));
                }
            }
        }
        d
    };
    let mut y = vec![0u8; n * nt * k];
    for i in 0..n {
        for t in 0..nt {
            if t > 0 && !truth.shared_effect {
                z[i] = rng.sample::<f64, _>(StandardNormal);
            }
            for j in 0..k {
                let eta = if t == 0 {
                    let ds = delta_star_baseline(skeleton.x_baseline(i, j), &truth.beta_star, truth.lambda_star[j], truth.sigma1);
                    ds + truth.lambda_star[j] * truth.sigma1 * z[i]
                } else {
                    let lag = y[(i * nt + t - 1) * k + j] as f64;
                    let delta = deltas[(i * (nt - 1) + t - 1) * k + j];
                    let sigma = truth.sigma[t - 1];
                    let ds = delta_star_main(delta, truth.alpha[t - 1] * lag, truth.lambda[j], sigma);
                    ds + truth.lambda[j] * sigma * z[i]
                };
                let u: f64 = rng.random();
                y[(i * nt + t) * k + j] = u8::from(u < norm_cdf(eta));
            }
        }
    }
    PanelData::new(
        ids,
        nt,
        k,
        y,
        skeleton.baseline_design().clone(),
        skeleton.main_design().clone(),
        skeleton.transition_design().clone(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    #[serde(rename = "Parameter")]
    pub parameter: String,
    #[serde(rename = "True")]
    pub truth: f64,
    #[serde(rename = "Mean")]
    pub mean: f64,
    #[serde(rename = "Bias")]
    pub bias: f64,
    /// Standard deviation of the estimates; NaN with a single replication.
    #[serde(rename = "SE")]
    pub se: f64,
    #[serde(rename = "meSE")]
    pub mese: f64,
    /// Percentage of 95% Wald intervals covering the truth.
    #[serde(rename = "CP")]
    pub cp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub rows: Vec<McRow>,
    pub n_reps: usize,
    /// Replications whose fit failed, with the reason.
    pub failures: Vec<(usize, String)>,
}

impl McSummary {
    pub fn row(&self, parameter: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["Parameter", "True", "Mean", "Bias", "SE", "meSE", "CP"])?;
        for r in &self.rows {
            let se = if r.se.is_nan() { "NA".to_string() } else { r.se.to_string() };
            w.write_record([
                r.parameter.clone(),
                r.truth.to_string(),
                r.mean.to_string(),
                r.bias.to_string(),
                se,
                r.mese.to_string(),
                r.cp.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<22} {:>8} {:>8} {:>8} {:>7} {:>7} {:>6}\n",
            "Parameter", "True", "Mean", "Bias", "SE", "meSE", "CP"
        );
        for r in &self.rows {
            let se = if r.se.is_nan() { "NA".to_string() } else { format!("{:.3}", r.se) };
            s.push_str(&format!(
                "{:<22} {:>8.3} {:>8.3} {:>8.3} {:>7} {:>7.3} {:>6.1}\n",
                r.parameter, r.truth, r.mean, r.bias, se, r.mese, r.cp
            ));
        }
        s.push_str(&format!(
            "replications: {}, failed fits: {}\n",
            self.n_reps,
            self.failures.len()
        ));
        s
    }
}

/// Simulates and fits `n_reps` panels; replication `r` uses stream `r` of `seed`.
pub fn run_monte_carlo(
    truth: &TruthConfig,
    n_reps: usize,
    seed: u64,
    quadrature_order: usize,
    controls: &FitControls,
) -> Result<McSummary> {
    truth.check()?;
    if n_reps == 0 {
        return Err(Error::Config("n_reps must be at least 1".into()));
    }
    let outcomes: Vec<std::result::Result<(Vec<f64>, Vec<f64>, Vec<String>), String>> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let data = simulate_with_rng(truth, &mut replication_rng(seed, r as u64)).map_err(|e| e.to_string())?;
            let f = fit(&data, quadrature_order, controls).map_err(|e| e.to_string())?;
            if !f.converged() {
                return Err("did not converge".to_string());
            }
            let est = [f.stage1.theta.as_slice(), &f.stage2.theta].concat();
            let se = [f.stage1.se.as_slice(), &f.stage2.se].concat();
            let labels = [f.labels1.as_slice(), &f.labels2].concat();
            Ok((est, se, labels))
        })
        .collect();
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => failures.push((r, e)),
        }
    }
    if failures.len() * 10 > n_reps || ok.is_empty() {
        return Err(Error::Harness {
            failed: failures.len(),
            total: n_reps,
        });
    }
    let truth_vec = [truth.baseline_params().pack(), truth.main_params().pack()].concat();
    let labels = ok[0].2.clone();
    let m = ok.len() as f64;
    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(c, parameter)| {
            let mean = ok.iter().map(|o| o.0[c]).sum::<f64>() / m;
            let se = if ok.len() < 2 {
                f64::NAN
            } else {
                (ok.iter().map(|o| (o.0[c] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            };
            let mese = ok.iter().map(|o| o.1[c]).sum::<f64>() / m;
            let covered = ok
                .iter()
                .filter(|o| (o.0[c] - truth_vec[c]).abs() <= Z_975 * o.1[c])
                .count();
            McRow {
                parameter,
                truth: truth_vec[c],
                mean,
                bias: mean - truth_vec[c],
                se,
                mese,
                cp: 100.0 * covered as f64 / m,
            }
        })
        .collect();
    Ok(McSummary { rows, n_reps, failures })
}
