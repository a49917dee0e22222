//! Fit report rows, the aligned text table and the run summary file.
//!
//! `fit_report.csv` columns: `section,stage,parameter,estimate,se,z,p`.
//! Sections are `pnmtrem` (both stages, Wald tests against 1 for loadings and
//! 0 otherwise), `glm` (independence probit fits), `sigma` (σ̂ by the delta
//! method, p from the boundary test) and `loglik` (only `estimate` filled).
//!
//! `fit_trace.csv` columns:
//! `stage,iteration,loglik,step_norm,max_score,halvings,dropped_directions`.

use std::io::Write;
use std::path::Path;

use pnmtrem_core::fit::{boundary_p_value, wald_test, wald_tests};
use pnmtrem_core::{FitResult, GlmFit, StageFit};
use serde::Serialize;

use crate::Fail;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub section: &'static str,
    pub stage: &'static str,
    pub parameter: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TraceRow<'a> {
    stage: &'a str,
    iteration: usize,
    loglik: f64,
    step_norm: f64,
    max_score: f64,
    halvings: usize,
    dropped_directions: usize,
}

fn glm_rows(stage: &'static str, glm: &GlmFit, names: &[String]) -> Vec<ReportRow> {
    names
        .iter()
        .zip(glm.coefficients.iter().zip(&glm.se))
        .map(|(n, (&b, &se))| {
            let (z, p) = wald_test(b, se, 0.0);
            ReportRow {
                section: "glm",
                stage,
                parameter: n.clone(),
                estimate: b,
                se: Some(se),
                z: Some(z),
                p: Some(p),
            }
        })
        .collect()
}

fn loglik_row(stage: &'static str, value: f64) -> ReportRow {
    ReportRow {
        section: "loglik",
        stage,
        parameter: "loglik".into(),
        estimate: value,
        se: None,
        z: None,
        p: None,
    }
}

pub fn fit_rows(fit: &FitResult, baseline_names: &[String], main_names: &[String]) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = wald_tests(fit)
        .into_iter()
        .map(|w| ReportRow {
            section: "pnmtrem",
            stage: w.stage,
            parameter: w.parameter,
            estimate: w.estimate,
            se: Some(w.se),
            z: Some(w.z),
            p: Some(w.p),
        })
        .collect();
    rows.extend(glm_rows("baseline", &fit.glm_baseline, baseline_names));
    rows.extend(glm_rows("main", &fit.glm_main, main_names));
    for (t, (s, se)) in fit.sigmas().into_iter().enumerate() {
        rows.push(ReportRow {
            section: "sigma",
            stage: if t == 0 { "baseline" } else { "main" },
            parameter: format!("sigma_{}", t + 1),
            estimate: s,
            se: Some(se),
            z: Some(s / se),
            p: Some(boundary_p_value(s, se)),
        });
    }
    rows.push(loglik_row("baseline", fit.stage1.loglik));
    rows.push(loglik_row("main", fit.stage2.loglik));
    rows.push(loglik_row("total", fit.loglik_total));
    rows.push(loglik_row("glm_baseline", fit.glm_baseline.loglik));
    rows.push(loglik_row("glm_main", fit.glm_main.loglik));
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Fail> {
    let mut w = csv::Writer::from_path(path).map_err(Fail::io)?;
    for r in rows {
        w.serialize(r).map_err(Fail::io)?;
    }
    w.flush().map_err(Fail::io)
}

pub fn write_trace(path: &Path, fit: &FitResult) -> Result<(), Fail> {
    let mut rows = Vec::new();
    for (stage, sf) in [("baseline", &fit.stage1), ("main", &fit.stage2)] {
        for (n, r) in sf.trace.iter().enumerate() {
            rows.push(TraceRow {
                stage,
                iteration: n + 1,
                loglik: r.loglik,
                step_norm: r.step_norm,
                max_score: r.max_score,
                halvings: r.halvings,
                dropped_directions: r.dropped_directions,
            });
        }
    }
    write_csv(path, &rows)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.prec$}"),
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn stage_status(name: &str, sf: &StageFit) -> String {
    format!(
        "{name}: loglik {:.4}, {} iterations, max |score| {:.2e}, {}{}\n",
        sf.loglik,
        sf.iterations,
        sf.max_score,
        if sf.converged { "converged" } else { "NOT converged" },
        if sf.pseudo_inverse { ", SEs from pseudo-inverse" } else { "" }
    )
}

/// Aligned plain-text rendering of the fit report.
pub fn fit_table(fit: &FitResult, rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let width = rows.iter().map(|r| r.parameter.len()).max().unwrap_or(9).max(9);
    let mut section = "";
    for r in rows.iter().filter(|r| r.section != "loglik") {
        if r.section != section {
            section = r.section;
            let title = match section {
                "pnmtrem" => "PNMTREM estimates",
                "glm" => "GLM (independence probit)",
                _ => "Random-effect scales",
            };
            s.push_str(&format!(
                "\n{title}\n{:<8} {:<width$} {:>10} {:>10} {:>8} {:>8}\n",
                "stage", "parameter", "estimate", "se", "z", "p"
            ));
        }
        s.push_str(&format!(
            "{:<8} {:<width$} {:>10.4} {:>10} {:>8} {:>8}\n",
            r.stage,
            r.parameter,
            r.estimate,
            opt(r.se, 4),
            opt(r.z, 2),
            opt(r.p, 4)
        ));
    }
    s.push('\n');
    s.push_str(&stage_status("baseline", &fit.stage1));
    s.push_str(&stage_status("main", &fit.stage2));
    s.push_str(&format!(
        "total loglik {:.4} (GLM {:.4}), quadrature order {}\n",
        fit.loglik_total,
        fit.glm_baseline.loglik + fit.glm_main.loglik,
        fit.quadrature_order
    ));
    s
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub converged: bool,
    pub quadrature_order: usize,
    pub loglik_baseline: f64,
    pub loglik_main: f64,
    pub loglik_total: f64,
    pub iterations_baseline: usize,
    pub iterations_main: usize,
    pub max_score_baseline: f64,
    pub max_score_main: f64,
    pub pseudo_inverse: bool,
}

impl FitSummary {
    pub fn new(fit: &FitResult) -> Self {
        Self {
            converged: fit.converged(),
            quadrature_order: fit.quadrature_order,
            loglik_baseline: fit.stage1.loglik,
            loglik_main: fit.stage2.loglik,
            loglik_total: fit.loglik_total,
            iterations_baseline: fit.stage1.iterations,
            iterations_main: fit.stage2.iterations,
            max_score_baseline: fit.stage1.max_score,
            max_score_main: fit.stage2.max_score,
            pseudo_inverse: fit.stage1.pseudo_inverse || fit.stage2.pseudo_inverse,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct McInfo {
    pub replications: usize,
    pub failed: usize,
    pub subjects: usize,
    pub exact_delta: bool,
    pub shared_effect: bool,
}

#[derive(Debug, Serialize)]
pub struct MetricRow {
    pub metric: &'static str,
    pub target: String,
    pub value: Option<f64>,
}

/// Contents of `run_summary.toml`.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<MetricRow>>,
}

impl RunSummary {
    pub fn new(command: &'static str, seed: Option<u64>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            threads: rayon::current_num_threads(),
            outputs: Vec::new(),
            fit: None,
            monte_carlo: None,
            metrics: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), Fail> {
        let text = toml::to_string(self).map_err(Fail::io)?;
        let mut f = std::fs::File::create(path).map_err(Fail::io)?;
        f.write_all(text.as_bytes()).map_err(Fail::io)
    }
}
