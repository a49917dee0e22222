//! Run configuration: a TOML file merged under command-line flags.
//!
//! Recognized keys (all optional):
//!
//! ```toml
//! input = "panel.csv"      # long-format CSV (fit, predict)
//! spec = "spec.toml"       # ModelSpec file (fit, predict)
//! out = "results"          # output directory, created if missing
//! seed = 2024
//! quad_order = 20
//! max_iter = 200
//! tol_score = 1e-6
//! tol_loglik = 1e-10
//! reps = 200               # Monte Carlo replications
//! exact_delta = false      # simulator: solve the constraint exactly
//! threads = 4
//!
//! [truth]                  # simulate / mc; any TruthConfig field
//! n_subjects = 250
//! ```
//!
//! A ModelSpec file holds `subject`, `time`, `response`, `outcome` (column
//! names, defaulting to `subject`, `time`, `response`, `y`), the covariate
//! lists `baseline`, `main`, `transition`, and `quadrature_order`.

use std::path::{Path, PathBuf};

use pnmtrem_core::{FitControls, TruthConfig};
use serde::Deserialize;

use crate::{Fail, Opts};

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_REPS: usize = 200;
pub const DEFAULT_QUAD_ORDER: usize = 20;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quad_order: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol_score: Option<f64>,
    pub tol_loglik: Option<f64>,
    pub reps: Option<usize>,
    pub exact_delta: Option<bool>,
    pub threads: Option<usize>,
    pub truth: Option<TruthConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Fail> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::data(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Fail::data(format!("config {}: {e}", path.display())))
    }
}

/// Resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// `None` defers to the ModelSpec, then to 20.
    pub quad_order: Option<usize>,
    pub controls: FitControls,
    pub reps: usize,
    pub truth: TruthConfig,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(opts: &Opts, threads: Option<usize>, file: FileConfig) -> Result<Self, Fail> {
        let mut controls = FitControls::default();
        if let Some(v) = opts.max_iter.or(file.max_iter) {
            controls.max_iter = v;
        }
        if let Some(v) = opts.tol_score.or(file.tol_score) {
            controls.tol_score = v;
        }
        if let Some(v) = opts.tol_loglik.or(file.tol_loglik) {
            controls.tol_loglik = v;
        }
        if controls.max_iter == 0 || !(controls.tol_score > 0.0) || !(controls.tol_loglik > 0.0) {
            return Err(Fail::data("max-iter, tol-score and tol-loglik must be positive"));
        }
        let mut truth = file.truth.unwrap_or_default();
        if opts.exact_delta || file.exact_delta == Some(true) {
            truth.exact_delta = true;
        }
        truth.check().map_err(|e| Fail::data(format!("truth: {e}")))?;
        let threads = threads.or(file.threads);
        if threads == Some(0) {
            return Err(Fail::data("threads must be at least 1"));
        }
        Ok(Self {
            input: opts.input.clone().or(file.input),
            spec: opts.spec.clone().or(file.spec),
            out: opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            seed: opts.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            quad_order: opts.quad_order.or(file.quad_order),
            controls,
            reps: opts.reps.or(file.reps).unwrap_or(DEFAULT_REPS),
            truth,
            threads,
        })
    }

    pub fn require_input(&self) -> Result<&Path, Fail> {
        let p = self.input.as_deref().ok_or_else(|| Fail::data("--input is required"))?;
        if !p.is_file() {
            return Err(Fail::data(format!("input {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn require_spec(&self) -> Result<&Path, Fail> {
        let p = self.spec.as_deref().ok_or_else(|| Fail::data("--spec is required"))?;
        if !p.is_file() {
            return Err(Fail::data(format!("spec {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn prepare_out(&self) -> Result<(), Fail> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Fail::data(format!("cannot create output directory {}: {e}", self.out.display())))
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: FileConfig = toml::from_str("seed = 1\nreps = 7\nmax_iter = 50\nthreads = 2\n[truth]\nn_subjects = 40\n").unwrap();
        let opts = Opts {
            seed: Some(9),
            exact_delta: true,
            ..Opts::default()
        };
        let cfg = RunConfig::resolve(&opts, Some(4), file).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.reps, 7);
        assert_eq!(cfg.controls.max_iter, 50);
        assert_eq!(cfg.threads, Some(4));
        assert_eq!(cfg.truth.n_subjects, 40);
        assert!(cfg.truth.exact_delta);
        assert_eq!(cfg.quad_order, None);
    }

    #[test]
    fn defaults_without_a_file() {
        let cfg = RunConfig::resolve(&Opts::default(), None, FileConfig::default()).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.reps, DEFAULT_REPS);
        assert_eq!(cfg.controls, FitControls::default());
        assert_eq!(cfg.out, PathBuf::from("."));
    }

    #[test]
    fn bad_values_are_data_errors() {
        let opts = Opts {
            tol_score: Some(0.0),
            ..Opts::default()
        };
        assert_eq!(RunConfig::resolve(&opts, None, FileConfig::default()).unwrap_err().code, 2);
        assert_eq!(RunConfig::resolve(&Opts::default(), Some(0), FileConfig::default()).unwrap_err().code, 2);
        assert!(toml::from_str::<FileConfig>("sede = 1").is_err());
    }
}
