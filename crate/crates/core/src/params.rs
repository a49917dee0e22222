//! Baseline and main-model parameter vectors and their flat packings.
//!
//! Packed layouts used by the scores and information matrices:
//!
//! * baseline: `(β*, λ*_2..λ*_k, c_1)`
//! * main: `(β, α_2, .., α_T, λ_2..λ_k, c_2..c_T)` where each `α_t` holds
//!   one coefficient per transition covariate.
//!
//! `λ_1` and `λ*_1` are fixed at 1 and never appear in a packed vector.
//! Standard deviations enter through `c = log σ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub beta_star: Vec<f64>,
    /// Length `k`; the first entry is pinned to 1.
    pub lambda_star: Vec<f64>,
    /// `log σ_1`.
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainParams {
    pub beta: Vec<f64>,
    /// One row per main-model time (`t = 2..T`), one column per transition covariate.
    pub alpha: Vec<Vec<f64>>,
    /// Length `k`; the first entry is pinned to 1.
    pub lambda: Vec<f64>,
    /// `log σ_t` for `t = 2..T`.
    pub c: Vec<f64>,
}

impl BaselineParams {
    pub fn new(beta_star: Vec<f64>, lambda_star: Vec<f64>, c1: f64) -> Result<Self> {
        let p = Self {
            beta_star,
            lambda_star,
            c1,
        };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.lambda_star.first() != Some(&1.0) {
            return Err(Error::Config("lambda_star[0] must equal 1".into()));
        }
        let finite = self.beta_star.iter().all(|v| v.is_finite())
            && self.lambda_star.iter().all(|v| v.is_finite())
            && self.c1.is_finite();
        if !finite {
            return Err(Error::NonFinite("baseline parameters".into()));
        }
        Ok(())
    }

    pub fn sigma1(&self) -> f64 {
        self.c1.exp()
    }

    pub fn n_packed(&self) -> usize {
        self.beta_star.len() + self.lambda_star.len() - 1 + 1
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut v = self.beta_star.clone();
        v.extend_from_slice(&self.lambda_star[1..]);
        v.push(self.c1);
        v
    }

    /// Inverse of [`pack`](Self::pack) for `p` covariates and `k` responses.
    pub fn unpack(theta: &[f64], p: usize, k: usize) -> Self {
        assert_eq!(theta.len(), p + k, "baseline packing length");
        let mut lambda_star = Vec::with_capacity(k);
        lambda_star.push(1.0);
        lambda_star.extend_from_slice(&theta[p..p + k - 1]);
        Self {
            beta_star: theta[..p].to_vec(),
            lambda_star,
            c1: theta[p + k - 1],
        }
    }

    /// Human-readable labels in packed order.
    pub fn labels(names: &[String], k: usize) -> Vec<String> {
        let mut out: Vec<String> = names.iter().map(|n| format!("beta*[{n}]")).collect();
        out.extend((2..=k).map(|j| format!("lambda*[{j}]")));
        out.push("log(sigma_1)".into());
        out
    }

    /// Null values for Wald tests in packed order: 1 for λ-type entries, 0 otherwise.
    pub fn null_values(p: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        v.extend(std::iter::repeat_n(1.0, k - 1));
        v.push(0.0);
        v
    }
}

impl MainParams {
    pub fn new(beta: Vec<f64>, alpha: Vec<Vec<f64>>, lambda: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let p = Self {
            beta,
            alpha,
            lambda,
            c,
        };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.lambda.first() != Some(&1.0) {
            return Err(Error::Config("lambda[0] must equal 1".into()));
        }
        if self.alpha.len() != self.c.len() {
            return Err(Error::Config(format!(
                "alpha has {} time rows but c has {} entries",
                self.alpha.len(),
                self.c.len()
            )));
        }
        if let Some(first) = self.alpha.first() {
            if self.alpha.iter().any(|a| a.len() != first.len()) {
                return Err(Error::Config("alpha rows differ in length".into()));
            }
        }
        let finite = self.beta.iter().all(|v| v.is_finite())
            && self.alpha.iter().flatten().all(|v| v.is_finite())
            && self.lambda.iter().all(|v| v.is_finite())
            && self.c.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("main parameters".into()));
        }
        Ok(())
    }

    /// Number of main-model times (`T - 1`).
    pub fn n_main_times(&self) -> usize {
        self.c.len()
    }

    pub fn n_transition(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn n_packed(&self) -> usize {
        Layout::main(
            self.beta.len(),
            self.n_transition(),
            self.lambda.len(),
            self.c.len() + 1,
        )
        .len()
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        for a in &self.alpha {
            v.extend_from_slice(a);
        }
        v.extend_from_slice(&self.lambda[1..]);
        v.extend_from_slice(&self.c);
        v
    }

    /// Inverse of [`pack`](Self::pack).
    pub fn unpack(theta: &[f64], p: usize, l: usize, k: usize, n_times: usize) -> Self {
        let lay = Layout::main(p, l, k, n_times);
        assert_eq!(theta.len(), lay.len(), "main packing length");
        let alpha = (0..n_times - 1)
            .map(|s| theta[lay.alpha + s * l..lay.alpha + (s + 1) * l].to_vec())
            .collect();
        let mut lambda = Vec::with_capacity(k);
        lambda.push(1.0);
        lambda.extend_from_slice(&theta[lay.lambda..lay.lambda + k - 1]);
        Self {
            beta: theta[..p].to_vec(),
            alpha,
            lambda,
            c: theta[lay.c..lay.c + n_times - 1].to_vec(),
        }
    }

    pub fn labels(
        beta_names: &[String],
        transition_names: &[String],
        k: usize,
        n_times: usize,
    ) -> Vec<String> {
        let mut out: Vec<String> = beta_names.iter().map(|n| format!("beta[{n}]")).collect();
        for t in 2..=n_times {
            out.extend(transition_names.iter().map(|n| format!("alpha_{t}[{n}]")));
        }
        out.extend((2..=k).map(|j| format!("lambda[{j}]")));
        out.extend((2..=n_times).map(|t| format!("log(sigma_{t})")));
        out
    }

    pub fn null_values(p: usize, l: usize, k: usize, n_times: usize) -> Vec<f64> {
        let lay = Layout::main(p, l, k, n_times);
        let mut v = vec![0.0; lay.len()];
        v[lay.lambda..lay.lambda + k - 1].fill(1.0);
        v
    }
}

/// Offsets of each parameter block within a packed main-model vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub p: usize,
    pub l: usize,
    pub alpha: usize,
    pub lambda: usize,
    pub c: usize,
    len: usize,
}

impl Layout {
    pub fn main(p: usize, l: usize, k: usize, n_times: usize) -> Self {
        let alpha = p;
        let lambda = alpha + (n_times - 1) * l;
        let c = lambda + k - 1;
        Self {
            p,
            l,
            alpha,
            lambda,
            c,
            len: c + n_times - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }
}
