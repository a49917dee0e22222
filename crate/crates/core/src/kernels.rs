//! Probit link functions, Gauss-Hermite quadrature and the delta-method
//! transform for log standard deviations.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// `1 / sqrt(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Largest supported quadrature order.
pub const MAX_QUADRATURE_ORDER: usize = 100;

/// Standard normal CDF without input checking. NaN propagates.
#[inline]
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density without input checking.
#[inline]
pub(crate) fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF `Φ(x)`.
///
/// Evaluated through the complementary error function, so both tails keep
/// full relative precision and `Φ(-x) = 1 - Φ(x)` holds to rounding.
pub fn probit_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("probit_cdf of NaN".into()));
    }
    Ok(norm_cdf(x))
}

/// Standard normal density `φ(x)`.
pub fn probit_pdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("probit_pdf of NaN".into()));
    }
    Ok(norm_pdf(x))
}

/// Inverse standard normal CDF, defined on the open interval (0, 1).
pub fn probit_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "probit_inverse requires p in (0, 1), got {p}"
        )));
    }
    Ok(norm_quantile(p))
}

pub(crate) fn norm_quantile(p: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Halley polish step on Φ(x) - p.
    if x.is_finite() {
        let err = if p < 0.5 {
            norm_cdf(x) - p
        } else {
            (1.0 - p) - norm_cdf(-x)
        };
        let pdf = norm_pdf(x);
        if pdf > 0.0 {
            let u = err / pdf;
            x -= u / (1.0 + 0.5 * x * u);
        }
    }
    x
}

/// `1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸`, the factor in `Φ(x) ≈ φ(x)/(-x)·(...)`.
#[inline]
fn tail_series(x: f64) -> f64 {
    let u = 1.0 / (x * x);
    1.0 + u * (-1.0 + u * (3.0 + u * (-15.0 + u * 105.0)))
}

/// `log Φ(x)` that stays finite far into the lower tail.
#[inline]
pub(crate) fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Asymptotic series for the lower tail.
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * PI).ln() + tail_series(x).ln()
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`, stable in the lower tail.
#[inline]
pub(crate) fn mills(x: f64) -> f64 {
    if x > -30.0 {
        norm_pdf(x) / norm_cdf(x)
    } else {
        -x / tail_series(x)
    }
}

/// Gauss-Hermite rule for integrals against `exp(-x²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_q f(z_q)`, approximating `∫ f(x) exp(-x²) dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)` via the substitution `x = √2 z`:
    /// `(1/√π) Σ w_q f(√2 z_q)`.
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.integrate(|z| f(SQRT_2 * z)) / PI.sqrt()
    }

    /// Abscissae `√2 z_q` and weights `w_q / √π` of the standard-normal rule.
    pub fn standard_normal(&self) -> (Vec<f64>, Vec<f64>) {
        let s = PI.sqrt();
        (
            self.nodes.iter().map(|z| SQRT_2 * z).collect(),
            self.weights.iter().map(|w| w / s).collect(),
        )
    }
}

/// Builds the `order`-point Gauss-Hermite rule.
///
/// Roots of the Hermite polynomial are located by Newton iteration on the
/// orthonormal three-term recurrence; weights follow from the derivative at
/// each root. Valid for `1 <= order <= 100`.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_QUADRATURE_ORDER {
        return Err(Error::Domain(format!(
            "quadrature order must lie in 1..={MAX_QUADRATURE_ORDER}, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..half {
        // Initial guesses for the largest roots, then extrapolate inward.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - i + 1],
        };
        let mut converged = false;
        for _ in 0..200 {
            let (p1, p2) = hermite_orthonormal(n, z, pim4);
            let step = p1 / ((2.0 * nf).sqrt() * p2);
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: format!("Gauss-Hermite root {i} of order {n}"),
                iterations: 200,
                trace: vec![z],
            });
        }
        let (_, p2) = hermite_orthonormal(n, z, pim4);
        let pp = (2.0 * nf).sqrt() * p2;
        let w = 2.0 / (pp * pp);
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
    })
}

/// Orthonormal Hermite values `(p_n(z), p_{n-1}(z))`.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Accuracy target for [`reliable_scale`].
pub const CONVOLUTION_TOLERANCE: f64 = 1e-5;

/// Largest error of the rule on the probit-normal convolution
/// `E Φ(d + s Z) = Φ(d / √(1 + s²))` over `d ∈ [-3, 3]`.
pub fn convolution_error(rule: &QuadratureRule, s: f64) -> f64 {
    (0..=60)
        .map(|q| {
            let d = -3.0 + 0.1 * q as f64;
            let quad = rule.expect_normal(|z| norm_cdf(d + s * z));
            (quad - norm_cdf(d / (1.0 + s * s).sqrt())).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest random-effect scale `λσ` (capped at 50) at which
/// [`convolution_error`] stays within `tol`.
pub fn reliable_scale(rule: &QuadratureRule, tol: f64) -> f64 {
    const STEP: f64 = 0.05;
    let mut hi = STEP;
    while convolution_error(rule, hi) <= tol {
        hi += STEP;
        if hi > 50.0 {
            return 50.0;
        }
    }
    let mut lo = hi - STEP;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if convolution_error(rule, mid) <= tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Maps an estimate of `c = log σ` and its standard error onto the
/// `σ` scale: `(exp(c), exp(c) · se_c)`.
pub fn delta_method_sd(c_hat: f64, se_c: f64) -> (f64, f64) {
    let sigma = c_hat.exp();
    (sigma, sigma * se_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_basics() {
        assert_eq!(probit_cdf(0.0).unwrap(), 0.5);
        assert_eq!(probit_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(probit_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        assert_abs_diff_eq!(probit_cdf(1.959964).unwrap(), 0.975, epsilon = 1e-6);
        assert!(probit_cdf(f64::NAN).is_err());
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.0, 8.0] {
            let s = probit_cdf(-x).unwrap() + probit_cdf(x).unwrap();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn pdf_matches_cdf_derivative() {
        assert_abs_diff_eq!(probit_pdf(0.0).unwrap(), 0.3989422804, epsilon = 1e-9);
        assert_eq!(probit_pdf(2.0).unwrap(), probit_pdf(-2.0).unwrap());
        assert!(probit_pdf(f64::NAN).is_err());
        let h = 1e-5;
        let fd = (norm_cdf(1.3 + h) - norm_cdf(1.3 - h)) / (2.0 * h);
        let rel = (fd - norm_pdf(1.3)).abs() / norm_pdf(1.3);
        assert!(rel <= 1e-7, "rel err {rel}");
    }

    #[test]
    fn inverse_round_trip() {
        assert_eq!(probit_inverse(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(
            probit_inverse(probit_cdf(1.7).unwrap()).unwrap(),
            1.7,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(probit_inverse(0.975).unwrap(), 1.959964, epsilon = 1e-5);
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(probit_inverse(p).is_err());
        }
        for &p in &[1e-12, 1e-6, 0.01, 0.3, 0.77, 0.999, 1.0 - 1e-9] {
            let x = probit_inverse(p).unwrap();
            assert_abs_diff_eq!(norm_cdf(x), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn tail_helpers_continuous_at_switch() {
        let a = log_norm_cdf(-30.0 + 1e-9);
        let b = log_norm_cdf(-30.0 - 1e-9);
        assert!((a - b).abs() < 1e-6);
        let a = mills(-30.0 + 1e-9);
        let b = mills(-30.0 - 1e-9);
        assert!((a - b).abs() / a < 1e-6);
        assert!(log_norm_cdf(-200.0).is_finite());
    }

    #[test]
    fn twenty_point_rule() {
        let rule = gauss_hermite(20).unwrap();
        let sum: f64 = rule.weights().iter().sum();
        assert_abs_diff_eq!(sum, PI.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(rule.expect_normal(|x| x * x), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.expect_normal(|_| 1.0), 1.0, epsilon = 1e-12);
        let conv = rule.expect_normal(|x| norm_cdf(0.5 + 0.8 * x));
        // 0.65189232437813 = Φ(0.5 / √1.64)
        assert_abs_diff_eq!(conv, norm_cdf(0.5 / 1.64_f64.sqrt()), epsilon = 1e-8);
        assert_abs_diff_eq!(conv, 0.65189232437813, epsilon = 1e-8);
        for (a, b) in rule.nodes().iter().zip(rule.nodes().iter().rev()) {
            assert_eq!(*a, -*b);
        }
        assert!(rule.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn reliable_scale_grows_with_order() {
        let s20 = reliable_scale(&gauss_hermite(20).unwrap(), CONVOLUTION_TOLERANCE);
        let s40 = reliable_scale(&gauss_hermite(40).unwrap(), CONVOLUTION_TOLERANCE);
        assert!(s20 > 1.8 && s20 < 2.0, "{s20}");
        assert!(s40 > s20 + 0.5, "{s40}");
        assert!(convolution_error(&gauss_hermite(20).unwrap(), s20) <= CONVOLUTION_TOLERANCE);
    }

    #[test]
    fn order_bounds() {
        assert!(gauss_hermite(0).is_err());
        assert!(gauss_hermite(101).is_err());
        assert!(gauss_hermite(1).is_ok());
        assert!(gauss_hermite(100).is_ok());
    }

    #[test]
    fn delta_method() {
        let (s, se) = delta_method_sd(-0.41, 0.41);
        assert_abs_diff_eq!(s, 0.664, epsilon = 5e-3);
        assert_abs_diff_eq!(se, 0.272, epsilon = 5e-3);
        assert_eq!(delta_method_sd(0.0, 0.0), (1.0, 0.0));
        let (s, _) = delta_method_sd(-0.48, 0.25);
        assert_abs_diff_eq!(s, 0.619, epsilon = 1e-3);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cdf_symmetry_and_inverse(x in -8.0..8.0f64) {
                prop_assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() <= 1e-15);
                let lower = -x.abs();
                let back = probit_inverse(norm_cdf(lower)).unwrap();
                prop_assert!((back - lower).abs() <= 1e-9 * x.abs().max(1.0));
            }

            #[test]
            fn log_cdf_matches_cdf(x in -35.0..8.0f64) {
                let direct = norm_cdf(x).ln();
                prop_assert!((log_norm_cdf(x) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
                prop_assert!((mills(x) - norm_pdf(x) / norm_cdf(x)).abs() <= 1e-10 * mills(x).max(1.0));
            }

            #[test]
            fn convolution_within_reliable_scale(d in -3.0..3.0f64, s in 0.0..1.85f64) {
                let rule = gauss_hermite(20).unwrap();
                let q = rule.expect_normal(|z| norm_cdf(d + s * z));
                prop_assert!((q - norm_cdf(d / (1.0 + s * s).sqrt())).abs() <= CONVOLUTION_TOLERANCE);
            }
        }
    }
}
