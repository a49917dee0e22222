use nalgebra::{DMatrix, DVector};

pub(crate) const CONDITION_LIMIT: f64 = 1e12;

/// Inverse of a symmetric positive semidefinite matrix through its
/// eigendecomposition.
pub(crate) struct SymInverse {
    pub inverse: DMatrix<f64>,
    pub condition: f64,
    /// True when eigenvalues below `max / CONDITION_LIMIT` were dropped.
    pub pseudo: bool,
}

pub(crate) fn sym_inverse(m: &DMatrix<f64>) -> SymInverse {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let cutoff = max / CONDITION_LIMIT;
    let mut pseudo = false;
    let mut inverse = DMatrix::zeros(n, n);
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= cutoff || ev <= 0.0 {
            pseudo = true;
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        inverse += (v * v.transpose()) / ev;
    }
    SymInverse {
        inverse,
        condition,
        pseudo,
    }
}

/// Solves `m x = rhs` for symmetric positive definite `m`, reporting the
/// condition number when the system is too ill-conditioned.
pub(crate) fn spd_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, f64> {
    let inv = sym_inverse(m);
    if inv.pseudo || inv.condition > CONDITION_LIMIT {
        return Err(inv.condition);
    }
    Ok(&inv.inverse * rhs)
}

pub(crate) struct Truncated {
    pub x: DVector<f64>,
    /// `rhs` projected onto the retained eigen-directions.
    pub projected: DVector<f64>,
    pub dropped: usize,
}

/// Minimum-norm solution of `m x = rhs` for symmetric PSD `m`, ignoring
/// eigen-directions below `rel_cutoff` times the largest eigenvalue.
pub(crate) fn truncated_solve(m: &DMatrix<f64>, rhs: &DVector<f64>, rel_cutoff: f64) -> Option<Truncated> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    if max <= 0.0 {
        return None;
    }
    let mut x = DVector::zeros(rhs.len());
    let mut projected = DVector::zeros(rhs.len());
    let mut dropped = 0;
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= max * rel_cutoff {
            dropped += 1;
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        let c = v.dot(rhs);
        x += v * (c / ev);
        projected += v * c;
    }
    Some(Truncated { x, projected, dropped })
}

/// Numerical rank via singular values.
pub(crate) fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let tol = max * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * 16.0;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Coefficient of determination from a least-squares fit of `y` on `x`
/// (which should include an intercept column). `None` when `y` has no
/// variance.
pub(crate) fn r_squared(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<f64> {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss <= f64::EPSILON * n * mean.abs().max(1.0) {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(y, 1e-12).ok()?;
    let resid = y - x * beta;
    let rss = resid.norm_squared();
    Some((1.0 - rss / tss).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let inv = sym_inverse(&m);
        assert!(!inv.pseudo);
        assert!((inv.condition - 2.0).abs() < 1e-12);
        assert!((inv.inverse[(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_flagged() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(sym_inverse(&m).pseudo);
        assert!(spd_solve(&m, &DVector::from_vec(vec![1.0, 1.0])).is_err());
        assert_eq!(rank(&m), 1);
        let t = truncated_solve(&m, &DVector::from_vec(vec![1.0, 0.0]), 1e-9).unwrap();
        assert_eq!(t.dropped, 1);
        assert!((t.x[0] - 0.25).abs() < 1e-12 && (t.x[1] - 0.25).abs() < 1e-12);
        assert!((t.projected[0] - 0.5).abs() < 1e-12 && (t.projected[1] - 0.5).abs() < 1e-12);
    }
}
