//! Shared numerical policy.
//!
//! Every rank decision in this crate goes through [`rank_tolerance`] /
//! [`svd_rank`] so that observability certificates and candidate solves can
//! never disagree about whether a stacked operator is full rank.

use nalgebra::{DMatrix, DVector};

/// Singular-value threshold below which a value is treated as zero:
/// `max(rows, cols) · σ_max · ε`, the same rule numpy and MATLAB use for
/// `rank`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * f64::EPSILON
}

/// Numerical rank of `m` by SVD with the shared tolerance.
pub fn svd_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svals = m.clone().singular_values();
    let sigma_max = svals.max();
    let tol = rank_tolerance(m.nrows(), m.ncols(), sigma_max);
    svals.iter().filter(|&&s| s > tol).count()
}

/// Two-level closeness tolerance for comparing reconstructed states.
///
/// Coordinates `a`, `b` are close when `|a − b| ≤ abs + rel·max(|a|,|b|)`.
/// The absolute part dominates near zero; the relative part keeps large
/// candidate values (wrong hypotheses easily reach 1e7) comparable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqTol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for EqTol {
    fn default() -> Self {
        EqTol {
            abs: 1e-6,
            rel: 1e-8,
        }
    }
}

impl EqTol {
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs + self.rel * a.abs().max(b.abs())
    }

    /// Coordinate-wise closeness of two vectors of equal length.
    pub fn vectors_close(&self, x: &DVector<f64>, y: &DVector<f64>) -> bool {
        x.len() == y.len() && x.iter().zip(y.iter()).all(|(&a, &b)| self.close(a, b))
    }
}
