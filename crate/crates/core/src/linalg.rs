//! Dense matrix helpers: matrix exponential and numerical nullspace.
//!
//! The exponential uses scaling-and-squaring around a [6/6] Pade approximant.
//! Eigendecomposition is deliberately avoided: the generators this crate
//! exponentiates (master-equation Hamiltonians) need not be diagonalizable.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("time must be finite and >= 0, got {0}")]
    InvalidTime(f64),
    #[error("linear solve failed: the Pade denominator is singular")]
    SingularDenominator,
}

// Coefficients of the [6/6] diagonal Pade approximant to exp(x).
const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Computes `exp(t * m)` by scaling-and-squaring with a [6/6] Pade core.
pub fn matrix_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if !t.is_finite() || t < 0.0 {
        return Err(LinalgError::InvalidTime(t));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = m.nrows();
    let a = m * t;

    // Column-sum norm decides how far to scale down.
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = &a / 2f64.powi(s as i32);

    // Evaluate numerator and denominator of the Pade approximant.
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut num = DMatrix::<f64>::identity(n, n);
    let mut den = DMatrix::<f64>::identity(n, n);
    let mut sign = 1.0;
    for c in PADE6.iter().skip(1) {
        term = &term * &scaled;
        sign = -sign;
        num += &term * *c;
        den += &term * (*c * sign);
    }
    let mut result = den.lu().solve(&num).ok_or(LinalgError::SingularDenominator)?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// Orthonormal basis of the (right) nullspace of `m`.
///
/// Singular values below `tol` times the largest one count as zero. The basis
/// comes from the right singular vectors, so it is orthonormal; a nonsingular
/// square matrix yields an empty basis.
pub fn nullspace(m: &DMatrix<f64>, tol: f64) -> Result<Vec<DVector<f64>>, LinalgError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let cols = m.ncols();
    // A thin SVD of a wide matrix only exposes min(rows, cols) right singular
    // vectors; padding with zero rows recovers the full set.
    let work = if m.nrows() < cols {
        let mut padded = DMatrix::<f64>::zeros(cols, cols);
        padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };

    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("SVD with v_t requested");
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s));

    let mut basis = Vec::new();
    if sigma_max == 0.0 {
        // Zero matrix: every direction is null.
        for j in 0..cols {
            let mut v = DVector::zeros(cols);
            v[j] = 1.0;
            basis.push(v);
        }
        return Ok(basis);
    }
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < tol * sigma_max {
            basis.push(v_t.row(i).transpose());
        }
    }
    Ok(basis)
}
