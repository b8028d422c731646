//! Dense matrix primitives shared by the tensor and model code.
//!
//! Matrices are `nalgebra` dynamic matrices; this module adds the
//! factorization-specific pieces: the Khatri-Rao product, an SVD-based
//! Moore-Penrose pseudo-inverse with a relative rank cutoff, and row-wise
//! least-squares solvers (dense and masked).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense `f64` matrix used for unfoldings and factor matrices.
pub type Matrix = DMatrix<f64>;

/// Relative singular-value cutoff for [`pinv`]: values below
/// `PINV_RTOL_SCALE * max(rows, cols) * sigma_max` are treated as zero.
pub const PINV_RTOL_SCALE: f64 = 1e-12;

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains NaN or infinity")))
    }
}

/// Column-wise Kronecker (Khatri-Rao) product of `p` (M x R) and `q` (N x R).
///
/// Row `m * N + n` of the result is `p[m, r] * q[n, r]`, so for CP factors
/// the identity `unfold(M, 1) = A * khatri_rao(C, B)^T` holds with the
/// unfolding convention used by [`crate::tensor::Tensor3::unfold`].
pub fn khatri_rao(p: &Matrix, q: &Matrix) -> Result<Matrix> {
    if p.ncols() != q.ncols() {
        return Err(Error::DimMismatch(format!(
            "khatri_rao: column counts differ ({} vs {})",
            p.ncols(),
            q.ncols()
        )));
    }
    let (m, n, r) = (p.nrows(), q.nrows(), p.ncols());
    let mut out = Matrix::zeros(m * n, r);
    for c in 0..r {
        for i in 0..m {
            let pv = p[(i, c)];
            for j in 0..n {
                out[(i * n + j, c)] = pv * q[(j, c)];
            }
        }
    }
    Ok(out)
}

/// Moore-Penrose pseudo-inverse via SVD.
///
/// Singular values below `1e-12 * max(rows, cols) * sigma_max` are treated
/// as zero, which keeps near-collinear Khatri-Rao designs well behaved.
pub fn pinv(m: &Matrix) -> Result<Matrix> {
    check_finite(m, "pinv input")?;
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge in pinv".into()))?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = PINV_RTOL_SCALE * m.nrows().max(m.ncols()) as f64 * sigma_max;
    svd.pseudo_inverse(eps)
        .map_err(|e| Error::Numeric(format!("pseudo_inverse: {e}")))
}

/// Solves `X * design ~ targets` row-wise: returns `targets * pinv(design)`.
///
/// `targets` is P x D and `design` is R x D; the result is P x R. Residual
/// rows are orthogonal to the row space of `design`.
pub fn lsq_rows(targets: &Matrix, design: &Matrix) -> Result<Matrix> {
    if targets.ncols() != design.ncols() {
        return Err(Error::DimMismatch(format!(
            "lsq_rows: targets have {} columns but design has {}",
            targets.ncols(),
            design.ncols()
        )));
    }
    Ok(targets * pinv(design)?)
}

/// Masked variant of [`lsq_rows`]: row `p` of `targets` is solved using only
/// the columns where `observed[p]` is true.
///
/// Rows with no observed entry are an error (nothing constrains them).
pub fn lsq_rows_masked(
    targets: &Matrix,
    design: &Matrix,
    observed: &[Vec<bool>],
) -> Result<Matrix> {
    if targets.ncols() != design.ncols() {
        return Err(Error::DimMismatch(format!(
            "lsq_rows_masked: targets have {} columns but design has {}",
            targets.ncols(),
            design.ncols()
        )));
    }
    if observed.len() != targets.nrows() {
        return Err(Error::DimMismatch(
            "lsq_rows_masked: one mask row per target row required".into(),
        ));
    }
    let rank = design.nrows();
    let mut out = Matrix::zeros(targets.nrows(), rank);
    for p in 0..targets.nrows() {
        let row_mask = &observed[p];
        if row_mask.len() != targets.ncols() {
            return Err(Error::DimMismatch(
                "lsq_rows_masked: mask row length mismatch".into(),
            ));
        }
        let cols: Vec<usize> = (0..row_mask.len()).filter(|&c| row_mask[c]).collect();
        if cols.is_empty() {
            return Err(Error::Degenerate(format!(
                "lsq_rows_masked: row {p} has no observed entries"
            )));
        }
        let sub_t = Matrix::from_fn(1, cols.len(), |_, c| targets[(p, cols[c])]);
        let sub_d = Matrix::from_fn(rank, cols.len(), |r, c| design[(r, cols[c])]);
        let sol = lsq_rows(&sub_t, &sub_d)?;
        for r in 0..rank {
            out[(p, r)] = sol[(0, r)];
        }
    }
    Ok(out)
}

/// Hadamard (entrywise) product of two equally sized matrices.
pub(crate) fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    a.component_mul(b)
}
