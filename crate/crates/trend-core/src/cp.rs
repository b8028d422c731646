//! CP (PARAFAC) models and alternating-least-squares fitting.
//!
//! A rank-R model stores three factor matrices `A` (I x R), `B` (J x R) and
//! `C` (K x R) plus per-component weights; entry `(i, j, k)` of the
//! reconstruction is `sum_r w_r * A[i,r] * B[j,r] * C[k,r]`.
//!
//! Fitting alternates exact least-squares solves for one factor with the
//! other two fixed. Each solve `X_(1) * pinv(khatri_rao(C, B)^T)` is computed
//! through the Gram identity `pinv(M^T) = M * pinv(M^T M)` with
//! `M^T M = (C^T C) .* (B^T B)`, which is algebraically the same solution
//! (including rank-deficient designs) at a fraction of the cost.
//!
//! Missing entries are handled by EM imputation: they start at the mean of
//! the observed entries and are replaced by the current model estimate after
//! every full sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hadamard, khatri_rao, pinv, Matrix};
use crate::tensor::Tensor3;

/// Rank-R CP model.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    weights: Vec<f64>,
}

impl CpModel {
    /// Builds a model from factor matrices with unit component weights.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let rank = a.ncols();
        Self::with_weights(a, b, c, vec![1.0; rank])
    }

    /// Builds a model from factor matrices and explicit component weights.
    pub fn with_weights(a: Matrix, b: Matrix, c: Matrix, weights: Vec<f64>) -> Result<Self> {
        let rank = a.ncols();
        if rank == 0 {
            return Err(Error::InvalidArg("model rank must be >= 1".into()));
        }
        if b.ncols() != rank || c.ncols() != rank || weights.len() != rank {
            return Err(Error::DimMismatch(
                "factor matrices and weights must share one rank".into(),
            ));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C")] {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("factor {name} is not finite")));
            }
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("weights are not finite".into()));
        }
        Ok(Self { a, b, c, weights })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// `(I, J, K)` of the tensor this model reconstructs.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    pub fn factor_a(&self) -> &Matrix {
        &self.a
    }

    pub fn factor_b(&self) -> &Matrix {
        &self.b
    }

    pub fn factor_c(&self) -> &Matrix {
        &self.c
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Factor matrix for tensor mode 1, 2 or 3.
    pub fn factor(&self, mode: usize) -> Result<&Matrix> {
        match mode {
            1 => Ok(&self.a),
            2 => Ok(&self.b),
            3 => Ok(&self.c),
            m => Err(Error::InvalidArg(format!("factor: invalid mode {m}"))),
        }
    }

    /// Reconstruction entry `(i, j, k)`.
    pub fn entry(&self, i: usize, j: usize, k: usize) -> f64 {
        (0..self.rank())
            .map(|r| self.weights[r] * self.a[(i, r)] * self.b[(j, r)] * self.c[(k, r)])
            .sum()
    }

    /// Dense reconstruction of the full tensor.
    pub fn reconstruct(&self) -> Tensor3 {
        let dims = self.dims();
        Tensor3::from_fn(dims, |i, j, k| self.entry(i, j, k))
            .expect("model factors are finite by construction")
    }

    /// The `(C kr B) * diag(w)` design matrix (JK x R) against which new
    /// mode-1 slices are projected.
    pub fn mode1_design(&self) -> Result<Matrix> {
        let mut kr = khatri_rao(&self.c, &self.b)?;
        for (r, w) in self.weights.iter().enumerate() {
            let mut col = kr.column_mut(r);
            col *= *w;
        }
        Ok(kr)
    }

    /// Rescales every factor column to unit norm, folding norms into weights.
    ///
    /// Zero columns keep weight zero and are left untouched.
    pub fn normalize(&mut self) {
        for r in 0..self.rank() {
            let mut w = self.weights[r];
            for m in [&mut self.a, &mut self.b, &mut self.c] {
                let norm = m.column(r).norm();
                if norm > 0.0 {
                    let mut col = m.column_mut(r);
                    col /= norm;
                    w *= norm;
                }
            }
            self.weights[r] = w;
        }
    }
}

/// Residual tensor `x - reconstruct(model)` over observed entries.
///
/// Unobserved positions stay masked (sentinel zero).
pub fn residual(x: &Tensor3, model: &CpModel) -> Result<Tensor3> {
    if x.dims() != model.dims() {
        return Err(Error::DimMismatch(format!(
            "residual: tensor dims {:?} vs model dims {:?}",
            x.dims(),
            model.dims()
        )));
    }
    x.sub(&model.reconstruct())
}

/// Factor initialization for ALS.
#[derive(Debug, Clone)]
pub enum Init {
    /// Uniform `[0, 1)` entries drawn from the configured seed.
    RandomUniform,
    /// Start from an existing model of matching dims and rank.
    WarmStart(CpModel),
}

/// ALS fitting configuration.
#[derive(Debug, Clone)]
pub struct AlsConfig {
    /// Hard sweep limit.
    pub max_iters: usize,
    /// Stop when the relative fit changes by less than this between sweeps.
    pub rel_change_tol: f64,
    pub init: Init,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self { max_iters: 200, rel_change_tol: 1e-6, init: Init::RandomUniform, seed: 0 }
    }
}

impl AlsConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// Online partial-refit budget: the inner loop must finish well within
    /// a minute slot, so it gets a loose tolerance and a hard iteration cap.
    pub fn pwo_default() -> Self {
        Self { max_iters: 20, rel_change_tol: 1e-4, init: Init::RandomUniform, seed: 0 }
    }
}

/// Fit diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    /// Relative residual norm over observed entries at the last sweep.
    pub final_fit: f64,
    pub converged: bool,
    /// Two components became near-collinear during fitting.
    pub degenerate: bool,
    pub seed: u64,
    /// Relative residual norm after each sweep.
    pub fit_history: Vec<f64>,
}

/// A fitted model plus its diagnostics.
#[derive(Debug, Clone)]
pub struct CpFit {
    pub model: CpModel,
    pub meta: FitMeta,
}

/// Congruence above which two components count as collapsed (degenerate).
const DEGENERACY_CONGRUENCE: f64 = 0.999;

/// Exact least-squares update for one factor given the other two.
///
/// `unfolding` is the mode-n unfolding of the (imputed) tensor; the design is
/// `khatri_rao(f1, f2)` so the result is the minimizer of
/// `|| unfolding - F * design^T ||_F` with minimum norm.
fn solve_factor(unfolding: &Matrix, f1: &Matrix, f2: &Matrix) -> Result<Matrix> {
    let kr = khatri_rao(f1, f2)?;
    let gram = hadamard(&(f1.transpose() * f1), &(f2.transpose() * f2));
    Ok(unfolding * kr * pinv(&gram)?)
}

fn random_factor(rows: usize, rank: usize, rng: &mut impl rand::Rng) -> Matrix {
    Matrix::from_fn(rows, rank, |_, _| rng.gen_range(0.0..1.0))
}

/// Observed-entry squared error between `x` and dense model values.
pub(crate) fn observed_sse(x: &Tensor3, dense_model: &[f64]) -> f64 {
    match x.mask() {
        None => x
            .values()
            .iter()
            .zip(dense_model)
            .map(|(a, m)| (a - m) * (a - m))
            .sum(),
        Some(mask) => x
            .values()
            .iter()
            .zip(dense_model)
            .zip(mask)
            .filter(|(_, &obs)| obs)
            .map(|((a, m), _)| (a - m) * (a - m))
            .sum(),
    }
}

fn dense_reconstruction(model: &CpModel, buf: &mut [f64]) {
    let (i_dim, j_dim, _) = model.dims();
    let rank = model.rank();
    buf.fill(0.0);
    for r in 0..rank {
        let w = model.weights()[r];
        let mut idx = 0;
        for k in 0..model.dims().2 {
            let ck = w * model.factor_c()[(k, r)];
            for j in 0..j_dim {
                let bjck = ck * model.factor_b()[(j, r)];
                for i in 0..i_dim {
                    buf[idx] += model.factor_a()[(i, r)] * bjck;
                    idx += 1;
                }
            }
        }
    }
}

/// Detects two-component degeneracy: the product of per-mode column cosines
/// approaching +/-1 means two rank-one terms have collapsed onto each other.
fn has_degenerate_pair(model: &CpModel) -> bool {
    let rank = model.rank();
    for r in 0..rank {
        for s in (r + 1)..rank {
            let mut prod = 1.0;
            let mut valid = true;
            for m in [model.factor_a(), model.factor_b(), model.factor_c()] {
                let (u, v) = (m.column(r), m.column(s));
                let nu = u.norm();
                let nv = v.norm();
                if nu == 0.0 || nv == 0.0 {
                    valid = false;
                    break;
                }
                prod *= u.dot(&v) / (nu * nv);
            }
            if valid && prod.abs() > DEGENERACY_CONGRUENCE {
                return true;
            }
        }
    }
    false
}

/// Checks that every slice in every mode has at least one observed entry.
fn check_slice_coverage(x: &Tensor3) -> Result<()> {
    let Some(mask) = x.mask() else { return Ok(()) };
    let (i_dim, j_dim, k_dim) = x.dims();
    let mut seen_i = vec![false; i_dim];
    let mut seen_j = vec![false; j_dim];
    let mut seen_k = vec![false; k_dim];
    let mut idx = 0;
    for k in 0..k_dim {
        for j in 0..j_dim {
            for i in 0..i_dim {
                if mask[idx] {
                    seen_i[i] = true;
                    seen_j[j] = true;
                    seen_k[k] = true;
                }
                idx += 1;
            }
        }
    }
    for (seen, mode) in [(&seen_i, 1), (&seen_j, 2), (&seen_k, 3)] {
        if let Some(pos) = seen.iter().position(|&s| !s) {
            return Err(Error::Degenerate(format!(
                "mode-{mode} slice {pos} has no observed entries"
            )));
        }
    }
    Ok(())
}

/// Fits a rank-`rank` CP model to `x` by alternating least squares.
///
/// Factor updates cycle A, B, C; after each full sweep missing entries are
/// re-imputed from the current model and the relative residual norm over
/// observed entries is recorded. Iteration stops when that fit changes by
/// less than `cfg.rel_change_tol` or `cfg.max_iters` is reached.
pub fn als_fit(x: &Tensor3, rank: usize, cfg: &AlsConfig) -> Result<CpFit> {
    use rand::SeedableRng;

    if rank == 0 {
        return Err(Error::InvalidArg("als_fit: rank must be >= 1".into()));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidArg("als_fit: max_iters must be >= 1".into()));
    }
    if cfg.rel_change_tol <= 0.0 {
        return Err(Error::InvalidArg("als_fit: rel_change_tol must be > 0".into()));
    }
    check_slice_coverage(x)?;
    let dims = x.dims();

    let mut model = match &cfg.init {
        Init::RandomUniform => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            CpModel::new(
                random_factor(dims.0, rank, &mut rng),
                random_factor(dims.1, rank, &mut rng),
                random_factor(dims.2, rank, &mut rng),
            )?
        }
        Init::WarmStart(m) => {
            if m.dims() != dims || m.rank() != rank {
                return Err(Error::DimMismatch(
                    "als_fit: warm-start model dims/rank do not match".into(),
                ));
            }
            m.clone()
        }
    };

    // Working copy with EM-imputed missing entries (mean of observed first).
    let mut work = x.values().to_vec();
    if let Some(mask) = x.mask() {
        let mean = x.observed_mean();
        for (v, &obs) in work.iter_mut().zip(mask) {
            if !obs {
                *v = mean;
            }
        }
    }

    let norm_x = x.frobenius();
    let mut dense = vec![0.0; work.len()];
    let mut fit_history = Vec::new();
    let mut prev_fit = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for sweep in 1..=cfg.max_iters {
        iterations = sweep;
        let work_t = Tensor3::new(dims, std::mem::take(&mut work))?;
        let x1 = work_t.unfold(1)?;
        let x2 = work_t.unfold(2)?;
        let x3 = work_t.unfold(3)?;
        let a = solve_factor(&x1, model.factor_c(), model.factor_b())?;
        let b = solve_factor(&x2, model.factor_c(), &a)?;
        let c = solve_factor(&x3, &b, &a)?;
        model = CpModel::new(a, b, c)?;
        work = work_t.into_values();

        dense_reconstruction(&model, &mut dense);
        if let Some(mask) = x.mask() {
            for (idx, &obs) in mask.iter().enumerate() {
                if !obs {
                    work[idx] = dense[idx];
                }
            }
        }
        let fit = if norm_x > 0.0 { observed_sse(x, &dense).sqrt() / norm_x } else { 0.0 };
        fit_history.push(fit);
        if (prev_fit - fit).abs() < cfg.rel_change_tol {
            converged = true;
            break;
        }
        prev_fit = fit;
    }

    let final_fit = fit_history.last().copied().unwrap_or(0.0);
    let degenerate = has_degenerate_pair(&model);
    Ok(CpFit {
        model,
        meta: FitMeta {
            iterations,
            final_fit,
            converged,
            degenerate,
            seed: cfg.seed,
            fit_history,
        },
    })
}

// ---------------------------------------------------------------------------
// JSON document form
// ---------------------------------------------------------------------------

/// Row-major matrix payload for JSON documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &Matrix) -> Self {
        let mut values = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                values.push(m[(r, c)]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), values }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.values.len() != self.rows * self.cols {
            return Err(Error::Data("matrix document has wrong value count".into()));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |r, c| {
            self.values[r * self.cols + c]
        }))
    }
}

/// Serialized CP model: rank, dims, row-major factors, weights, fit metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CpModelDoc {
    pub rank: usize,
    pub dims: [usize; 3],
    pub a: MatrixDoc,
    pub b: MatrixDoc,
    pub c: MatrixDoc,
    pub column_norms: Vec<f64>,
    pub meta: Option<FitMeta>,
}

impl CpModelDoc {
    pub fn from_fit(fit: &CpFit) -> Self {
        let mut doc = Self::from_model(&fit.model);
        doc.meta = Some(fit.meta.clone());
        doc
    }

    pub fn from_model(model: &CpModel) -> Self {
        let dims = model.dims();
        Self {
            rank: model.rank(),
            dims: [dims.0, dims.1, dims.2],
            a: MatrixDoc::from_matrix(model.factor_a()),
            b: MatrixDoc::from_matrix(model.factor_b()),
            c: MatrixDoc::from_matrix(model.factor_c()),
            column_norms: model.weights().to_vec(),
            meta: None,
        }
    }

    pub fn into_model(self) -> Result<CpModel> {
        let model = CpModel::with_weights(
            self.a.to_matrix()?,
            self.b.to_matrix()?,
            self.c.to_matrix()?,
            self.column_norms,
        )?;
        if model.rank() != self.rank || model.dims() != (self.dims[0], self.dims[1], self.dims[2])
        {
            return Err(Error::Data("model document header disagrees with factors".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp_validate::{align_factors, tcc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_model(
        dims: (usize, usize, usize),
        rank: usize,
        seed: u64,
    ) -> CpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |rows| Matrix::from_fn(rows, rank, |_, _| rng.gen_range(-1.0..1.0f64));
        let a = gen(dims.0);
        let b = gen(dims.1);
        let c = gen(dims.2);
        CpModel::new(a, b, c).unwrap()
    }

    #[test]
    fn reconstruct_degenerate_and_all_ones() {
        let one = Matrix::from_element(1, 1, 1.0);
        let m = CpModel::new(one.clone(), one.clone(), one).unwrap();
        assert_eq!(m.reconstruct().values(), &[1.0]);

        let ones = Matrix::from_element(2, 2, 1.0);
        let m = CpModel::new(ones.clone(), ones.clone(), ones).unwrap();
        assert!(m.reconstruct().values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn unfold_identity_links_model_and_khatri_rao() {
        // The binding layout contract, in all three modes.
        for seed in 0..5 {
            let m = random_model((4, 3, 5), 3, seed);
            let recon = m.reconstruct();
            let checks = [
                (1, m.factor_a(), m.factor_c(), m.factor_b()),
                (2, m.factor_b(), m.factor_c(), m.factor_a()),
                (3, m.factor_c(), m.factor_b(), m.factor_a()),
            ];
            for (mode, f, kr1, kr2) in checks {
                let unf = recon.unfold(mode).unwrap();
                let expect = f * khatri_rao(kr1, kr2).unwrap().transpose();
                let rel = (&unf - &expect).norm() / recon.frobenius();
                assert!(rel < 1e-12, "mode {mode} identity violated: {rel}");
            }
        }
    }

    #[test]
    fn als_recovers_rank_one_outer_product() {
        let a = [1.0, 2.0, 0.5];
        let b = [0.3, 1.4];
        let c = [2.0, 1.0, 0.25, 3.0];
        let x = Tensor3::from_fn((3, 2, 4), |i, j, k| a[i] * b[j] * c[k]).unwrap();
        let fit = als_fit(&x, 1, &AlsConfig::with_seed(3)).unwrap();
        assert!(fit.meta.final_fit < 1e-8, "fit {}", fit.meta.final_fit);
    }

    #[test]
    fn als_recovers_random_rank_three() {
        let truth = random_model((10, 4, 20), 3, 100);
        let x = truth.reconstruct();
        let cfg = AlsConfig { rel_change_tol: 1e-10, max_iters: 500, ..AlsConfig::with_seed(4) };
        let fit = als_fit(&x, 3, &cfg).unwrap();
        assert!(fit.meta.final_fit < 1e-6, "fit {}", fit.meta.final_fit);
        let align = align_factors(&truth, &fit.model, &[1, 2, 3]).unwrap();
        for (r, congruence) in align.per_column.iter().enumerate() {
            assert!(congruence > &0.99, "column {r} congruence {congruence}");
        }
    }

    #[test]
    fn residual_contracts() {
        let m = random_model((3, 2, 4), 2, 5);
        let x = m.reconstruct();
        let r = residual(&x, &m).unwrap();
        assert!(r.frobenius() < 1e-12);

        let zero = CpModel::new(
            Matrix::zeros(3, 1),
            Matrix::zeros(2, 1),
            Matrix::zeros(4, 1),
        )
        .unwrap();
        let r = residual(&x, &zero).unwrap();
        assert_eq!(r.values(), x.values());
    }

    #[test]
    fn residual_norm_matches_reported_fit() {
        let truth = random_model((6, 3, 8), 2, 12);
        let mut x = truth.reconstruct();
        // Perturb so the converged fit is nonzero.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for k in 0..8 {
            for j in 0..3 {
                for i in 0..6 {
                    let v = x.get(i, j, k).unwrap() + rng.gen_range(-0.01..0.01);
                    x.set(i, j, k, v).unwrap();
                }
            }
        }
        let fit = als_fit(&x, 2, &AlsConfig::with_seed(8)).unwrap();
        let r = residual(&x, &fit.model).unwrap();
        let recomputed = r.frobenius() / x.frobenius();
        assert!(
            (recomputed - fit.meta.final_fit).abs() < 1e-12,
            "{recomputed} vs {}",
            fit.meta.final_fit
        );
    }

    #[test]
    fn als_em_handles_missing_entries() {
        let truth = random_model((8, 4, 10), 2, 21);
        let dense = truth.reconstruct();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mask: Vec<bool> = (0..dense.len()).map(|_| rng.gen_range(0.0..1.0) > 0.1).collect();
        let x = Tensor3::with_mask(dense.dims(), dense.values().to_vec(), mask).unwrap();
        let cfg = AlsConfig { max_iters: 500, rel_change_tol: 1e-12, ..AlsConfig::with_seed(2) };
        let fit = als_fit(&x, 2, &cfg).unwrap();
        assert!(fit.meta.final_fit < 1e-4, "fit {}", fit.meta.final_fit);
    }

    #[test]
    fn als_fit_monotone_with_and_without_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for trial in 0..6 {
            let dims = (6, 3, 7);
            let values: Vec<f64> =
                (0..dims.0 * dims.1 * dims.2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x = if trial % 2 == 0 {
                Tensor3::new(dims, values).unwrap()
            } else {
                let mask: Vec<bool> =
                    (0..dims.0 * dims.1 * dims.2).map(|_| rng.gen_range(0.0..1.0) > 0.1).collect();
                Tensor3::with_mask(dims, values, mask).unwrap()
            };
            let cfg = AlsConfig { max_iters: 40, ..AlsConfig::with_seed(trial as u64) };
            let fit = als_fit(&x, 2, &cfg).unwrap();
            for w in fit.meta.fit_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "fit increased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn als_is_deterministic_per_seed() {
        let x = random_model((5, 4, 6), 2, 7).reconstruct();
        let cfg = AlsConfig::with_seed(42);
        let f1 = als_fit(&x, 2, &cfg).unwrap();
        let f2 = als_fit(&x, 2, &cfg).unwrap();
        assert_eq!(f1.model, f2.model);
        assert_eq!(f1.meta.fit_history, f2.meta.fit_history);
    }

    #[test]
    fn als_rejects_all_missing_fiber() {
        let dims = (3, 2, 4);
        let n = dims.0 * dims.1 * dims.2;
        let mut mask = vec![true; n];
        // Blank out the whole i=1 horizontal slice.
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                mask[1 + dims.0 * (j + dims.1 * k)] = false;
            }
        }
        let x = Tensor3::with_mask(dims, vec![1.0; n], mask).unwrap();
        assert!(matches!(
            als_fit(&x, 1, &AlsConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn warm_start_requires_matching_shape() {
        let x = random_model((5, 4, 6), 2, 1).reconstruct();
        let other = random_model((5, 4, 7), 2, 1);
        let cfg = AlsConfig { init: Init::WarmStart(other), ..AlsConfig::default() };
        assert!(matches!(als_fit(&x, 2, &cfg), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn normalize_preserves_reconstruction() {
        let mut m = random_model((4, 3, 5), 3, 9);
        let before = m.reconstruct();
        m.normalize();
        let after = m.reconstruct();
        let rel = before.sub(&after).unwrap().frobenius() / before.frobenius();
        assert!(rel < 1e-12);
        for r in 0..m.rank() {
            assert!((m.factor_a().column(r).norm() - 1.0).abs() < 1e-12);
            assert!(m.weights()[r] >= 0.0);
        }
    }

    #[test]
    fn model_doc_round_trip() {
        let truth = random_model((4, 3, 5), 2, 31);
        let x = truth.reconstruct();
        let fit = als_fit(&x, 2, &AlsConfig::with_seed(6)).unwrap();
        let doc = CpModelDoc::from_fit(&fit);
        let json = serde_json::to_string(&doc).unwrap();
        let parsed: CpModelDoc = serde_json::from_str(&json).unwrap();
        let model = parsed.into_model().unwrap();
        assert_eq!(model, fit.model);
    }

    #[test]
    fn reconstruct_after_fit_reproduces_low_rank_input() {
        let truth = random_model((6, 4, 7), 2, 17);
        let x = truth.reconstruct();
        let cfg = AlsConfig { rel_change_tol: 1e-12, max_iters: 500, ..AlsConfig::with_seed(5) };
        let fit = als_fit(&x, 2, &cfg).unwrap();
        let recon = fit.model.reconstruct();
        let rel = x.sub(&recon).unwrap().frobenius() / x.frobenius();
        assert!(rel < 1e-6, "reconstruction error {rel}");
    }

    // tcc examples live in cp_validate; this guards the re-export used here.
    #[test]
    fn tcc_smoke() {
        assert!((tcc(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
