//! Residual extraction for data the model was not trained on.
//!
//! Offline, a new mode-1 slice is projected onto a trained model: the slice
//! loading is the least-squares solution
//! `a = unfold(x, 1) * pinv((C kr B)^T)` and the residual is whatever the
//! projection cannot explain (it is orthogonal to the design columns).
//!
//! Online, a [`TensorWindow`] keeps the last `W` lateral (time) slices and
//! refreshes the model each minute in one of two ways:
//!
//! * **FWO** (full window optimization): a complete ALS refit of `A`, `B`
//!   and all `W` rows of `C`, warm-started from the previous model.
//! * **PWO** (partial window optimization): the first `W - 1` rows of `C`
//!   are frozen at their previous values; each inner iteration solves the
//!   newest time loading `c(t)` from the newest slice, writes it into the
//!   last row of `C`, then fully refreshes `A` and `B` against the window.
//!   The shifted `C` seeds its last row with the loading just evicted from
//!   the window front.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::cp::{als_fit, AlsConfig, CpModel, FitMeta, Init};
use crate::error::{Error, Result};
use crate::linalg::{hadamard, khatri_rao, lsq_rows_masked, pinv, Matrix};
use crate::tensor::Tensor3;

/// Result of projecting one new mode-1 slice onto a trained model.
#[derive(Debug, Clone)]
pub struct SliceProjection {
    /// The solved 1 x R loading vector.
    pub loading: Vec<f64>,
    /// Residual `1 x J x K` tensor; masked positions stay masked.
    pub residual: Tensor3,
    /// Relative residual norm over observed entries.
    pub fit: f64,
}

/// Projects a `1 x J x K` slice onto `model`'s (B, C) subspace.
///
/// Masked entries are excluded from the least-squares solve and stay masked
/// in the residual.
pub fn project_slice(x_new: &Tensor3, model: &CpModel) -> Result<SliceProjection> {
    let (i, j, k) = x_new.dims();
    let (_, mj, mk) = model.dims();
    if i != 1 || j != mj || k != mk {
        return Err(Error::DimMismatch(format!(
            "project_slice: slice dims {:?}, model expects (1, {mj}, {mk})",
            x_new.dims()
        )));
    }
    if x_new.observed_count() == 0 {
        return Err(Error::Degenerate("project_slice: slice is entirely masked".into()));
    }
    let design = model.mode1_design()?.transpose(); // R x JK
    let row = x_new.unfold(1)?; // 1 x JK
    let loading_m = match x_new.unfold_mask(1)? {
        None => row.clone() * pinv(&design)?,
        Some(mask) => lsq_rows_masked(&row, &design, &mask)?,
    };
    let estimate = &loading_m * &design;
    let resid_row = &row - &estimate;
    let folded = Tensor3::fold(&resid_row, 1, (1, j, k))?;
    let residual = match x_new.mask() {
        None => folded,
        Some(m) => Tensor3::with_mask((1, j, k), folded.values().to_vec(), m.to_vec())?,
    };
    let norm_x = x_new.frobenius();
    let fit = if norm_x > 0.0 { residual.frobenius() / norm_x } else { 0.0 };
    Ok(SliceProjection {
        loading: (0..model.rank()).map(|r| loading_m[(0, r)]).collect(),
        residual,
        fit,
    })
}

/// Outcome of one online step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Model state after the step (C has exactly `W` rows).
    pub model: CpModel,
    /// Residual of the newest slice, `I x J`.
    pub residual: Matrix,
    /// Inner iterations used by this step.
    pub iterations: usize,
    /// Wall time of the numeric core.
    pub elapsed: Duration,
    /// Relative residual norm of the whole window at the end of the step.
    pub fit: f64,
}

/// Sliding tensor window over the time mode with the current model state.
#[derive(Debug, Clone)]
pub struct TensorWindow {
    entities: usize,
    metrics: usize,
    width: usize,
    rank: usize,
    slices: VecDeque<Matrix>,
    /// Per-slice observation masks (column-major `i + I*j`), allocated only
    /// once any entry is unobserved.
    masks: Option<VecDeque<Vec<bool>>>,
    model: Option<CpModel>,
    /// Absolute index of the newest buffered slice.
    t: usize,
}

impl TensorWindow {
    pub fn new(entities: usize, metrics: usize, width: usize, rank: usize) -> Result<Self> {
        if entities == 0 || metrics == 0 {
            return Err(Error::InvalidArg("window: entities and metrics must be >= 1".into()));
        }
        if width < 2 {
            return Err(Error::InvalidArg("window: width must be >= 2".into()));
        }
        if rank == 0 {
            return Err(Error::InvalidArg("window: rank must be >= 1".into()));
        }
        Ok(Self {
            entities,
            metrics,
            width,
            rank,
            slices: VecDeque::with_capacity(width),
            masks: None,
            model: None,
            t: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn entities(&self) -> usize {
        self.entities
    }

    /// Absolute index of the newest buffered slice.
    pub fn current_minute(&self) -> usize {
        self.t
    }

    pub fn is_warm(&self) -> bool {
        self.slices.len() == self.width
    }

    pub fn model(&self) -> Option<&CpModel> {
        self.model.as_ref()
    }

    fn check_slice(&self, slice: &Matrix) -> Result<()> {
        if slice.nrows() != self.entities || slice.ncols() != self.metrics {
            return Err(Error::DimMismatch(format!(
                "window: slice is {}x{}, expected {}x{}",
                slice.nrows(),
                slice.ncols(),
                self.entities,
                self.metrics
            )));
        }
        if !slice.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("window: slice contains NaN/inf".into()));
        }
        Ok(())
    }

    /// Buffers a slice during warm-up; returns true once the buffer is full.
    pub fn push_warmup(&mut self, slice: Matrix) -> Result<bool> {
        if self.is_warm() {
            return Err(Error::InvalidArg(
                "window: already warm; use fwo_step/pwo_step".into(),
            ));
        }
        self.check_slice(&slice)?;
        self.t = self.slices.len();
        self.slices.push_back(slice);
        if let Some(masks) = &mut self.masks {
            masks.push_back(vec![true; self.entities * self.metrics]);
        }
        Ok(self.is_warm())
    }

    /// Window contents as an `I x J x W` tensor (masked if any entry is).
    pub fn window_tensor(&self) -> Result<Tensor3> {
        if self.slices.is_empty() {
            return Err(Error::InvalidArg("window: empty".into()));
        }
        let (i_dim, j_dim, k_dim) = (self.entities, self.metrics, self.slices.len());
        let mut values = vec![0.0; i_dim * j_dim * k_dim];
        for (k, slice) in self.slices.iter().enumerate() {
            for j in 0..j_dim {
                for i in 0..i_dim {
                    values[i + i_dim * (j + j_dim * k)] = slice[(i, j)];
                }
            }
        }
        match &self.masks {
            None => Tensor3::new((i_dim, j_dim, k_dim), values),
            Some(masks) => {
                let mut mask = vec![true; i_dim * j_dim * k_dim];
                for (k, m) in masks.iter().enumerate() {
                    for j in 0..j_dim {
                        for i in 0..i_dim {
                            mask[i + i_dim * (j + j_dim * k)] = m[i + i_dim * j];
                        }
                    }
                }
                Tensor3::with_mask((i_dim, j_dim, k_dim), values, mask)
            }
        }
    }

    /// Fits the initial model by offline ALS once the buffer is full.
    pub fn init_model(&mut self, cfg: &AlsConfig) -> Result<FitMeta> {
        self.init_model_best_of(cfg, 1)
    }

    /// Cold-start fit with several random inits, keeping the best fit. The
    /// whole stream inherits this model through warm starts, so a poor
    /// initial local optimum would persist.
    pub fn init_model_best_of(&mut self, cfg: &AlsConfig, starts: usize) -> Result<FitMeta> {
        if starts == 0 {
            return Err(Error::InvalidArg("window: starts must be >= 1".into()));
        }
        if !self.is_warm() {
            return Err(Error::InvalidArg(format!(
                "window: need {} slices before init, have {}",
                self.width,
                self.slices.len()
            )));
        }
        let x = self.window_tensor()?;
        let mut best: Option<crate::cp::CpFit> = None;
        for s in 0..starts {
            let attempt = AlsConfig { seed: cfg.seed.wrapping_add(s as u64), ..cfg.clone() };
            let fit = als_fit(&x, self.rank, &attempt)?;
            if best.as_ref().map_or(true, |b| fit.meta.final_fit < b.meta.final_fit) {
                best = Some(fit);
            }
        }
        let fit = best.expect("starts >= 1");
        self.model = Some(fit.model);
        Ok(fit.meta)
    }

    fn slide(&mut self, slice: Matrix) {
        self.slices.pop_front();
        self.slices.push_back(slice);
        if let Some(masks) = &mut self.masks {
            masks.pop_front();
            masks.push_back(vec![true; self.entities * self.metrics]);
        }
        self.t += 1;
    }

    fn require_model(&self) -> Result<&CpModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidArg("window: model not initialized".into()))
    }

    /// Residual of the newest slice given factors and the last row of C.
    fn newest_residual(&self, model: &CpModel) -> Matrix {
        let slice = self.slices.back().expect("window is warm");
        let last = model.factor_c().nrows() - 1;
        Matrix::from_fn(self.entities, self.metrics, |i, j| {
            slice[(i, j)] - model.entry(i, j, last)
        })
    }

    /// Full refit of the slid window, warm-started from the previous model.
    pub fn fwo_step(&mut self, slice: Matrix, cfg: &AlsConfig) -> Result<StepResult> {
        self.check_slice(&slice)?;
        let prev = self.require_model()?.clone();
        if !self.is_warm() {
            return Err(Error::InvalidArg("window: not warmed up".into()));
        }
        self.slide(slice);
        let x = self.window_tensor()?;
        let started = Instant::now();
        let cfg = AlsConfig { init: Init::WarmStart(prev), ..cfg.clone() };
        let fit = als_fit(&x, self.rank, &cfg)?;
        let elapsed = started.elapsed();
        let residual = self.newest_residual(&fit.model);
        self.model = Some(fit.model.clone());
        Ok(StepResult {
            model: fit.model,
            residual,
            iterations: fit.meta.iterations,
            elapsed,
            fit: fit.meta.final_fit,
        })
    }

    /// Partial refit: freeze old time loadings, solve only the newest one.
    ///
    /// Initialization: `A`, `B` from the previous step; `C` rows shift up by
    /// one and the freed last row is seeded with the evicted oldest loading.
    /// Each inner iteration solves `c(t)` from the newest slice, refreshes
    /// `A` against the whole window, then `B` likewise, until the window fit
    /// change drops below the tolerance or the iteration cap.
    pub fn pwo_step(&mut self, slice: Matrix, cfg: &AlsConfig) -> Result<StepResult> {
        self.check_slice(&slice)?;
        let prev = self.require_model()?.clone();
        if !self.is_warm() {
            return Err(Error::InvalidArg("window: not warmed up".into()));
        }
        self.slide(slice);

        let started = Instant::now();
        let rank = self.rank;
        let w = self.width;
        let mut a = prev.factor_a().clone();
        let mut b = prev.factor_b().clone();
        let prev_c = prev.factor_c();
        let mut c = Matrix::from_fn(w, rank, |r, col| {
            if r + 1 < w {
                prev_c[(r + 1, col)]
            } else {
                prev_c[(0, col)]
            }
        });

        let x = self.window_tensor()?;
        let masked = x.has_mask();
        let mut work = x.clone();
        if masked {
            // Imputation keeps the dense normal-equation updates exact.
            let warm = CpModel::new(a.clone(), b.clone(), c.clone())?;
            impute(&mut work, &x, &warm)?;
        }

        let newest = self.slices.back().expect("warm").clone();
        // Mode-3 unfolding of the newest lateral slice: a 1 x (I*J) row.
        let x_t = Matrix::from_fn(1, self.entities * self.metrics, |_, col| {
            newest[(col % self.entities, col / self.entities)]
        });

        let norm_x = x.frobenius();
        let mut prev_fit = f64::INFINITY;
        let mut fit = f64::INFINITY;
        let mut iterations = 0;
        for iter in 1..=cfg.max_iters {
            iterations = iter;
            let x1 = work.unfold(1)?;
            let x2 = work.unfold(2)?;

            // c(t) from the newest slice against the (B kr A) design.
            let kr_ba = khatri_rao(&b, &a)?;
            let gram_ba = hadamard(&(b.transpose() * &b), &(a.transpose() * &a));
            let c_t = &x_t * kr_ba * pinv(&gram_ba)?;
            for col in 0..rank {
                c[(w - 1, col)] = c_t[(0, col)];
            }

            // Full least-squares refresh of A, then B, over the window.
            let kr_cb = khatri_rao(&c, &b)?;
            let gram_cb = hadamard(&(c.transpose() * &c), &(b.transpose() * &b));
            a = x1 * kr_cb * pinv(&gram_cb)?;
            let kr_ca = khatri_rao(&c, &a)?;
            let gram_ca = hadamard(&(c.transpose() * &c), &(a.transpose() * &a));
            b = x2 * kr_ca * pinv(&gram_ca)?;

            let model = CpModel::new(a.clone(), b.clone(), c.clone())?;
            if masked {
                impute(&mut work, &x, &model)?;
            }
            fit = relative_fit(&x, &model, norm_x);
            if (prev_fit - fit).abs() < cfg.rel_change_tol {
                break;
            }
            prev_fit = fit;
        }
        let model = CpModel::new(a, b, c)?;
        let elapsed = started.elapsed();
        let residual = self.newest_residual(&model);
        self.model = Some(model.clone());
        Ok(StepResult { model, residual, iterations, elapsed, fit })
    }

    /// Adds one entity mid-stream with its (possibly partial) history over
    /// the buffered window; `history[k]` is the entity's metric row at
    /// buffered slice `k`, or `None` where it was not yet observed.
    ///
    /// The new `A` row is initialized by least squares against the current
    /// (B, C) design restricted to the observed minutes.
    pub fn add_entity(&mut self, history: &[Option<Vec<f64>>]) -> Result<()> {
        if history.len() != self.slices.len() {
            return Err(Error::DimMismatch(format!(
                "add_entity: history has {} slices, window holds {}",
                history.len(),
                self.slices.len()
            )));
        }
        for row in history.iter().flatten() {
            if row.len() != self.metrics {
                return Err(Error::DimMismatch("add_entity: metric row length".into()));
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("add_entity: history contains NaN/inf".into()));
            }
        }
        if history.iter().all(|h| h.is_none()) {
            return Err(Error::Degenerate("add_entity: entirely unobserved history".into()));
        }

        let old_entities = self.entities;
        if self.masks.is_none() {
            self.masks = Some(
                (0..self.slices.len())
                    .map(|_| vec![true; old_entities * self.metrics])
                    .collect(),
            );
        }

        self.entities += 1;
        let new_i = self.entities;
        let mut new_masks = VecDeque::with_capacity(self.slices.len());
        let old_masks = self.masks.take().expect("just materialized");
        for (k, slice) in self.slices.iter_mut().enumerate() {
            let mut grown = Matrix::zeros(new_i, self.metrics);
            grown.view_mut((0, 0), (old_entities, self.metrics)).copy_from(slice);
            let mut mask = vec![true; new_i * self.metrics];
            for j in 0..self.metrics {
                for i in 0..old_entities {
                    mask[i + new_i * j] = old_masks[k][i + old_entities * j];
                }
            }
            match &history[k] {
                Some(row) => {
                    for (j, v) in row.iter().enumerate() {
                        grown[(new_i - 1, j)] = *v;
                    }
                }
                None => {
                    for j in 0..self.metrics {
                        mask[(new_i - 1) + new_i * j] = false;
                    }
                }
            }
            *slice = grown;
            new_masks.push_back(mask);
        }
        self.masks = Some(new_masks);

        if let Some(model) = &self.model {
            // Project the observed part of the history onto (B, C).
            let design = model.mode1_design()?.transpose(); // R x (J*W)
            let j_dim = self.metrics;
            let w = self.slices.len();
            let mut target = Matrix::zeros(1, j_dim * w);
            let mut mask_row = vec![false; j_dim * w];
            for (k, h) in history.iter().enumerate() {
                if let Some(row) = h {
                    for (j, v) in row.iter().enumerate() {
                        target[(0, j + j_dim * k)] = *v;
                        mask_row[j + j_dim * k] = true;
                    }
                }
            }
            let a_row = lsq_rows_masked(&target, &design, std::slice::from_ref(&mask_row))?;
            let old_a = model.factor_a();
            let mut a = Matrix::zeros(new_i, model.rank());
            a.view_mut((0, 0), (old_entities, model.rank())).copy_from(old_a);
            for r in 0..model.rank() {
                a[(new_i - 1, r)] = a_row[(0, r)];
            }
            self.model = Some(CpModel::with_weights(
                a,
                model.factor_b().clone(),
                model.factor_c().clone(),
                model.weights().to_vec(),
            )?);
        }
        Ok(())
    }
}

fn relative_fit(x: &Tensor3, model: &CpModel, norm_x: f64) -> f64 {
    if norm_x == 0.0 {
        return 0.0;
    }
    let (i_dim, j_dim, k_dim) = x.dims();
    let mut sse = 0.0;
    for k in 0..k_dim {
        for j in 0..j_dim {
            for i in 0..i_dim {
                let idx = i + i_dim * (j + j_dim * k);
                let observed = x.mask().map_or(true, |m| m[idx]);
                if observed {
                    let d = x.values()[idx] - model.entry(i, j, k);
                    sse += d * d;
                }
            }
        }
    }
    sse.sqrt() / norm_x
}

/// Copies model estimates into `work` wherever `x` is unobserved.
fn impute(work: &mut Tensor3, x: &Tensor3, model: &CpModel) -> Result<()> {
    let Some(mask) = x.mask() else { return Ok(()) };
    let (i_dim, j_dim, k_dim) = x.dims();
    let mut dense = work.values().to_vec();
    for k in 0..k_dim {
        for j in 0..j_dim {
            for i in 0..i_dim {
                let idx = i + i_dim * (j + j_dim * k);
                if !mask[idx] {
                    dense[idx] = model.entry(i, j, k);
                }
            }
        }
    }
    *work = Tensor3::new((i_dim, j_dim, k_dim), dense)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(dims: (usize, usize, usize), rank: usize, seed: u64) -> CpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |rows| Matrix::from_fn(rows, rank, |_, _| rng.gen_range(0.1..1.0f64));
        CpModel::new(gen(dims.0), gen(dims.1), gen(dims.2)).unwrap()
    }

    fn orthogonality(proj: &SliceProjection, model: &CpModel) -> f64 {
        // The least-squares residual must be orthogonal to the columns of
        // pinv((C kr B)^T); report the worst normalized inner product.
        let design = model.mode1_design().unwrap().transpose();
        let p = pinv(&design).unwrap(); // JK x R
        let r = proj.residual.unfold(1).unwrap(); // 1 x JK
        let rn = r.norm();
        if rn < 1e-12 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for col in 0..p.ncols() {
            let c = p.column(col);
            let dot: f64 = (0..c.len()).map(|i| r[(0, i)] * c[i]).sum();
            worst = worst.max((dot / (rn * c.norm().max(1e-300))).abs());
        }
        worst
    }

    #[test]
    fn project_recovers_exact_loading() {
        let model = random_model((6, 4, 10), 3, 1);
        let a0 = [0.7, -0.3, 1.2];
        let design = model.mode1_design().unwrap(); // JK x R
        let row = Matrix::from_row_slice(1, 3, &a0) * design.transpose();
        let x = Tensor3::fold(&row, 1, (1, 4, 10)).unwrap();
        let proj = project_slice(&x, &model).unwrap();
        for (got, want) in proj.loading.iter().zip(&a0) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!(proj.residual.frobenius() < 1e-10);
    }

    #[test]
    fn project_zero_slice() {
        let model = random_model((5, 3, 8), 2, 2);
        let x = Tensor3::zeros((1, 3, 8)).unwrap();
        let proj = project_slice(&x, &model).unwrap();
        assert!(proj.loading.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(proj.residual.frobenius(), 0.0);
        assert_eq!(proj.fit, 0.0);
    }

    #[test]
    fn project_residual_orthogonal_on_noisy_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let model = random_model((5, 4, 12), 2, 10 + trial);
            let x = Tensor3::from_fn((1, 4, 12), |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
            let proj = project_slice(&x, &model).unwrap();
            let ortho = orthogonality(&proj, &model);
            assert!(ortho < 1e-8, "orthogonality {ortho}");
        }
    }

    #[test]
    fn project_close_to_training_residual() {
        // Projecting a training slice back onto the converged model gives a
        // residual close to that slice's training residual.
        let truth = random_model((8, 4, 12), 2, 4);
        let mut x = truth.reconstruct();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..12 {
            for j in 0..4 {
                for i in 0..8 {
                    let v = x.get(i, j, k).unwrap() + rng.gen_range(-0.05..0.05);
                    x.set(i, j, k, v).unwrap();
                }
            }
        }
        let cfg = AlsConfig { max_iters: 500, rel_change_tol: 1e-12, ..AlsConfig::with_seed(9) };
        let fit = als_fit(&x, 2, &cfg).unwrap();
        let train_resid = crate::cp::residual(&x, &fit.model).unwrap();
        let i_probe = 3;
        let slice =
            Tensor3::from_fn((1, 4, 12), |_, j, k| x.get(i_probe, j, k).unwrap()).unwrap();
        let proj = project_slice(&slice, &fit.model).unwrap();
        let train_row =
            Tensor3::from_fn((1, 4, 12), |_, j, k| train_resid.get(i_probe, j, k).unwrap())
                .unwrap();
        let diff = proj.residual.sub(&train_row).unwrap().frobenius();
        let rel = diff / train_row.frobenius();
        assert!(rel < 0.05, "relative difference {rel}");
    }

    #[test]
    fn project_masked_ignores_corrupted_entries() {
        let model = random_model((6, 4, 10), 2, 6);
        let a0 = [0.4, 0.9];
        let design = model.mode1_design().unwrap();
        let row = Matrix::from_row_slice(1, 2, &a0) * design.transpose();
        let mut values: Vec<f64> = (0..40).map(|c| row[(0, c)]).collect();
        let mut mask = vec![true; 40];
        for c in [3usize, 17, 31] {
            values[c] = 1e9; // corrupted, then masked out
            mask[c] = false;
        }
        let folded =
            Tensor3::fold(&Matrix::from_fn(1, 40, |_, c| values[c]), 1, (1, 4, 10)).unwrap();
        let x = Tensor3::with_mask((1, 4, 10), folded.values().to_vec(), mask).unwrap();
        let proj = project_slice(&x, &model).unwrap();
        for (got, want) in proj.loading.iter().zip(&a0) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(matches!(
            project_slice(
                &Tensor3::with_mask((1, 4, 10), vec![0.0; 40], vec![false; 40]).unwrap(),
                &model
            ),
            Err(Error::Degenerate(_))
        ));
    }

    fn warmed_window(
        slice_of_t: impl Fn(usize) -> Matrix,
        entities: usize,
        metrics: usize,
        width: usize,
        rank: usize,
    ) -> TensorWindow {
        let mut w = TensorWindow::new(entities, metrics, width, rank).unwrap();
        for t in 0..width {
            w.push_warmup(slice_of_t(t)).unwrap();
        }
        w.init_model(&AlsConfig {
            max_iters: 300,
            rel_change_tol: 1e-10,
            ..AlsConfig::with_seed(1)
        })
        .unwrap();
        w
    }

    #[test]
    fn stationary_stream_gives_tiny_residuals() {
        // Identical positive slices of matrix rank 1: one component suffices.
        let base = Matrix::from_fn(5, 3, |i, j| (1.0 + 0.3 * i as f64) * (0.5 + 0.1 * j as f64));
        let mut fwo = warmed_window(|_| base.clone(), 5, 3, 12, 1);
        let mut pwo = fwo.clone();
        let cfg = AlsConfig { max_iters: 100, rel_change_tol: 1e-12, ..AlsConfig::with_seed(0) };
        let r = fwo.fwo_step(base.clone(), &cfg).unwrap();
        assert!(r.residual.norm() < 1e-6, "fwo residual {}", r.residual.norm());
        let pcfg = AlsConfig { max_iters: 20, rel_change_tol: 1e-10, ..AlsConfig::with_seed(0) };
        let r = pwo.pwo_step(base, &pcfg).unwrap();
        assert!(r.residual.norm() < 1e-6, "pwo residual {}", r.residual.norm());
    }

    #[test]
    fn fwo_matches_offline_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = random_model((6, 3, 64), 2, 11);
        let mut noisy_slice = |t: usize| {
            Matrix::from_fn(6, 3, |i, j| truth.entry(i, j, t % 64) + rng.gen_range(-0.01..0.01))
        };
        let slices: Vec<Matrix> = (0..17).map(&mut noisy_slice).collect();
        let mut w = TensorWindow::new(6, 3, 16, 2).unwrap();
        for s in &slices[..16] {
            w.push_warmup(s.clone()).unwrap();
        }
        let init = AlsConfig { max_iters: 400, rel_change_tol: 1e-10, ..AlsConfig::with_seed(2) };
        w.init_model(&init).unwrap();
        let step = w.fwo_step(slices[16].clone(), &init).unwrap();
        // From-scratch fit of the same window tensor.
        let scratch = als_fit(&w.window_tensor().unwrap(), 2, &init).unwrap();
        assert!(
            (step.fit - scratch.meta.final_fit).abs() < 1e-6,
            "fwo fit {} vs scratch {}",
            step.fit,
            scratch.meta.final_fit
        );
    }

    #[test]
    fn pwo_retains_old_loadings_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut w = warmed_window(
            |t| Matrix::from_fn(4, 2, |i, j| (1 + i + j) as f64 * (1.0 + 0.01 * t as f64)),
            4,
            2,
            10,
            1,
        );
        let before = w.model().unwrap().factor_c().clone();
        let slice = Matrix::from_fn(4, 2, |i, j| (1 + i + j) as f64 + rng.gen_range(0.0..0.01));
        let step = w.pwo_step(slice, &AlsConfig::pwo_default()).unwrap();
        let after = step.model.factor_c();
        for r in 0..9 {
            assert_eq!(after[(r, 0)], before[(r + 1, 0)], "row {r} not retained");
        }
    }

    #[test]
    fn step_residual_is_self_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let truth = random_model((5, 4, 50), 2, 13);
        let mut gen = |t: usize| {
            Matrix::from_fn(5, 4, |i, j| truth.entry(i, j, t % 50) + rng.gen_range(-0.02..0.02))
        };
        let mut w = TensorWindow::new(5, 4, 12, 2).unwrap();
        for t in 0..12 {
            let s = gen(t);
            w.push_warmup(s).unwrap();
        }
        w.init_model(&AlsConfig::with_seed(3)).unwrap();
        for t in 12..16 {
            let slice = gen(t);
            let step = if t % 2 == 0 {
                w.fwo_step(slice.clone(), &AlsConfig::with_seed(3)).unwrap()
            } else {
                w.pwo_step(slice.clone(), &AlsConfig::pwo_default()).unwrap()
            };
            // Recompute the residual from the returned factors.
            let last = step.model.factor_c().nrows() - 1;
            for i in 0..5 {
                for j in 0..4 {
                    let expect = slice[(i, j)] - step.model.entry(i, j, last);
                    assert!(
                        (step.residual[(i, j)] - expect).abs() < 1e-12,
                        "self-consistency at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn window_slide_is_lossless() {
        let slice_of = |t: usize| Matrix::from_element(2, 2, 1.0 + t as f64);
        let mut w = TensorWindow::new(2, 2, 4, 1).unwrap();
        for t in 0..4 {
            w.push_warmup(slice_of(t)).unwrap();
        }
        w.init_model(&AlsConfig::with_seed(0)).unwrap();
        for t in 4..9 {
            w.fwo_step(slice_of(t), &AlsConfig::with_seed(0)).unwrap();
        }
        // Buffer must hold exactly slices 5..=8 now.
        let tensor = w.window_tensor().unwrap();
        for (k, t) in (5..9).enumerate() {
            assert_eq!(tensor.get(0, 0, k).unwrap(), 1.0 + t as f64);
        }
        assert_eq!(w.current_minute(), 8);
    }

    #[test]
    fn pwo_close_to_fwo_on_slowly_varying_stream() {
        // Rank-2 stream whose time loadings vary smoothly over a day-like
        // period, plus deterministic micro-noise. In this regime the frozen
        // old loadings of PWO stay valid and both schemes see the same noise.
        let spatial = random_model((8, 4, 1), 2, 31);
        let gen = |t: usize| {
            let phase = t as f64 / 288.0 * std::f64::consts::TAU;
            let c = [1.0 + 0.4 * phase.sin(), 0.8 + 0.3 * (phase * 0.5).cos()];
            Matrix::from_fn(8, 4, |i, j| {
                let low_rank: f64 = (0..2)
                    .map(|r| spatial.factor_a()[(i, r)] * spatial.factor_b()[(j, r)] * c[r])
                    .sum();
                low_rank + 0.002 * ((i * 7 + j * 3 + t * 5) % 13) as f64
            })
        };
        let width = 24;
        let mut fwo = TensorWindow::new(8, 4, width, 2).unwrap();
        for t in 0..width {
            fwo.push_warmup(gen(t)).unwrap();
        }
        fwo.init_model(&AlsConfig {
            max_iters: 500,
            rel_change_tol: 1e-10,
            ..AlsConfig::with_seed(7)
        })
        .unwrap();
        let mut pwo = fwo.clone();
        let fwo_cfg = AlsConfig::with_seed(7);
        let pwo_cfg = AlsConfig::pwo_default();
        let mut agree = 0;
        let steps = 60;
        for t in width..width + steps {
            let s = gen(t);
            let rf = fwo.fwo_step(s.clone(), &fwo_cfg).unwrap();
            let rp = pwo.pwo_step(s, &pwo_cfg).unwrap();
            let rel = (&rp.residual - &rf.residual).norm() / rf.residual.norm().max(1e-12);
            if rel < 0.05 {
                agree += 1;
            }
        }
        assert!(agree as f64 >= 0.95 * steps as f64, "agreement {agree}/{steps}");
    }

    #[test]
    fn add_entity_expands_mode_a() {
        let truth = random_model((5, 3, 40), 2, 17);
        let gen = |t: usize| Matrix::from_fn(5, 3, |i, j| truth.entry(i, j, t % 40));
        let mut w = TensorWindow::new(5, 3, 10, 2).unwrap();
        for t in 0..10 {
            w.push_warmup(gen(t)).unwrap();
        }
        w.init_model(&AlsConfig {
            max_iters: 400,
            rel_change_tol: 1e-12,
            ..AlsConfig::with_seed(5)
        })
        .unwrap();

        // New entity behaves like a scaled copy of entity 0, observed only
        // for the last six minutes of the window.
        let history: Vec<Option<Vec<f64>>> = (0..10)
            .map(|k| {
                if k < 4 {
                    None
                } else {
                    Some((0..3).map(|j| 2.0 * truth.entry(0, j, k % 40)).collect())
                }
            })
            .collect();
        w.add_entity(&history).unwrap();
        assert_eq!(w.entities(), 6);
        let model = w.model().unwrap();
        assert_eq!(model.factor_a().nrows(), 6);
        // The projected row should be about twice entity 0's row.
        let a = model.factor_a();
        let scale = (a[(5, 0)] / a[(0, 0)] + a[(5, 1)] / a[(0, 1)]) / 2.0;
        assert!((scale - 2.0).abs() < 0.05, "scale {scale}");

        // Subsequent steps keep working with the masked window.
        let bigger = Matrix::from_fn(6, 3, |i, j| {
            if i < 5 {
                truth.entry(i, j, 10 % 40)
            } else {
                2.0 * truth.entry(0, j, 10 % 40)
            }
        });
        let step = w.pwo_step(bigger, &AlsConfig::pwo_default()).unwrap();
        assert!(step.fit < 0.05, "fit {}", step.fit);
    }

    #[test]
    fn window_argument_errors() {
        assert!(TensorWindow::new(0, 2, 4, 1).is_err());
        assert!(TensorWindow::new(2, 2, 1, 1).is_err());
        let mut w = TensorWindow::new(2, 2, 3, 1).unwrap();
        assert!(matches!(
            w.push_warmup(Matrix::zeros(3, 2)),
            Err(Error::DimMismatch(_))
        ));
        assert!(w.init_model(&AlsConfig::default()).is_err());
        assert!(w.fwo_step(Matrix::zeros(2, 2), &AlsConfig::default()).is_err());
    }
}
