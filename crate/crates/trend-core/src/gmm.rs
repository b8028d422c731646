//! Two-component diagonal-covariance Gaussian mixture, fitted with EM.
//!
//! Residual histograms show two regimes (plain traffic and traffic with an
//! attack riding on it); the per-component log densities of this mixture
//! become two extra classifier features. Diagonal covariances keep the
//! model well conditioned at moderate sample counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-component diagonal Gaussian mixture over d-dimensional points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm2 {
    /// Mixing weights; positive, sum to one.
    pub weights: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Per-dimension variances, floored away from zero.
    pub variances: [Vec<f64>; 2],
}

/// EM fitting configuration.
#[derive(Debug, Clone)]
pub struct GmmConfig {
    pub max_iters: usize,
    /// Stop when the relative log-likelihood change drops below this.
    pub rel_tol: f64,
    /// Lower bound applied to every variance after each M step.
    pub var_floor: f64,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { max_iters: 200, rel_tol: 1e-6, var_floor: 1e-9, seed: 0 }
    }
}

/// Fit diagnostics: per-iteration training log-likelihood.
#[derive(Debug, Clone)]
pub struct GmmFitInfo {
    pub iterations: usize,
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

const LOG_2PI: f64 = 1.8378770664093453;

impl Gmm2 {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "gmm: point has {} dims, model has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Log density of one component at `x` (mixing weight not applied).
    pub fn component_log_density(&self, component: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mean = &self.means[component];
        let var = &self.variances[component];
        let mut ll = 0.0;
        for d in 0..x.len() {
            let diff = x[d] - mean[d];
            ll += -0.5 * (LOG_2PI + var[d].ln() + diff * diff / var[d]);
        }
        Ok(ll)
    }

    /// Both component log densities at `x`.
    pub fn component_log_densities(&self, x: &[f64]) -> Result<[f64; 2]> {
        Ok([
            self.component_log_density(0, x)?,
            self.component_log_density(1, x)?,
        ])
    }

    /// Both component density values at `x`; far outliers underflow to
    /// exactly zero regardless of their magnitude.
    pub fn component_densities(&self, x: &[f64]) -> Result<[f64; 2]> {
        let [l1, l2] = self.component_log_densities(x)?;
        Ok([l1.exp(), l2.exp()])
    }

    /// Mixture log density `log(w1 N1(x) + w2 N2(x))`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let [l1, l2] = self.component_log_densities(x)?;
        let a = l1 + self.weights[0].ln();
        let b = l2 + self.weights[1].ln();
        let hi = a.max(b);
        Ok(hi + ((a - hi).exp() + (b - hi).exp()).ln())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits a two-component diagonal GMM with EM, initialized from a two-means
/// split of the data.
///
/// The training log-likelihood never decreases across EM iterations (up to
/// the variance floor); iteration stops at `rel_tol` relative change or the
/// iteration cap.
pub fn fit_gmm2(points: &[Vec<f64>], cfg: &GmmConfig) -> Result<(Gmm2, GmmFitInfo)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Degenerate("gmm: need at least 2 points".into()));
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::InvalidArg("gmm: zero-dimensional points".into()));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimMismatch("gmm: ragged point dimensions".into()));
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gmm: non-finite point".into()));
        }
    }
    let distinct = points.iter().any(|p| p != &points[0]);
    if !distinct {
        return Err(Error::Degenerate("gmm: all points identical".into()));
    }

    // Two-means initialization.
    let (centroids, assign, _) = crate::cluster::lloyd(points, 2, cfg.seed, 100)?;
    let mut weights = [0.5, 0.5];
    let means = [centroids[0].clone(), centroids[1].clone()];
    let mut variances = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (p, &a) in points.iter().zip(&assign) {
        counts[a] += 1;
        for d in 0..dim {
            let diff = p[d] - means[a][d];
            variances[a][d] += diff * diff;
        }
    }
    for c in 0..2 {
        let denom = counts[c].max(1) as f64;
        weights[c] = (counts[c] as f64 / n as f64).max(1e-6);
        for d in 0..dim {
            variances[c][d] = (variances[c][d] / denom).max(cfg.var_floor);
        }
    }
    let wsum: f64 = weights.iter().sum();
    weights[0] /= wsum;
    weights[1] /= wsum;
    let mut model = Gmm2 { weights, means, variances };

    let mut history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut resp = vec![0.0; n]; // responsibility of component 0

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        // E step (and the log-likelihood of the current parameters).
        let mut ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            let [l1, l2] = model.component_log_densities(p)?;
            let a = l1 + model.weights[0].ln();
            let b = l2 + model.weights[1].ln();
            let hi = a.max(b);
            let log_norm = hi + ((a - hi).exp() + (b - hi).exp()).ln();
            ll += log_norm;
            resp[i] = (a - log_norm).exp();
        }
        history.push(ll);

        // M step.
        let r0: f64 = resp.iter().sum();
        let r1 = n as f64 - r0;
        if r0 < 1e-12 || r1 < 1e-12 {
            // One component starved; keep the previous parameters.
            converged = true;
            break;
        }
        let mut new_means = [vec![0.0; dim], vec![0.0; dim]];
        for (p, &r) in points.iter().zip(&resp) {
            for d in 0..dim {
                new_means[0][d] += r * p[d];
                new_means[1][d] += (1.0 - r) * p[d];
            }
        }
        for d in 0..dim {
            new_means[0][d] /= r0;
            new_means[1][d] /= r1;
        }
        let mut new_vars = [vec![0.0; dim], vec![0.0; dim]];
        for (p, &r) in points.iter().zip(&resp) {
            for d in 0..dim {
                let d0 = p[d] - new_means[0][d];
                let d1 = p[d] - new_means[1][d];
                new_vars[0][d] += r * d0 * d0;
                new_vars[1][d] += (1.0 - r) * d1 * d1;
            }
        }
        for d in 0..dim {
            new_vars[0][d] = (new_vars[0][d] / r0).max(cfg.var_floor);
            new_vars[1][d] = (new_vars[1][d] / r1).max(cfg.var_floor);
        }
        model = Gmm2 {
            weights: [r0 / n as f64, r1 / n as f64],
            means: new_means,
            variances: new_vars,
        };

        let rel = (ll - prev_ll).abs() / ll.abs().max(1e-12);
        if prev_ll.is_finite() && rel < cfg.rel_tol {
            converged = true;
            break;
        }
        prev_ll = ll;
    }

    Ok((model, GmmFitInfo { iterations, log_likelihood: history, converged }))
}
