//! Model comparison and rank selection.
//!
//! CP solutions are unique only up to component permutation and scaling, so
//! comparing two models requires matching columns first. The Tucker
//! congruence coefficient (cosine similarity of factor columns) drives both
//! the matching and the split-half acceptance test: a rank generalizes when
//! models fitted on two random halves of the sample mode agree on the
//! non-sample factors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cp::{als_fit, AlsConfig, CpModel};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Tucker congruence coefficient: `<u, v> / (|u| |v|)` in `[-1, 1]`.
pub fn tcc(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.is_empty() || u.len() != v.len() {
        return Err(Error::DimMismatch(format!(
            "tcc: lengths {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("tcc: zero vector".into()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Column matching between two models of equal rank.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// `permutation[r]` is the column of `other` matched to column `r` of
    /// the reference model.
    pub permutation: Vec<usize>,
    /// Sign flips per compared mode and reference column
    /// (`signs[mode_idx][r]` in the order of the `modes` argument).
    pub signs: Vec<Vec<f64>>,
    /// Per-mode absolute congruence of the matched columns.
    pub per_mode_tcc: Vec<Vec<f64>>,
    /// Mean over compared modes of the matched-column congruence.
    pub per_column: Vec<f64>,
    /// Mean of `per_column`.
    pub mean_tcc: f64,
}

fn column_of(m: &CpModel, mode: usize, r: usize) -> Result<Vec<f64>> {
    Ok(m.factor(mode)?.column(r).iter().copied().collect())
}

/// Greedily matches `other`'s components to `reference`'s by maximum mean
/// congruence over the given tensor modes (1..=3), with per-mode sign flips.
pub fn align_factors(
    reference: &CpModel,
    other: &CpModel,
    modes: &[usize],
) -> Result<Alignment> {
    if reference.rank() != other.rank() {
        return Err(Error::DimMismatch(format!(
            "align_factors: ranks {} vs {}",
            reference.rank(),
            other.rank()
        )));
    }
    if modes.is_empty() {
        return Err(Error::InvalidArg("align_factors: no modes to compare".into()));
    }
    for &mode in modes {
        if reference.factor(mode)?.nrows() != other.factor(mode)?.nrows() {
            return Err(Error::DimMismatch(format!(
                "align_factors: mode {mode} dims differ"
            )));
        }
    }
    let rank = reference.rank();

    // Signed congruence per (mode, ref column, other column).
    let mut cong = vec![vec![vec![0.0; rank]; rank]; modes.len()];
    for (mi, &mode) in modes.iter().enumerate() {
        for r in 0..rank {
            let ref_col = column_of(reference, mode, r)?;
            for s in 0..rank {
                let oth_col = column_of(other, mode, s)?;
                cong[mi][r][s] = tcc(&ref_col, &oth_col).unwrap_or(0.0);
            }
        }
    }
    let score = |r: usize, s: usize| -> f64 {
        cong.iter().map(|per_mode| per_mode[r][s].abs()).sum::<f64>() / modes.len() as f64
    };

    let mut permutation = vec![usize::MAX; rank];
    let mut used = vec![false; rank];
    for _ in 0..rank {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for r in 0..rank {
            if permutation[r] != usize::MAX {
                continue;
            }
            for s in 0..rank {
                if used[s] {
                    continue;
                }
                let sc = score(r, s);
                if sc > best.2 {
                    best = (r, s, sc);
                }
            }
        }
        permutation[best.0] = best.1;
        used[best.1] = true;
    }

    let mut signs = vec![vec![1.0; rank]; modes.len()];
    let mut per_mode_tcc = vec![vec![0.0; rank]; modes.len()];
    let mut per_column = vec![0.0; rank];
    for r in 0..rank {
        let s = permutation[r];
        for mi in 0..modes.len() {
            let c = cong[mi][r][s];
            signs[mi][r] = if c < 0.0 { -1.0 } else { 1.0 };
            per_mode_tcc[mi][r] = c.abs();
            per_column[r] += c.abs();
        }
        per_column[r] /= modes.len() as f64;
    }
    let mean_tcc = per_column.iter().sum::<f64>() / rank as f64;
    Ok(Alignment { permutation, signs, per_mode_tcc, per_column, mean_tcc })
}

/// Split-half validation settings.
#[derive(Debug, Clone)]
pub struct SplitHalfConfig {
    pub als: AlsConfig,
    /// Acceptance cutoff on the mean over columns of
    /// `min(tcc_B, tcc_C)` between half models.
    pub threshold: f64,
    /// Independent random splits averaged into the acceptance statistic.
    pub repetitions: usize,
    /// Random ALS starts per half fit; the best-fit model is kept. ALS can
    /// stall in local optima, which would reject a perfectly valid rank.
    pub starts: usize,
}

impl Default for SplitHalfConfig {
    fn default() -> Self {
        Self { als: AlsConfig::default(), threshold: 0.85, repetitions: 1, starts: 2 }
    }
}

/// Per-rank outcome of split-half validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRecord {
    pub rank: usize,
    /// Mean aligned congruence on the metric mode (B).
    pub tcc_b: f64,
    /// Mean aligned congruence on the time mode (C).
    pub tcc_c: f64,
    /// Mean over columns of `min(tcc_b, tcc_c)` — the acceptance statistic.
    pub stat: f64,
    /// Congruence reached the threshold and no half fit was degenerate.
    /// An over-ranked model duplicates components, and duplicates agree
    /// across halves, so degenerate fits must not vouch for a rank.
    pub accepted: bool,
    /// Either half model was flagged degenerate in any repetition.
    pub degenerate: bool,
}

/// Split-half validation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankValidationReport {
    pub records: Vec<RankRecord>,
    /// Largest accepted rank, if any rank was accepted.
    pub chosen_rank: Option<usize>,
    pub threshold: f64,
}

fn mode1_subset(x: &Tensor3, rows: &[usize]) -> Result<Tensor3> {
    let (_, j_dim, k_dim) = x.dims();
    let dims = (rows.len(), j_dim, k_dim);
    let n = dims.0 * dims.1 * dims.2;
    let mut values = vec![0.0; n];
    let mut mask = vec![true; n];
    let mut any_masked = false;
    for k in 0..k_dim {
        for j in 0..j_dim {
            for (new_i, &old_i) in rows.iter().enumerate() {
                let idx = new_i + dims.0 * (j + dims.1 * k);
                values[idx] = x.get(old_i, j, k)?;
                let obs = x.is_observed(old_i, j, k)?;
                mask[idx] = obs;
                any_masked |= !obs;
            }
        }
    }
    if any_masked {
        Tensor3::with_mask(dims, values, mask)
    } else {
        Tensor3::new(dims, values)
    }
}

/// Runs split-half validation over candidate ranks.
///
/// Mode-1 slices are shuffled and split into two halves; each half is fitted
/// independently and the non-sample factors (B, C) are aligned. A rank is
/// accepted when the acceptance statistic (averaged over repetitions)
/// reaches the threshold; the chosen rank is the largest accepted one.
pub fn split_half_validate(
    x: &Tensor3,
    ranks: &[usize],
    cfg: &SplitHalfConfig,
) -> Result<RankValidationReport> {
    let (i_dim, _, _) = x.dims();
    if i_dim < 4 {
        return Err(Error::InvalidArg(format!(
            "split_half_validate: need at least 4 mode-1 slices, got {i_dim}"
        )));
    }
    if ranks.is_empty() {
        return Err(Error::InvalidArg("split_half_validate: no candidate ranks".into()));
    }
    if cfg.repetitions == 0 || cfg.starts == 0 {
        return Err(Error::InvalidArg(
            "split_half_validate: repetitions and starts must be >= 1".into(),
        ));
    }

    let mut splits = Vec::with_capacity(cfg.repetitions);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.als.seed);
    for _ in 0..cfg.repetitions {
        let mut order: Vec<usize> = (0..i_dim).collect();
        order.shuffle(&mut rng);
        let (first, second) = order.split_at(i_dim / 2);
        splits.push((first.to_vec(), second.to_vec()));
    }

    // Best of `starts` random inits; local optima would otherwise veto a rank.
    let best_fit = |t: &Tensor3, rank: usize, seed_base: u64| -> Result<crate::cp::CpFit> {
        let mut best: Option<crate::cp::CpFit> = None;
        for s in 0..cfg.starts {
            let als = AlsConfig { seed: seed_base.wrapping_add(s as u64), ..cfg.als.clone() };
            let fit = als_fit(t, rank, &als)?;
            if best.as_ref().map_or(true, |b| fit.meta.final_fit < b.meta.final_fit) {
                best = Some(fit);
            }
        }
        Ok(best.expect("starts >= 1"))
    };

    let mut records: Vec<RankRecord> = ranks
        .par_iter()
        .map(|&rank| -> Result<RankRecord> {
            let mut stat_sum = 0.0;
            let mut tcc_b_sum = 0.0;
            let mut tcc_c_sum = 0.0;
            let mut degenerate = false;
            for (rep, (half_a, half_b)) in splits.iter().enumerate() {
                let xa = mode1_subset(x, half_a)?;
                let xb = mode1_subset(x, half_b)?;
                let seed_base = cfg
                    .als
                    .seed
                    .wrapping_add((rep as u64) << 32)
                    .wrapping_add((rank as u64) << 16);
                let fit_a = best_fit(&xa, rank, seed_base)?;
                let fit_b = best_fit(&xb, rank, seed_base.wrapping_add(101))?;
                degenerate |= fit_a.meta.degenerate || fit_b.meta.degenerate;
                let align = align_factors(&fit_a.model, &fit_b.model, &[2, 3])?;
                let per_col_min: f64 = (0..rank)
                    .map(|r| align.per_mode_tcc[0][r].min(align.per_mode_tcc[1][r]))
                    .sum::<f64>()
                    / rank as f64;
                stat_sum += per_col_min;
                tcc_b_sum += align.per_mode_tcc[0].iter().sum::<f64>() / rank as f64;
                tcc_c_sum += align.per_mode_tcc[1].iter().sum::<f64>() / rank as f64;
            }
            let reps = cfg.repetitions as f64;
            let stat = stat_sum / reps;
            Ok(RankRecord {
                rank,
                tcc_b: tcc_b_sum / reps,
                tcc_c: tcc_c_sum / reps,
                stat,
                accepted: stat >= cfg.threshold && !degenerate,
                degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    records.sort_by_key(|r| r.rank);
    let chosen_rank = records.iter().filter(|r| r.accepted).map(|r| r.rank).max();
    Ok(RankValidationReport { records, chosen_rank, threshold: cfg.threshold })
}
