//! MAP threshold for synchronized-attack aggregation.
//!
//! Flood attacks from infected homes are synchronized, so per-home verdicts
//! can be pooled: declare a synchronized attack when at least `m0` homes
//! flag the same minute. Under the no-attack hypothesis the number of
//! reporting homes is Binomial(|H|, p_fp); under an attack it adds
//! Binomial(ceil(q |H|), p_rc) true reporters. With both counts in the
//! Poisson regime the posterior log-odds are linear in the report count and
//! the MAP crossing point has the closed form
//!
//! ```text
//! m0 = (ln((1 - P_D) / P_D) + lambda1 - lambda0) / (ln lambda1 - ln lambda0)
//! ```
//!
//! where `lambda0 = |H| p_fp` and `lambda1 = n_inf p_rc + (|H| - n_inf)
//! p_fp`. The integer decision threshold is `ceil(m0)`. Error rates are
//! reported against both the Poisson approximation and the exact binomial
//! law.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Aggregator inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapAggregatorParams {
    /// Number of monitored homes |H|.
    pub n_homes: u64,
    /// Prior probability of a synchronized attack in a given minute.
    pub prior_attack: f64,
    /// Per-home per-minute false-positive probability.
    pub p_fp: f64,
    /// Per-home recall during an attack minute.
    pub p_rc: f64,
    /// Infected fraction.
    pub q: f64,
}

/// Derived decision rule and its error characteristics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapThreshold {
    /// Real crossing point of the posterior odds.
    pub m0: f64,
    /// Integer decision threshold `ceil(m0)`, at least 1.
    pub threshold: u64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Exact binomial tail `P(X >= threshold | no attack)`.
    pub type1_binomial: f64,
    /// Miss probability under the Poisson approximation of the attack count.
    pub type2_poisson: f64,
    /// Miss probability under the exact binomial attack count.
    pub type2_binomial: f64,
}

fn ln_binom_pmf(n: u64, p: f64, m: u64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ln_gamma(n + 1.0) - ln_gamma(m + 1.0) - ln_gamma(n - m + 1.0)
        + m * p.ln()
        + (n - m) * (1.0 - p).ln()
}

/// Upper binomial tail `P(X >= t)` summed in log space (safe far below
/// `f64::EPSILON`, where `1 - cdf` would cancel).
fn binom_tail(n: u64, p: f64, t: u64) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if t > n {
        return 0.0;
    }
    let mut acc = 0.0;
    for m in t..=n {
        let term = ln_binom_pmf(n, p, m).exp();
        acc += term;
        if term < acc * 1e-18 {
            break;
        }
    }
    acc
}

fn poisson_cdf(lambda: f64, below: u64) -> f64 {
    // P(X < below) = sum_{k=0}^{below-1} pmf(k).
    let mut acc = 0.0;
    let mut ln_term = -lambda; // ln pmf(0)
    for k in 0..below {
        acc += ln_term.exp();
        ln_term += lambda.ln() - ((k + 1) as f64).ln();
    }
    acc
}

/// Derives the MAP decision threshold from the aggregator parameters.
pub fn map_threshold(params: &MapAggregatorParams) -> Result<MapThreshold> {
    let MapAggregatorParams { n_homes, prior_attack, p_fp, p_rc, q } = *params;
    if n_homes == 0 {
        return Err(Error::InvalidArg("map_threshold: no homes".into()));
    }
    for (v, name) in [(prior_attack, "prior_attack"), (p_fp, "p_fp"), (p_rc, "p_rc")] {
        if !(0.0..=1.0).contains(&v) || v == 0.0 || v == 1.0 {
            return Err(Error::Degenerate(format!(
                "map_threshold: {name} = {v} leaves the odds undefined"
            )));
        }
    }
    if !(0.0..=1.0).contains(&q) || q * (n_homes as f64) < 1.0 {
        return Err(Error::InvalidArg(
            "map_threshold: q must satisfy q * n_homes >= 1".into(),
        ));
    }
    if p_rc <= p_fp {
        return Err(Error::Degenerate(
            "map_threshold: p_rc <= p_fp makes the hypotheses indistinguishable".into(),
        ));
    }

    let n_inf = (q * n_homes as f64).ceil() as u64;
    let lambda0 = n_homes as f64 * p_fp;
    let lambda1 = n_inf as f64 * p_rc + (n_homes - n_inf) as f64 * p_fp;
    let prior_odds = ((1.0 - prior_attack) / prior_attack).ln();
    let m0 = (prior_odds + lambda1 - lambda0) / (lambda1.ln() - lambda0.ln());
    let threshold = (m0.ceil().max(1.0)) as u64;

    let type1_binomial = binom_tail(n_homes, p_fp, threshold);
    let type2_poisson = poisson_cdf(lambda1, threshold);
    // Exact miss probability: P(X + Y < threshold) with X ~ B(n_inf, p_rc)
    // and Y ~ B(n_homes - n_inf, p_fp); the convolution below the threshold
    // involves only threshold^2 / 2 terms.
    let mut type2_binomial = 0.0;
    for x in 0..threshold.min(n_inf + 1) {
        let px = ln_binom_pmf(n_inf, p_rc, x).exp();
        let mut py_below = 0.0;
        for y in 0..(threshold - x) {
            if y > n_homes - n_inf {
                break;
            }
            py_below += ln_binom_pmf(n_homes - n_inf, p_fp, y).exp();
        }
        type2_binomial += px * py_below;
    }

    Ok(MapThreshold {
        m0,
        threshold,
        lambda0,
        lambda1,
        type1_binomial,
        type2_poisson,
        type2_binomial,
    })
}

/// Pools per-home per-minute flags: a minute is a synchronized-attack
/// verdict when at least `threshold` homes flag it.
pub fn aggregate_sync(flags_per_home: &[Vec<bool>], threshold: usize) -> Result<Vec<bool>> {
    if threshold == 0 {
        return Err(Error::InvalidArg("aggregate_sync: threshold must be >= 1".into()));
    }
    let Some(first) = flags_per_home.first() else {
        return Err(Error::InvalidArg("aggregate_sync: no homes".into()));
    };
    let minutes = first.len();
    for f in flags_per_home {
        if f.len() != minutes {
            return Err(Error::DimMismatch("aggregate_sync: ragged flag series".into()));
        }
    }
    Ok((0..minutes)
        .map(|m| flags_per_home.iter().filter(|f| f[m]).count() >= threshold)
        .collect())
}
