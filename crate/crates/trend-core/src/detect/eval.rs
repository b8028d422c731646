//! Minute-level precision and episode-level detection accuracy.
//!
//! Precision counts flagged minutes: `TP / (TP + FP)`. Detection accuracy
//! counts attack episodes (maximal runs of labeled minutes per entity): an
//! episode is detected when at least one of its minutes is flagged for the
//! attacking entity. Detection delay is `first flagged minute - episode
//! start + 1`, so a hit in the first minute has delay 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aligned truth/prediction series of one entity (minutes concatenated in
/// chronological order).
#[derive(Debug, Clone)]
pub struct LabeledSeries {
    pub entity: String,
    pub truth: Vec<bool>,
    pub pred: Vec<bool>,
}

/// Evaluation metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    /// False when no minute was flagged: precision is then undefined and
    /// reported as 1.0 (no false positive occurred).
    pub precision_defined: bool,
    pub detection_accuracy: f64,
    pub episodes: usize,
    pub detected: usize,
    /// Delay in minutes of each detected episode.
    pub delays: Vec<usize>,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl EvalReport {
    /// Fraction of detected episodes flagged within `minutes` of the start.
    pub fn delay_within(&self, minutes: usize) -> f64 {
        if self.delays.is_empty() {
            return 0.0;
        }
        self.delays.iter().filter(|&&d| d <= minutes).count() as f64 / self.delays.len() as f64
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "precision            {:.4}{}", self.precision,
            if self.precision_defined { "" } else { " (no positives predicted)" })?;
        writeln!(f, "detection accuracy   {:.4} ({}/{} episodes)",
            self.detection_accuracy, self.detected, self.episodes)?;
        writeln!(
            f,
            "delay <=1 min        {:.4}",
            self.delay_within(1)
        )?;
        writeln!(
            f,
            "delay <=2 min        {:.4}",
            self.delay_within(2)
        )?;
        write!(
            f,
            "confusion            tp={} fp={} fn={} tn={}",
            self.true_positives, self.false_positives, self.false_negatives, self.true_negatives
        )
    }
}

/// Evaluates aligned predictions against ground truth.
pub fn evaluate(series: &[LabeledSeries]) -> Result<EvalReport> {
    if series.is_empty() {
        return Err(Error::InvalidArg("evaluate: no series".into()));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let mut tn = 0u64;
    let mut episodes = 0usize;
    let mut detected = 0usize;
    let mut delays = Vec::new();

    for s in series {
        if s.truth.len() != s.pred.len() {
            return Err(Error::DimMismatch(format!(
                "evaluate: {} has {} truth minutes but {} predictions",
                s.entity,
                s.truth.len(),
                s.pred.len()
            )));
        }
        for (&t, &p) in s.truth.iter().zip(&s.pred) {
            match (t, p) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        // Episodes: maximal runs of truth.
        let mut m = 0;
        while m < s.truth.len() {
            if !s.truth[m] {
                m += 1;
                continue;
            }
            let start = m;
            while m < s.truth.len() && s.truth[m] {
                m += 1;
            }
            episodes += 1;
            if let Some(hit) = (start..m).find(|&i| s.pred[i]) {
                detected += 1;
                delays.push(hit - start + 1);
            }
        }
    }

    let precision_defined = tp + fp > 0;
    let precision = if precision_defined { tp as f64 / (tp + fp) as f64 } else { 1.0 };
    let detection_accuracy =
        if episodes > 0 { detected as f64 / episodes as f64 } else { 0.0 };
    Ok(EvalReport {
        precision,
        precision_defined,
        detection_accuracy,
        episodes,
        detected,
        delays,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(entity: &str, truth: &[u8], pred: &[u8]) -> LabeledSeries {
        LabeledSeries {
            entity: entity.into(),
            truth: truth.iter().map(|&b| b == 1).collect(),
            pred: pred.iter().map(|&b| b == 1).collect(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let s = series("u0", &[0, 1, 1, 0, 0, 1], &[0, 1, 1, 0, 0, 1]);
        let r = evaluate(&[s]).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.detection_accuracy, 1.0);
        assert_eq!(r.episodes, 2);
        assert_eq!(r.delays, vec![1, 1]);
    }

    #[test]
    fn no_positives_flags_undefined_precision() {
        let s = series("u0", &[0, 1, 0], &[0, 0, 0]);
        let r = evaluate(&[s]).unwrap();
        assert!(!r.precision_defined);
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.detection_accuracy, 0.0);
    }

    #[test]
    fn hand_built_three_attack_scenario() {
        // Episode 1 (minutes 1-2): detected at its second minute.
        // Episode 2 (minutes 5-6): missed.
        // Episode 3 (minute 9): detected immediately.
        // One extra false positive at minute 11.
        let truth = [0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0];
        let pred_ = [0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1];
        let r = evaluate(&[series("u0", &truth, &pred_)]).unwrap();
        assert_eq!(r.episodes, 3);
        assert_eq!(r.detected, 2);
        assert!((r.detection_accuracy - 2.0 / 3.0).abs() < 1e-12);
        // tp = minutes 2 and 9 -> 2; fp = minute 11 -> 1.
        assert_eq!((r.true_positives, r.false_positives), (2, 1));
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.delays, vec![2, 1]);
    }

    #[test]
    fn duplication_leaves_metrics_unchanged() {
        let a = series("u0", &[0, 1, 1, 0, 1], &[0, 1, 0, 1, 1]);
        let r1 = evaluate(&[a.clone()]).unwrap();
        let r2 = evaluate(&[a.clone(), LabeledSeries { entity: "u1".into(), ..a }]).unwrap();
        assert_eq!(r1.precision, r2.precision);
        assert_eq!(r1.detection_accuracy, r2.detection_accuracy);
    }

    #[test]
    fn misaligned_series_is_an_error() {
        let s = LabeledSeries { entity: "u0".into(), truth: vec![true], pred: vec![] };
        assert!(matches!(evaluate(&[s]), Err(Error::DimMismatch(_))));
    }
}
