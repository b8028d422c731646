//! Logistic regression baseline (gradient descent on standardized inputs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { iterations: 300, learning_rate: 0.5, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Standardization parameters captured at fit time.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    pub fn fit(features: &[Vec<f64>], labels: &[bool], cfg: &LogisticConfig) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::InvalidArg("logistic: bad training set".into()));
        }
        let dim = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            if f.len() != dim {
                return Err(Error::DimMismatch("logistic: ragged features".into()));
            }
            for d in 0..dim {
                mean[d] += f[d];
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for f in features {
            for d in 0..dim {
                let diff = f[d] - mean[d];
                std[d] += diff * diff;
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }

        let scaled: Vec<Vec<f64>> = features
            .iter()
            .map(|f| f.iter().zip(mean.iter().zip(&std)).map(|(v, (m, s))| (v - m) / s).collect())
            .collect();
        let mut weights = vec![0.0; dim];
        let mut bias = 0.0;
        for _ in 0..cfg.iterations {
            let mut grad_w = vec![0.0; dim];
            let mut grad_b = 0.0;
            for (x, &y) in scaled.iter().zip(labels) {
                let z = bias + x.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
                let err = sigmoid(z) - f64::from(u8::from(y));
                for d in 0..dim {
                    grad_w[d] += err * x[d];
                }
                grad_b += err;
            }
            for d in 0..dim {
                weights[d] -= cfg.learning_rate * (grad_w[d] / n + cfg.l2 * weights[d]);
            }
            bias -= cfg.learning_rate * grad_b / n;
        }
        Ok(Self { weights, bias, mean, std })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimMismatch("logistic: feature dimension".into()));
        }
        let z = self.bias
            + x.iter()
                .zip(self.mean.iter().zip(&self.std))
                .zip(&self.weights)
                .map(|((v, (m, s)), w)| w * (v - m) / s)
                .sum::<f64>();
        Ok(sigmoid(z))
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.predict_proba(x)? >= 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_a_linear_boundary() {
        let features: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![i as f64 / 10.0, ((i * 17) % 29) as f64 / 29.0])
            .collect();
        let labels: Vec<bool> = features.iter().map(|f| f[0] > 5.0).collect();
        let model = LogisticModel::fit(&features, &labels, &LogisticConfig::default()).unwrap();
        let correct = features
            .iter()
            .zip(&labels)
            .filter(|(f, &l)| model.predict(f).unwrap() == l)
            .count();
        assert!(correct >= 97, "accuracy {correct}/100");
    }
}
