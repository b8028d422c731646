//! Traffic preprocessing and per-minute residual features.
//!
//! Raw counters are taken to `log(1 + v)` (zero-traffic minutes stay
//! finite) and then min-max scaled per metric with extrema taken from the
//! training split only, so every metric weighs equally in the decomposition
//! and no information leaks backwards from evaluation data.
//!
//! From a residual slice, each minute yields six features: the four metric
//! residuals plus the upload-download differences for bytes and packets.
//! Two optional GMM component likelihoods extend them to eight. These are
//! density values, not logs: outliers of any magnitude saturate near zero.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datagen::{TrafficDay, MINUTES_PER_DAY, TRAFFIC_METRICS};
use crate::error::{Error, Result};
use crate::gmm::Gmm2;
use crate::tensor::Tensor3;

/// Fixed order of the residual feature columns.
pub const FEATURE_NAMES: [&str; 8] = [
    "res_down_bytes",
    "res_up_bytes",
    "res_down_pkts",
    "res_up_pkts",
    "res_diff_bytes",
    "res_diff_pkts",
    "gmm_lik_1",
    "gmm_lik_2",
];

/// Index of the upload-download packet difference feature.
pub const DIFF_PKTS: usize = 5;

/// Per-metric (min, max) of `log(1 + v)` taken from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub per_metric: Vec<(f64, f64)>,
}

impl ScalingParams {
    /// Fits extrema over the given training days, one entry per metric in
    /// [`TRAFFIC_METRICS`] order.
    pub fn fit(training: &[&TrafficDay]) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::InvalidArg("scaling: empty training split".into()));
        }
        let mut per_metric = vec![(f64::INFINITY, f64::NEG_INFINITY); TRAFFIC_METRICS.len()];
        for day in training {
            for (m, acc) in per_metric.iter_mut().enumerate() {
                for &v in day.metric(m) {
                    if v < 0.0 {
                        return Err(Error::InvalidArg("scaling: negative traffic value".into()));
                    }
                    let lv = v.ln_1p();
                    acc.0 = acc.0.min(lv);
                    acc.1 = acc.1.max(lv);
                }
            }
        }
        Ok(Self { per_metric })
    }

    /// `(log(1+v) - min) / (max - min)`, with a degenerate metric mapping
    /// to zero.
    pub fn apply(&self, metric: usize, v: f64) -> Result<f64> {
        if v < 0.0 {
            return Err(Error::InvalidArg("scaling: negative traffic value".into()));
        }
        let (lo, hi) = self.per_metric[metric];
        let span = hi - lo;
        if span <= 0.0 {
            return Ok(0.0);
        }
        Ok((v.ln_1p() - lo) / span)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Identifies one user-day slice of the offline tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UdId {
    pub entity: String,
    pub day: usize,
}

/// Builds the preprocessed (UD x metric x minute) tensor from traffic days.
///
/// Slices appear in the input order of `days`.
pub fn traffic_tensor(
    days: &[&TrafficDay],
    params: &ScalingParams,
) -> Result<(Tensor3, Vec<UdId>)> {
    if days.is_empty() {
        return Err(Error::InvalidArg("traffic_tensor: no days".into()));
    }
    let dims = (days.len(), TRAFFIC_METRICS.len(), MINUTES_PER_DAY);
    let mut values = vec![0.0; dims.0 * dims.1 * dims.2];
    for (i, day) in days.iter().enumerate() {
        for m in 0..TRAFFIC_METRICS.len() {
            let series = day.metric(m);
            if series.len() != MINUTES_PER_DAY {
                return Err(Error::DimMismatch("traffic_tensor: series length".into()));
            }
            for (k, &v) in series.iter().enumerate() {
                values[i + dims.0 * (m + dims.1 * k)] = params.apply(m, v)?;
            }
        }
    }
    let ids = days.iter().map(|d| UdId { entity: d.entity.clone(), day: d.day }).collect();
    Ok((Tensor3::new(dims, values)?, ids))
}

/// Per-(entity, minute) residual feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFeatures {
    pub entity: String,
    pub day: usize,
    pub minute: usize,
    /// The six base features in [`FEATURE_NAMES`] order.
    pub values: [f64; 6],
    /// Optional per-component GMM likelihoods (features 7-8).
    pub gmm: Option<[f64; 2]>,
}

impl ResidualFeatures {
    /// Dense feature vector of length 6 or 8.
    pub fn vector(&self) -> Vec<f64> {
        match self.gmm {
            None => self.values.to_vec(),
            Some(g) => {
                let mut v = self.values.to_vec();
                v.extend_from_slice(&g);
                v
            }
        }
    }
}

/// Extracts the six per-minute features from a `1 x 4 x K` residual slice.
///
/// Feature five is upload minus download byte residual, feature six the
/// packet analogue; any masked metric at a minute is an error.
pub fn extract_features(
    residual_slice: &Tensor3,
    entity: &str,
    day: usize,
) -> Result<Vec<ResidualFeatures>> {
    let (i, j, k) = residual_slice.dims();
    if i != 1 || j != TRAFFIC_METRICS.len() {
        return Err(Error::DimMismatch(format!(
            "extract_features: slice dims {:?}, expected (1, {}, minutes)",
            residual_slice.dims(),
            TRAFFIC_METRICS.len()
        )));
    }
    let mut out = Vec::with_capacity(k);
    for minute in 0..k {
        let mut metric = [0.0; 4];
        for (m, slot) in metric.iter_mut().enumerate() {
            if !residual_slice.is_observed(0, m, minute)? {
                return Err(Error::Data(format!(
                    "extract_features: metric {} missing at minute {minute}",
                    TRAFFIC_METRICS[m]
                )));
            }
            *slot = residual_slice.get(0, m, minute)?;
        }
        let values = [
            metric[0],
            metric[1],
            metric[2],
            metric[3],
            metric[1] - metric[0],
            metric[3] - metric[2],
        ];
        out.push(ResidualFeatures {
            entity: entity.to_string(),
            day,
            minute,
            values,
            gmm: None,
        });
    }
    Ok(out)
}

/// Appends the two per-component GMM likelihoods to each feature row.
pub fn attach_gmm_features(features: &mut [ResidualFeatures], gmm: &Gmm2) -> Result<()> {
    for f in features.iter_mut() {
        let lik = gmm.component_densities(&f.values)?;
        f.gmm = Some(lik);
    }
    Ok(())
}

/// Writes features as CSV with the fixed eight-column header (GMM columns
/// empty when absent).
pub fn write_features_csv<W: Write>(features: &[ResidualFeatures], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["entity".to_string(), "day".into(), "minute".into()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    wtr.write_record(&header)?;
    for f in features {
        let mut rec = vec![f.entity.clone(), f.day.to_string(), f.minute.to_string()];
        rec.extend(f.values.iter().map(|v| format!("{v}")));
        match f.gmm {
            Some(g) => rec.extend(g.iter().map(|v| format!("{v}"))),
            None => rec.extend(["".to_string(), "".to_string()]),
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads features written by [`write_features_csv`].
pub fn read_features_csv<R: std::io::Read>(r: R) -> Result<Vec<ResidualFeatures>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let expect: Vec<String> = {
        let mut h = vec!["entity".to_string(), "day".into(), "minute".into()];
        h.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
        h
    };
    if headers.iter().map(|s| s.to_string()).collect::<Vec<_>>() != expect {
        return Err(Error::Data("features CSV: unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("features CSV: bad number {:?}", &rec[i])))
        };
        let mut values = [0.0; 6];
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = parse(3 + i)?;
        }
        let gmm = if rec[9].is_empty() && rec[10].is_empty() {
            None
        } else {
            Some([parse(9)?, parse(10)?])
        };
        out.push(ResidualFeatures {
            entity: rec[0].to_string(),
            day: rec[1].parse().map_err(|_| Error::Data("features CSV: bad day".into()))?,
            minute: rec[2]
                .parse()
                .map_err(|_| Error::Data("features CSV: bad minute".into()))?,
            values,
            gmm,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_traffic, TrafficConfig};
    use proptest::prelude::*;

    fn toy_day(entity: &str, day: usize, base: f64) -> TrafficDay {
        TrafficDay {
            entity: entity.into(),
            day,
            down_bytes: vec![base; MINUTES_PER_DAY],
            up_bytes: vec![base / 8.0; MINUTES_PER_DAY],
            down_pkts: vec![base / 800.0; MINUTES_PER_DAY],
            up_pkts: vec![base / 900.0; MINUTES_PER_DAY],
            attack_labels: vec![false; MINUTES_PER_DAY],
        }
    }

    #[test]
    fn scaling_endpoints() {
        let days = gen_traffic(&TrafficConfig::default(), 2, 1, 1).unwrap();
        let refs: Vec<&TrafficDay> = days.iter().collect();
        let params = ScalingParams::fit(&refs).unwrap();
        let (lo, hi) = params.per_metric[0];
        assert!(lo < hi);
        // A value equal to the training max maps to exactly 1.
        let max_raw = hi.exp_m1();
        assert!((params.apply(0, max_raw).unwrap() - 1.0).abs() < 1e-12);
        // Degenerate metric maps to 0.
        let flat = vec![toy_day("u0", 0, 5.0)];
        let flat_refs: Vec<&TrafficDay> = flat.iter().collect();
        let p = ScalingParams::fit(&flat_refs).unwrap();
        assert_eq!(p.apply(0, 5.0).unwrap(), 0.0);
        // v = 0 with min 0 maps to 0.
        let mut z = toy_day("u0", 0, 5.0);
        z.down_bytes[0] = 0.0;
        let z_days = vec![z];
        let z_refs: Vec<&TrafficDay> = z_days.iter().collect();
        let p = ScalingParams::fit(&z_refs).unwrap();
        assert_eq!(p.apply(0, 0.0).unwrap(), 0.0);
        assert!(matches!(p.apply(0, -1.0), Err(Error::InvalidArg(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn prop_scaling_preserves_order(mut raw in proptest::collection::vec(0.0f64..1e9, 8..40)) {
            let mut day = toy_day("u0", 0, 1.0);
            for (m, v) in day.down_bytes.iter_mut().zip(&raw) {
                *m = *v;
            }
            let days = vec![day];
            let refs: Vec<&TrafficDay> = days.iter().collect();
            let params = ScalingParams::fit(&refs).unwrap();
            let scaled: Vec<f64> = raw.iter().map(|&v| params.apply(0, v).unwrap()).collect();
            raw.sort_by(f64::total_cmp);
            let sorted_scaled: Vec<f64> =
                raw.iter().map(|&v| params.apply(0, v).unwrap()).collect();
            let mut resorted = scaled;
            resorted.sort_by(f64::total_cmp);
            // Monotone transform: sorting commutes with scaling.
            for (a, b) in resorted.iter().zip(sorted_scaled.iter()) {
                prop_assert!((*a - *b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_is_train_split_only_and_deterministic() {
        let days = gen_traffic(&TrafficConfig::default(), 4, 2, 2).unwrap();
        let train: Vec<&TrafficDay> = days.iter().filter(|d| d.day == 0).collect();
        let p1 = ScalingParams::fit(&train).unwrap();
        let p2 = ScalingParams::fit(&train).unwrap();
        assert_eq!(p1, p2);
        // Applying train params to eval data is a pure function.
        let v = days.iter().find(|d| d.day == 1).unwrap().up_pkts[17];
        assert_eq!(p1.apply(3, v).unwrap(), p2.apply(3, v).unwrap());
    }

    #[test]
    fn feature_arithmetic() {
        let zeros = Tensor3::zeros((1, 4, 3)).unwrap();
        let f = extract_features(&zeros, "u0", 0).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.iter().all(|r| r.values.iter().all(|&v| v == 0.0)));

        // up-packets residual 3, down-packets residual 1 -> diff 2.
        let mut t = Tensor3::zeros((1, 4, 1)).unwrap();
        t.set(0, 3, 0, 3.0).unwrap();
        t.set(0, 2, 0, 1.0).unwrap();
        let f = extract_features(&t, "u0", 0).unwrap();
        assert_eq!(f[0].values[DIFF_PKTS], 2.0);
    }

    #[test]
    fn features_are_linear_in_residuals() {
        let t =
            Tensor3::from_fn((1, 4, 5), |_, j, k| (j as f64 + 1.0) * (k as f64 - 2.0)).unwrap();
        let scaled =
            Tensor3::from_fn((1, 4, 5), |_, j, k| 3.5 * (j as f64 + 1.0) * (k as f64 - 2.0))
                .unwrap();
        let f1 = extract_features(&t, "u0", 0).unwrap();
        let f2 = extract_features(&scaled, "u0", 0).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((3.5 * x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_metric_is_an_error() {
        let n = 4 * 2;
        let mut mask = vec![true; n];
        mask[1] = false;
        let t = Tensor3::with_mask((1, 4, 2), vec![0.0; n], mask).unwrap();
        assert!(matches!(extract_features(&t, "u0", 0), Err(Error::Data(_))));
    }

    #[test]
    fn features_csv_round_trip() {
        let t = Tensor3::from_fn((1, 4, 3), |_, j, k| j as f64 - k as f64).unwrap();
        let mut f = extract_features(&t, "u7", 2).unwrap();
        f[1].gmm = Some([-1.25, -3.5]);
        let mut buf = Vec::new();
        write_features_csv(&f, &mut buf).unwrap();
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }
}
