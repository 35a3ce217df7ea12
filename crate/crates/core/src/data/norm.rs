use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{is_observed, DayTensor};
use crate::error::{Error, Result};

/// Per-sensor z-score statistics over observed training entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: Vec<f64>,
    pub sd: Vec<f64>,
}

impl NormStats {
    /// Fits on the training tensor only.
    pub fn fit(train: &DayTensor) -> Result<Self> {
        let n = train.num_sensors();
        let mut sum = vec![0.0; n];
        let mut cnt = vec![0usize; n];
        for s in &train.slots {
            for (i, row) in s.row_iter().enumerate() {
                for &v in row.iter().filter(|v| !v.is_nan()) {
                    sum[i] += v;
                    cnt[i] += 1;
                }
            }
        }
        let sparse: Vec<String> = (0..n)
            .filter(|&i| cnt[i] < 2)
            .map(|i| train.sensor_ids[i].clone())
            .collect();
        if !sparse.is_empty() {
            return Err(Error::Validation(format!(
                "sensors with fewer than 2 observed training values: {}",
                sparse.join(", ")
            )));
        }
        let mu: Vec<f64> = (0..n).map(|i| sum[i] / cnt[i] as f64).collect();
        let mut ss = vec![0.0; n];
        for s in &train.slots {
            for (i, row) in s.row_iter().enumerate() {
                for &v in row.iter().filter(|v| !v.is_nan()) {
                    ss[i] += (v - mu[i]).powi(2);
                }
            }
        }
        let sd: Vec<f64> = (0..n).map(|i| (ss[i] / cnt[i] as f64).sqrt()).collect();
        let flat: Vec<String> = (0..n)
            .filter(|&i| !(sd[i] > 1e-12 * mu[i].abs().max(1.0)))
            .map(|i| train.sensor_ids[i].clone())
            .collect();
        if !flat.is_empty() {
            return Err(Error::ZeroVariance(flat));
        }
        Ok(Self { mu, sd })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Normalized copy; missing entries stay `NaN`.
    pub fn apply(&self, dt: &DayTensor) -> DayTensor {
        self.map_rows(dt, |i, v| (v - self.mu[i]) / self.sd[i])
    }

    pub fn invert(&self, dt: &DayTensor) -> DayTensor {
        self.map_rows(dt, |i, v| v * self.sd[i] + self.mu[i])
    }

    fn map_rows(&self, dt: &DayTensor, f: impl Fn(usize, f64) -> f64) -> DayTensor {
        let slots = dt
            .slots
            .iter()
            .map(|s| DMatrix::from_fn(s.nrows(), s.ncols(), |i, d| f(i, s[(i, d)])))
            .collect();
        DayTensor { slots, ..dt.clone() }
    }

    /// Normalizes a raw snapshot, imputing the training mean (0) where missing.
    pub fn normalize_snapshot<'a>(&self, x: impl IntoIterator<Item = &'a f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            x.into_iter().enumerate().map(|(i, &v)| {
                if is_observed(v) {
                    (v - self.mu[i]) / self.sd[i]
                } else {
                    0.0
                }
            }),
        )
    }

    pub fn denormalize(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(z.len(), |i, _| z[i] * self.sd[i] + self.mu[i])
    }
}

/// Normalized slot matrices with missing entries imputed by 0 (the training mean).
pub(crate) fn imputed_slots(normalized: &DayTensor) -> Vec<DMatrix<f64>> {
    normalized
        .slots
        .iter()
        .map(|s| s.map(|v| if v.is_nan() { 0.0 } else { v }))
        .collect()
}
