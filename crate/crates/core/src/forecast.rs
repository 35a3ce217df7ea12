//! Multi-step forecasts and their predictive covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::TrainedModel;

impl TrainedModel {
    /// Index of the transition applied `i` steps after slot `t`.
    fn step_slot(&self, t: usize, i: usize) -> usize {
        (t + i) % self.slots_per_day
    }

    /// Checks that `h` steps can be taken from slot `t`.
    pub fn check_horizon(&self, t: usize, h: usize) -> Result<()> {
        if t >= self.slots_per_day {
            return Err(Error::Validation(format!(
                "slot {t} out of range (day has {} slots)",
                self.slots_per_day
            )));
        }
        if h == 0 {
            return Err(Error::Validation("horizon must be at least one step".into()));
        }
        if !self.wrap && t + h > self.slots_per_day - 1 {
            return Err(Error::HorizonExceedsDay { slot: t, horizon: h });
        }
        Ok(())
    }

    /// Normalized states after `1..=max_h` steps from normalized state `z` at slot `t`.
    pub fn propagate(&self, z: &DVector<f64>, t: usize, max_h: usize) -> Result<Vec<DVector<f64>>> {
        self.check_horizon(t, max_h)?;
        let mut out = Vec::with_capacity(max_h);
        let mut cur = z.clone();
        for i in 0..max_h {
            cur = &self.slots[self.step_slot(t, i)].h_hat * cur;
            out.push(cur.clone());
        }
        Ok(out)
    }

    fn check_snapshot(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_sensors() {
            return Err(Error::Validation(format!(
                "snapshot has {} values, model has {} sensors",
                x.len(),
                self.num_sensors()
            )));
        }
        Ok(())
    }

    /// Point forecast in raw units `h` steps after slot `t`. Missing inputs
    /// (NaN or 0) are replaced by the training mean.
    pub fn predict(&self, x: &[f64], t: usize, h: usize) -> Result<DVector<f64>> {
        self.check_snapshot(x)?;
        let z = self.norm.normalize_snapshot(x);
        let path = self.propagate(&z, t, h)?;
        Ok(self.norm.denormalize(&path[h - 1]))
    }

    /// Predictive covariance of the normalized state `h` steps after slot `t`,
    /// treating the trained transitions as fixed:
    /// `R_1 = I/alpha_t`, `R_i = I/alpha + H R_{i-1} H^T`.
    pub fn predictive_covariance(&self, t: usize, h: usize) -> Result<DMatrix<f64>> {
        Ok(self.covariance_path(t, h)?.pop().expect("h >= 1"))
    }

    fn covariance_path(&self, t: usize, h: usize) -> Result<Vec<DMatrix<f64>>> {
        self.check_horizon(t, h)?;
        let n = self.num_sensors();
        let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(h);
        for i in 0..h {
            let s = &self.slots[self.step_slot(t, i)];
            let mut r = DMatrix::identity(n, n) / s.hyper.alpha;
            if let Some(prev) = out.last() {
                r += &s.h_hat * prev * s.h_hat.transpose();
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Forecasts at several horizons, optionally with per-sensor variances in raw units squared.
    pub fn forecast(&self, x: &[f64], t: usize, horizons: &[usize], with_variance: bool) -> Result<Forecast> {
        self.check_snapshot(x)?;
        let max_h = horizons
            .iter()
            .copied()
            .max()
            .ok_or_else(|| Error::Validation("no horizons".into()))?;
        if horizons.contains(&0) {
            return Err(Error::Validation("horizon must be at least one step".into()));
        }
        let path = self.propagate(&self.norm.normalize_snapshot(x), t, max_h)?;
        let mean = horizons.iter().map(|&h| self.norm.denormalize(&path[h - 1])).collect();
        let variance = if with_variance {
            let cov = self.covariance_path(t, max_h)?;
            Some(
                horizons
                    .iter()
                    .map(|&h| DVector::from_fn(self.num_sensors(), |i, _| cov[h - 1][(i, i)] * self.norm.sd[i].powi(2)))
                    .collect(),
            )
        } else {
            None
        };
        Ok(Forecast {
            slot: t,
            horizons: horizons.to_vec(),
            mean,
            variance,
        })
    }

    /// Persistence forecast: the current snapshot, training mean where missing.
    pub fn persistence(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_snapshot(x)?;
        Ok(self.norm.denormalize(&self.norm.normalize_snapshot(x)))
    }
}

#[derive(Debug, Clone)]
pub struct Forecast {
    pub slot: usize,
    /// Horizons in steps.
    pub horizons: Vec<usize>,
    pub mean: Vec<DVector<f64>>,
    pub variance: Option<Vec<DVector<f64>>>,
}
