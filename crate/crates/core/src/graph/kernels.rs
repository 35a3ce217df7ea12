use nalgebra::DMatrix;
use rayon::prelude::*;

use super::SensorGraph;
use crate::error::{Error, Result};

/// Tolerance on `sum(pi) == 1` and on `pi` leaving `[0, 1]`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Candidate diffusion periods `10^s` for `s = -10.0, -9.9, ..., 10.0`.
pub fn tau_candidates() -> impl DoubleEndedIterator<Item = f64> {
    (-100i32..=100).map(|k| 10f64.powf(k as f64 / 10.0))
}

/// Shortest and longest useful diffusion periods from the Laplacian spectrum.
///
/// `tau0` is the largest candidate with `||H(tau) - I||_2 = 1 - exp(-tau lambda_max) < eps`
/// and `tau_inf` the smallest with `||H(tau) - 11^T/N||_2 = exp(-tau lambda_2) < eps`.
pub fn extreme_taus(g: &SensorGraph, epsilon: f64) -> Result<(f64, f64)> {
    extreme_taus_from_spectrum(g.lambda2(), g.lambda_max(), epsilon)
}

pub(crate) fn extreme_taus_from_spectrum(lambda2: f64, lambda_max: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let tau0 = tau_candidates()
        .rev()
        .find(|&tau| -(-tau * lambda_max).exp_m1() < epsilon);
    let tau_inf = tau_candidates().find(|&tau| (-tau * lambda2).exp() < epsilon);
    match (tau0, tau_inf) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Config(format!(
            "no candidate diffusion period satisfies epsilon={epsilon} \
             (lambda2={lambda2:.6e}, lambda_max={lambda_max:.6e})"
        ))),
    }
}

/// Diffusion periods (ascending) and their heat kernels.
#[derive(Debug, Clone)]
pub struct DiffusionGrid {
    pub taus: Vec<f64>,
    pub kernels: Vec<DMatrix<f64>>,
}

impl DiffusionGrid {
    /// Builds a grid for explicit periods.
    pub fn from_taus(g: &SensorGraph, taus: Vec<f64>) -> Self {
        let kernels = taus.par_iter().map(|&t| g.heat_kernel(t)).collect();
        Self { taus, kernels }
    }

    /// Number of diffusion periods K.
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Number of sensors.
    pub fn dim(&self) -> usize {
        self.kernels.first().map_or(0, |k| k.nrows())
    }

    /// Sub-grid with the listed periods, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            taus: indices.iter().map(|&i| self.taus[i]).collect(),
            kernels: indices.iter().map(|&i| self.kernels[i].clone()).collect(),
        }
    }

    pub fn mix(&self, pi: &[f64]) -> Result<DMatrix<f64>> {
        mix_kernels(self, pi)
    }
}

/// K periods evenly spaced on a log scale between the two extreme periods.
pub fn build_grid(g: &SensorGraph, cfg: &super::GraphConfig) -> Result<DiffusionGrid> {
    cfg.validate()?;
    let (tau0, tau_inf) = extreme_taus(g, cfg.epsilon)?;
    if tau0 >= tau_inf {
        return Err(Error::Config(format!(
            "epsilon={} gives tau0={tau0:e} >= tau_inf={tau_inf:e}; lower epsilon",
            cfg.epsilon
        )));
    }
    let k = cfg.num_periods;
    let (lo, hi) = (tau0.ln(), tau_inf.ln());
    let taus = (0..k)
        .map(|i| match i {
            0 => tau0,
            _ if i == k - 1 => tau_inf,
            _ => (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp(),
        })
        .collect();
    Ok(DiffusionGrid::from_taus(g, taus))
}

pub(crate) fn validate_simplex(pi: &[f64], k: usize) -> Result<()> {
    if pi.len() != k {
        return Err(Error::Validation(format!(
            "mixture weights have length {}, expected {k}",
            pi.len()
        )));
    }
    if pi.iter().any(|&p| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&p)) {
        return Err(Error::Validation(format!("mixture weights outside [0,1]: {pi:?}")));
    }
    let s: f64 = pi.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Validation(format!("mixture weights sum to {s}, not 1")));
    }
    Ok(())
}

/// Convex combination `sum_k pi_k H(tau_k)`.
pub fn mix_kernels(grid: &DiffusionGrid, pi: &[f64]) -> Result<DMatrix<f64>> {
    validate_simplex(pi, grid.len())?;
    let n = grid.dim();
    let mut out = DMatrix::zeros(n, n);
    for (w, h) in pi.iter().zip(&grid.kernels) {
        if *w != 0.0 {
            out.zip_apply(h, |o, v| *o += w * v);
        }
    }
    Ok(out)
}
