//! Per-slot training over a day tensor.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{imputed_slots, DayTensor, NormStats};
use crate::dlm::{map_transition, ml_transition, SlotGram, SlotHyperParams, SlotModel};
use crate::error::{Error, Result};
use crate::evidence::{fit_slot, EvidenceObjective, FitResult, OptimizerConfig};
use crate::graph::{build_grid, mix_kernels, DiffusionGrid, GraphConfig, SensorGraph};
use crate::model::{TrainedModel, TransitionMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    /// Also train the transition from the last slot into the next day's first.
    pub wrap: bool,
    pub seed: u64,
    pub mode: TransitionMode,
    /// Skip the evidence search and use these hyperparameters for every slot.
    pub fixed_hyper: Option<SlotHyperParams>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            wrap: true,
            seed: 0,
            mode: TransitionMode::Map,
            fixed_hyper: None,
        }
    }
}

/// Snapshot pairs `(X_t, X_{t+1})` for every trainable slot.
pub fn slot_pairs(z: &[DMatrix<f64>], wrap: bool) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    let t_per = z.len();
    let mut pairs: Vec<_> = (0..t_per.saturating_sub(1))
        .map(|t| (z[t].clone(), z[t + 1].clone()))
        .collect();
    if wrap && t_per > 0 {
        let m = z[0].ncols();
        let last = &z[t_per - 1];
        pairs.push((last.columns(0, m - 1).into_owned(), z[0].columns(1, m - 1).into_owned()));
    }
    pairs
}

fn train_slot(
    t: usize,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    grid: &DiffusionGrid,
    cfg: &TrainConfig,
) -> Result<SlotModel> {
    let gram = SlotGram::new(t, x, y, grid)?;
    let fit = match &cfg.fixed_hyper {
        Some(h) => FitResult {
            hyper: h.clone(),
            log_evidence: f64::NAN,
            converged: true,
            iterations: 0,
            grad_norm: 0.0,
        },
        None => fit_slot(&EvidenceObjective::new(&gram), &cfg.optimizer, cfg.seed, t)?,
    };
    let mut model = map_transition(&gram, grid, &fit.hyper)?;
    model.converged = fit.converged;
    match cfg.mode {
        TransitionMode::Map => {}
        TransitionMode::PriorOnly => {
            model.h_hat = mix_kernels(grid, &fit.hyper.pi)?;
            model.c_data = 0.0;
            model.c_prior = 1.0;
        }
        TransitionMode::MaxLikelihood => {
            let ml = ml_transition(&gram);
            if ml.rank_deficient {
                log::warn!(
                    "slot {t}: snapshot Gram matrix has rank {} < N, using minimum-norm solution",
                    ml.rank
                );
            }
            model.h_hat = ml.h;
            model.c_data = 1.0;
            model.c_prior = 0.0;
        }
    }
    Ok(model)
}

/// Fits every slot on normalized, imputed slot matrices (`T` matrices of `N x m`).
pub fn train_slots(z: &[DMatrix<f64>], grid: &DiffusionGrid, cfg: &TrainConfig) -> Result<Vec<SlotModel>> {
    cfg.optimizer.validate(grid.len())?;
    if let Some(h) = &cfg.fixed_hyper {
        h.validate(grid.len())?;
    }
    let m = z.first().map_or(0, |s| s.ncols());
    if m < 2 {
        return Err(Error::Validation(format!("need at least 2 training days, got {m}")));
    }
    slot_pairs(z, cfg.wrap)
        .par_iter()
        .enumerate()
        .map(|(t, (x, y))| train_slot(t, x, y, grid, cfg).map_err(|e| e.in_slot(t)))
        .collect()
}

/// Normalizes the raw training tensor, builds the diffusion grid and fits all slots.
pub fn train(raw: &DayTensor, graph: &SensorGraph, graph_cfg: &GraphConfig, cfg: &TrainConfig) -> Result<TrainedModel> {
    graph_cfg.validate()?;
    let grid = build_grid(graph, graph_cfg)?;
    train_with_grid(raw, graph, &grid, graph_cfg.epsilon, cfg)
}

/// Like [`train`] with an explicit (possibly reduced) diffusion grid.
pub fn train_with_grid(
    raw: &DayTensor,
    graph: &SensorGraph,
    grid: &DiffusionGrid,
    epsilon: f64,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    if raw.num_sensors() != graph.len() {
        return Err(Error::Validation(format!(
            "data has {} sensors, graph has {}",
            raw.num_sensors(),
            graph.len()
        )));
    }
    let norm = NormStats::fit(raw)?;
    let z = imputed_slots(&norm.apply(raw));
    let slots = train_slots(&z, grid, cfg)?;
    let days: Vec<NaiveDate> = raw.days.clone();
    Ok(TrainedModel {
        sensor_ids: raw.sensor_ids.clone(),
        interval_minutes: raw.interval_minutes,
        slots_per_day: raw.slots_per_day(),
        kappa: graph.kappa,
        sigma: graph.sigma,
        epsilon,
        taus: grid.taus.clone(),
        norm,
        wrap: cfg.wrap,
        mode: cfg.mode,
        training_days: days,
        slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_pairs_cross_midnight() {
        let z: Vec<DMatrix<f64>> = (0..3)
            .map(|t| DMatrix::from_fn(2, 4, |i, d| (100 * d + 10 * t + i) as f64))
            .collect();
        let pairs = slot_pairs(&z, true);
        assert_eq!(pairs.len(), 3);
        let (x, y) = &pairs[2];
        assert_eq!(x.ncols(), 3);
        for d in 0..3 {
            // last slot of day d followed by first slot of day d+1
            assert_eq!(x[(0, d)], (100 * d + 20) as f64);
            assert_eq!(y[(0, d)], (100 * (d + 1)) as f64);
        }
        assert_eq!(slot_pairs(&z, false).len(), 2);
    }
}
