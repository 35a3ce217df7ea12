//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use graph_dlm::dlm::{SlotGram, SlotHyperParams};
use graph_dlm::graph::{build_graph, build_grid, mix_kernels, DiffusionGrid, GraphConfig, SensorGraph};
use graph_dlm::synthetic::random_geometric_distances;
use graph_dlm::TrainedModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn random_simplex(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// A connected graph on `n` random points with a fixed, generous kernel width.
pub fn random_graph(n: usize, seed: u64) -> SensorGraph {
    let d = random_geometric_distances(n, 1000.0, seed);
    let cfg = GraphConfig {
        kappa: Some(2000.0),
        sigma: Some(500.0),
        ..Default::default()
    };
    build_graph(&d, &cfg).unwrap()
}

pub fn random_grid(n: usize, k: usize, seed: u64) -> (SensorGraph, DiffusionGrid) {
    let g = random_graph(n, seed);
    let cfg = GraphConfig {
        num_periods: k,
        ..Default::default()
    };
    let grid = build_grid(&g, &cfg).unwrap();
    (g, grid)
}

/// Ridge normal equations `(aC + gP)(aXX^T + gI)^-1`, solved by Cholesky.
pub fn ridge_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, prior: &DMatrix<f64>, a: f64, g: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let rhs = (y * x.transpose() * a + prior * g).transpose();
    let sys = x * x.transpose() * a + DMatrix::identity(n, n) * g;
    sys.cholesky().unwrap().solve(&rhs).transpose()
}

/// Log-density of `vec(Y)` under the explicit `Nm x Nm` marginal covariance
/// `I/alpha + (X^T X kron I_N)/gamma` with mean `vec(P X)`.
pub fn dense_log_evidence(x: &DMatrix<f64>, y: &DMatrix<f64>, grid: &DiffusionGrid, h: &SlotHyperParams) -> f64 {
    let (n, m) = x.shape();
    let prior = mix_kernels(grid, &h.pi).unwrap();
    let mean = &prior * x;
    let xtx = x.transpose() * x;
    let dim = n * m;
    let cov = DMatrix::from_fn(dim, dim, |r, c| {
        let (i, d) = (r % n, r / n);
        let (i2, d2) = (c % n, c / n);
        if i != i2 {
            0.0
        } else {
            let noise = if d == d2 { 1.0 / h.alpha } else { 0.0 };
            noise + xtx[(d, d2)] / h.gamma
        }
    });
    let resid = DVector::from_fn(dim, |r, _| y[(r % n, r / n)] - mean[(r % n, r / n)]);
    let chol = cov.cholesky().unwrap();
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = resid.dot(&chol.solve(&resid));
    -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

/// Monte-Carlo estimate of the log marginal likelihood by sampling transitions
/// from the prior. Returns the estimate and its delta-method standard error.
pub fn mc_log_evidence(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    grid: &DiffusionGrid,
    h: &SlotHyperParams,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let (n, m) = x.shape();
    let prior = mix_kernels(grid, &h.pi).unwrap();
    let sd = 1.0 / h.gamma.sqrt();
    let c = -0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI / h.alpha).ln();
    let ll: Vec<f64> = (0..samples)
        .map(|_| {
            let hs = &prior + randn(n, n, rng) * sd;
            c - 0.5 * h.alpha * (y - hs * x).norm_squared()
        })
        .collect();
    let mx = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ll.iter().map(|v| (v - mx).exp()).collect();
    let mean = w.iter().sum::<f64>() / samples as f64;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    (mx + mean.ln(), var.sqrt() / (samples as f64).sqrt() / mean)
}

/// Sample covariance of the normalized state after `h` simulated steps from a
/// zero state, next to the standard error of each entry.
pub fn rollout_covariance(
    model: &TrainedModel,
    t: usize,
    h: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.num_sensors();
    let mut acc = DMatrix::zeros(n, n);
    let mut sq = DMatrix::zeros(n, n);
    for _ in 0..samples {
        let mut z = DVector::zeros(n);
        for i in 0..h {
            let s = &model.slots[(t + i) % model.slots_per_day];
            let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) / s.hyper.alpha.sqrt());
            z = &s.h_hat * z + noise;
        }
        let outer = &z * z.transpose();
        sq += outer.component_mul(&outer);
        acc += outer;
    }
    let s = samples as f64;
    let mean = acc / s;
    let var = sq / s - mean.component_mul(&mean);
    let se = var.map(|v| (v.max(0.0) / s).sqrt());
    (mean, se)
}

/// Slot statistics for planted data `Y = (P + E) X + noise` with fresh `X`.
pub fn planted_slot(
    n: usize,
    m: usize,
    grid: &DiffusionGrid,
    truth: &SlotHyperParams,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>, SlotGram) {
    let x = randn(n, m, rng);
    let prior = mix_kernels(grid, &truth.pi).unwrap();
    let h = prior + randn(n, n, rng) / truth.gamma.sqrt();
    let y = &h * &x + randn(n, m, rng) / truth.alpha.sqrt();
    let gram = SlotGram::new(0, &x, &y, grid).unwrap();
    (x, y, gram)
}
