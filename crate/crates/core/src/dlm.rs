//! Closed-form per-slot transition estimates.
//!
//! For a slot `t` with training snapshots `X_t` and successors `X_{t+1}`
//! (both `N x m`), the maximum-likelihood transition is
//! `C (X_t X_t^T)^+` with `C = X_{t+1} X_t^T`, and the MAP transition under
//! the Gaussian prior `N(H_mix, 1/gamma)` is
//!
//! ```text
//! H = C U a(aL + gI)^-1 U^T + H_mix U g(aL + gI)^-1 U^T
//! ```
//!
//! where `X_t X_t^T = U L U^T`. The second form never inverts `X_t X_t^T`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{log_evidence, EvidenceObjective};
use crate::graph::{mix_kernels, DiffusionGrid};

/// Relative eigenvalue cutoff for the pseudo-inverse.
pub const RANK_TOL: f64 = 1e-10;

/// Cached spectral quantities for one slot.
#[derive(Debug, Clone)]
pub struct SlotGram {
    pub t: usize,
    /// Eigenvectors of `X_t X_t^T` (N x N).
    pub u: DMatrix<f64>,
    /// Matching eigenvalues, clamped at zero.
    pub lambda: DVector<f64>,
    /// `X_{t+1} X_t^T`.
    pub cross: DMatrix<f64>,
    /// Eigenvectors of `X_t^T X_t` (m x m).
    pub q: DMatrix<f64>,
    /// Matching eigenvalues, clamped at zero.
    pub d: DVector<f64>,
    /// `X_{t+1} Q`.
    pub a: DMatrix<f64>,
    /// `H(tau_k) X_t Q` for every diffusion period.
    pub b: Vec<DMatrix<f64>>,
    /// Mean squared one-step change `mean((X_{t+1} - X_t)^2)`.
    pub persistence_mse: f64,
}

fn clamped_eigen(m: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let eig = SymmetricEigen::new(m);
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    (eig.eigenvectors, vals)
}

impl SlotGram {
    pub fn new(t: usize, x: &DMatrix<f64>, x_next: &DMatrix<f64>, grid: &DiffusionGrid) -> Result<Self> {
        let (n, m) = x.shape();
        if x_next.shape() != (n, m) {
            return Err(Error::Validation(format!(
                "slot {t}: X_t is {n}x{m} but X_(t+1) is {}x{}",
                x_next.nrows(),
                x_next.ncols()
            )));
        }
        if grid.dim() != n {
            return Err(Error::Validation(format!(
                "slot {t}: grid kernels are {0}x{0}, data has N={n}",
                grid.dim()
            )));
        }
        let xt = x.transpose();
        let (u, lambda) = clamped_eigen(x * &xt);
        let (q, d) = clamped_eigen(&xt * x);
        let cross = x_next * &xt;
        let a = x_next * &q;
        let xq = x * &q;
        let b = grid.kernels.iter().map(|h| h * &xq).collect();
        let persistence_mse = (x_next - x).norm_squared() / (n * m).max(1) as f64;
        Ok(Self {
            t,
            u,
            lambda,
            cross,
            q,
            d,
            a,
            b,
            persistence_mse,
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.u.nrows()
    }

    pub fn num_days(&self) -> usize {
        self.q.nrows()
    }

    /// `U diag(f(lambda_i)) U^T`.
    fn spectral(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.lambda[j]);
        }
        scaled * self.u.transpose()
    }
}

/// Per-slot hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotHyperParams {
    /// Noise precision.
    pub alpha: f64,
    /// Prior precision.
    pub gamma: f64,
    /// Mixture weights over the diffusion grid.
    pub pi: Vec<f64>,
}

impl SlotHyperParams {
    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Validation(format!(
                "precisions must be positive and finite (alpha={}, gamma={})",
                self.alpha, self.gamma
            )));
        }
        crate::graph::kernels::validate_simplex(&self.pi, k)
    }

    pub fn uniform(alpha: f64, gamma: f64, k: usize) -> Self {
        Self {
            alpha,
            gamma,
            pi: vec![1.0 / k as f64; k],
        }
    }
}

/// Learned state of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotModel {
    pub t: usize,
    #[serde(skip, default = "empty_matrix")]
    pub h_hat: DMatrix<f64>,
    pub hyper: SlotHyperParams,
    pub c_data: f64,
    pub c_prior: f64,
    pub log_evidence: f64,
    /// Whether the hyperparameter search met its gradient tolerance.
    pub converged: bool,
}

fn empty_matrix() -> DMatrix<f64> {
    DMatrix::zeros(0, 0)
}

#[derive(Debug, Clone)]
pub struct MlTransition {
    pub h: DMatrix<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Least-squares transition `C U L^+ U^T` (minimum-norm when rank deficient).
pub fn ml_transition(gram: &SlotGram) -> MlTransition {
    let lmax = gram.lambda.max().max(0.0);
    let cutoff = RANK_TOL * lmax;
    let rank = gram.lambda.iter().filter(|&&l| l > cutoff && l > 0.0).count();
    let pinv = gram.spectral(|l| if l > cutoff && l > 0.0 { 1.0 / l } else { 0.0 });
    MlTransition {
        h: &gram.cross * pinv,
        rank,
        rank_deficient: rank < gram.num_sensors(),
    }
}

/// The prior mode: the mixed diffusion kernel.
pub fn prior_transition(grid: &DiffusionGrid, pi: &[f64]) -> Result<DMatrix<f64>> {
    mix_kernels(grid, pi)
}

/// Data and prior contribution weights `(c_data, c_prior)`.
pub fn contributions(lambda: &DVector<f64>, alpha: f64, gamma: f64) -> (f64, f64) {
    // U is orthonormal, so the Frobenius norms reduce to the spectra.
    let (mut wd, mut wp) = (0.0, 0.0);
    for &l in lambda.iter() {
        let den = alpha * l + gamma;
        wd += (alpha * l / den).powi(2);
        wp += (gamma / den).powi(2);
    }
    let (wd, wp) = (wd.sqrt(), wp.sqrt());
    let c_data = wd / (wd + wp);
    (c_data, 1.0 - c_data)
}

/// MAP transition, contribution diagnostics and log-evidence for fixed hyperparameters.
pub fn map_transition(gram: &SlotGram, grid: &DiffusionGrid, hyper: &SlotHyperParams) -> Result<SlotModel> {
    hyper.validate(grid.len())?;
    let (alpha, gamma) = (hyper.alpha, hyper.gamma);
    let prior = mix_kernels(grid, &hyper.pi)?;
    let data_part = gram.spectral(|l| alpha / (alpha * l + gamma));
    let prior_part = gram.spectral(|l| gamma / (alpha * l + gamma));
    let h_hat = &gram.cross * data_part + prior * prior_part;
    let (c_data, c_prior) = contributions(&gram.lambda, alpha, gamma);
    let log_evidence = log_evidence(&EvidenceObjective::new(gram), hyper)?;
    Ok(SlotModel {
        t: gram.t,
        h_hat,
        hyper: hyper.clone(),
        c_data,
        c_prior,
        log_evidence,
        converged: true,
    })
}
