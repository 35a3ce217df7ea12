//! Marginal likelihood of a slot's hyperparameters and its maximization.
//!
//! With `X_t^T X_t = Q D Q^T`, `A = X_{t+1} Q` and `B_k = H(tau_k) X_t Q`,
//! the transition marginalizes out to independent columns:
//!
//! ```text
//! log p = -(Nm/2) ln 2pi - (N/2) sum_j ln s_j - 1/2 sum_j |e_j|^2 / s_j
//! s_j   = 1/alpha + D_j/gamma,    e_j = A_j - sum_k pi_k B_kj
//! ```
//!
//! Each column pair `(A_j, B_1j..B_Kj)` lives in a subspace of dimension at
//! most `K + 1`, so it is stored as its QR coordinates. Evaluations then cost
//! `O(m K^2)` regardless of the number of sensors and the residual is never
//! formed by cancelling large sums of squares.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dlm::{SlotGram, SlotHyperParams};
use crate::error::{Error, Result};
use crate::optim::{minimize, newton, LbfgsConfig, LbfgsResult};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Sufficient statistics of one slot for evidence evaluation.
#[derive(Debug, Clone)]
pub struct EvidenceObjective {
    n: usize,
    k: usize,
    d: DVector<f64>,
    /// Per column: `r x (K+1)` coordinates, columns `B_1..B_K, A`.
    coords: Vec<DMatrix<f64>>,
    init_alpha: f64,
}

impl EvidenceObjective {
    pub fn new(gram: &SlotGram) -> Self {
        let n = gram.num_sensors();
        let m = gram.num_days();
        let k = gram.b.len();
        let coords = (0..m)
            .map(|j| {
                let mut cols = DMatrix::zeros(n, k + 1);
                for (c, b) in gram.b.iter().enumerate() {
                    cols.set_column(c, &b.column(j));
                }
                cols.set_column(k, &gram.a.column(j));
                cols.qr().r()
            })
            .collect();
        let init_alpha = if gram.persistence_mse > 0.0 {
            1.0 / gram.persistence_mse
        } else {
            1.0
        };
        Self {
            n,
            k,
            d: gram.d.clone(),
            coords,
            init_alpha,
        }
    }

    pub fn num_periods(&self) -> usize {
        self.k
    }

    pub fn num_sensors(&self) -> usize {
        self.n
    }

    pub fn num_days(&self) -> usize {
        self.d.len()
    }

    /// Dimension of the search space: `(ln alpha, ln gamma, z_1..z_{K-1})`.
    pub fn dim(&self) -> usize {
        self.k + 1
    }

    fn residual(&self, j: usize, pi: &[f64]) -> DVector<f64> {
        let c = &self.coords[j];
        let mut e = c.column(self.k).clone_owned();
        for (kk, &p) in pi.iter().enumerate() {
            e.axpy(-p, &c.column(kk), 1.0);
        }
        e
    }

    fn variances(&self, h: &SlotHyperParams) -> Result<Vec<f64>> {
        let s: Vec<f64> = self.d.iter().map(|&dj| 1.0 / h.alpha + dj / h.gamma).collect();
        if s.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::NumericalOverflow {
                alpha: h.alpha,
                gamma: h.gamma,
            });
        }
        Ok(s)
    }

    fn constant(&self) -> f64 {
        -0.5 * (self.n * self.d.len()) as f64 * LN_2PI
    }
}

/// Log marginal likelihood of the slot's successors given `hyper`.
pub fn log_evidence(obj: &EvidenceObjective, hyper: &SlotHyperParams) -> Result<f64> {
    hyper.validate(obj.k)?;
    let s = obj.variances(hyper)?;
    let half_n = 0.5 * obj.n as f64;
    let mut f = obj.constant();
    for (j, &sj) in s.iter().enumerate() {
        let e = obj.residual(j, &hyper.pi).norm_squared();
        f -= half_n * sj.ln() + 0.5 * e / sj;
    }
    finite(f, hyper)
}

fn finite(f: f64, hyper: &SlotHyperParams) -> Result<f64> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NumericalOverflow {
            alpha: hyper.alpha,
            gamma: hyper.gamma,
        })
    }
}

/// Log-evidence and its gradient with respect to
/// `(ln alpha, ln gamma, z_1..z_{K-1})`, where `pi = softmax(0, z_1, ..)`.
pub fn log_evidence_grad(obj: &EvidenceObjective, hyper: &SlotHyperParams) -> Result<(f64, Vec<f64>)> {
    hyper.validate(obj.k)?;
    let s = obj.variances(hyper)?;
    let (alpha, gamma) = (hyper.alpha, hyper.gamma);
    let half_n = 0.5 * obj.n as f64;
    let mut f = obj.constant();
    let (mut g_la, mut g_lg) = (0.0, 0.0);
    let mut g_pi = vec![0.0; obj.k];
    for (j, &sj) in s.iter().enumerate() {
        let e = obj.residual(j, &hyper.pi);
        let e2 = e.norm_squared();
        f -= half_n * sj.ln() + 0.5 * e2 / sj;
        let df_ds = -half_n / sj + 0.5 * e2 / (sj * sj);
        g_la -= df_ds / alpha;
        g_lg -= df_ds * obj.d[j] / gamma;
        let c = &obj.coords[j];
        for (kk, gp) in g_pi.iter_mut().enumerate() {
            *gp += c.column(kk).dot(&e) / sj;
        }
    }
    let f = finite(f, hyper)?;
    let mean: f64 = hyper.pi.iter().zip(&g_pi).map(|(p, g)| p * g).sum();
    let mut grad = vec![g_la, g_lg];
    grad.extend((1..obj.k).map(|l| hyper.pi[l] * (g_pi[l] - mean)));
    Ok((f, grad))
}

/// Log-evidence with its gradient and Hessian in the same coordinates as
/// [`log_evidence_grad`].
pub fn log_evidence_hessian(obj: &EvidenceObjective, hyper: &SlotHyperParams) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    hyper.validate(obj.k)?;
    let s = obj.variances(hyper)?;
    let (alpha, gamma) = (hyper.alpha, hyper.gamma);
    let k = obj.k;
    let half_n = 0.5 * obj.n as f64;
    let mut f = obj.constant();
    let (mut g_a, mut g_g) = (0.0, 0.0);
    let (mut h_aa, mut h_gg, mut h_ag) = (0.0, 0.0, 0.0);
    let mut g_pi = DVector::zeros(k);
    let mut h_api = DVector::zeros(k);
    let mut h_gpi = DVector::zeros(k);
    let mut h_pipi = DMatrix::zeros(k, k);
    for (j, &sj) in s.iter().enumerate() {
        let e = obj.residual(j, &hyper.pi);
        let e2 = e.norm_squared();
        f -= half_n * sj.ln() + 0.5 * e2 / sj;
        let f_s = -half_n / sj + 0.5 * e2 / (sj * sj);
        let f_ss = half_n / (sj * sj) - e2 / (sj * sj * sj);
        let (s_a, s_g) = (-1.0 / alpha, -obj.d[j] / gamma);
        g_a += f_s * s_a;
        g_g += f_s * s_g;
        // d2s/da2 = -s_a and d2s/dg2 = -s_g
        h_aa += f_ss * s_a * s_a - f_s * s_a;
        h_gg += f_ss * s_g * s_g - f_s * s_g;
        h_ag += f_ss * s_a * s_g;
        let rb = obj.coords[j].columns(0, k);
        let u = rb.tr_mul(&e);
        g_pi.axpy(1.0 / sj, &u, 1.0);
        h_api.axpy(-s_a / (sj * sj), &u, 1.0);
        h_gpi.axpy(-s_g / (sj * sj), &u, 1.0);
        h_pipi -= rb.tr_mul(&rb) / sj;
    }
    let f = finite(f, hyper)?;

    // chain rule through pi = softmax(0, z_1..z_{K-1})
    let pi = &hyper.pi;
    let jac = DMatrix::from_fn(k, k - 1, |r, c| {
        let l = c + 1;
        pi[r] * (if r == l { 1.0 } else { 0.0 } - pi[l])
    });
    let g_z = jac.tr_mul(&g_pi);
    let mean = pi.iter().zip(g_pi.iter()).map(|(p, g)| p * g).sum::<f64>();
    let mut h_zz = jac.tr_mul(&h_pipi) * &jac;
    for a in 0..k - 1 {
        for b in 0..k - 1 {
            let l = a + 1;
            h_zz[(a, b)] += jac[(l, b)] * (g_pi[l] - mean) - pi[l] * g_z[b];
        }
    }
    let dim = k + 1;
    let mut hess = DMatrix::zeros(dim, dim);
    hess[(0, 0)] = h_aa;
    hess[(1, 1)] = h_gg;
    hess[(0, 1)] = h_ag;
    hess[(1, 0)] = h_ag;
    let h_az = jac.tr_mul(&h_api);
    let h_gz = jac.tr_mul(&h_gpi);
    for c in 0..k - 1 {
        hess[(0, c + 2)] = h_az[c];
        hess[(c + 2, 0)] = h_az[c];
        hess[(1, c + 2)] = h_gz[c];
        hess[(c + 2, 1)] = h_gz[c];
    }
    hess.view_mut((2, 2), (k - 1, k - 1)).copy_from(&h_zz);
    let mut grad = vec![g_a, g_g];
    grad.extend(g_z.iter().copied());
    Ok((f, grad, hess))
}

/// Map search coordinates to hyperparameters.
pub fn theta_to_hyper(theta: &[f64]) -> SlotHyperParams {
    let logits: Vec<f64> = std::iter::once(0.0).chain(theta[2..].iter().copied()).collect();
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|z| (z - mx).exp()).collect();
    let total: f64 = w.iter().sum();
    SlotHyperParams {
        alpha: theta[0].exp(),
        gamma: theta[1].exp(),
        pi: w.iter().map(|v| v / total).collect(),
    }
}

/// Inverse of [`theta_to_hyper`]; zero weights map to very negative logits.
pub fn hyper_to_theta(h: &SlotHyperParams) -> Vec<f64> {
    let floor = 1e-300;
    let p0 = h.pi[0].max(floor).ln();
    let mut theta = vec![h.alpha.ln(), h.gamma.ln()];
    theta.extend(h.pi[1..].iter().map(|p| p.max(floor).ln() - p0));
    theta
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Total number of starts; the first is the deterministic initialization.
    pub restarts: usize,
    /// Standard deviation of the logit perturbation for the extra starts.
    pub logit_noise: f64,
    /// Starting noise precision; defaults to the inverse persistence error.
    pub init_alpha: Option<f64>,
    /// Starting prior precision; defaults to the starting noise precision.
    pub init_gamma: Option<f64>,
    /// Starting mixture; defaults to uniform.
    pub init_pi: Option<Vec<f64>>,
    /// Box on `ln alpha`, `ln gamma` and the logits.
    pub log_bound: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            restarts: 3,
            logit_noise: 1.0,
            init_alpha: None,
            init_gamma: None,
            init_pi: None,
            log_bound: 50.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.log_bound > 0.0) || !(self.logit_noise >= 0.0) {
            return Err(Error::Config(
                "grad_tol, log_bound must be positive and logit_noise non-negative".into(),
            ));
        }
        for (name, v) in [("init_alpha", self.init_alpha), ("init_gamma", self.init_gamma)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(pi) = &self.init_pi {
            crate::graph::kernels::validate_simplex(pi, k).map_err(|e| Error::Config(e.to_string()))?;
            if pi.iter().any(|&p| p <= 0.0) {
                return Err(Error::Config("init_pi must be strictly positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hyper: SlotHyperParams,
    pub log_evidence: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the projected gradient of the per-observation
    /// log-evidence at the returned point.
    pub grad_norm: f64,
}

/// Maximize the log-evidence of one slot from several starts and keep the best.
pub fn fit_slot(obj: &EvidenceObjective, cfg: &OptimizerConfig, seed: u64, slot: usize) -> Result<FitResult> {
    let k = obj.k;
    let alpha0 = cfg.init_alpha.unwrap_or(obj.init_alpha);
    let start = SlotHyperParams {
        alpha: alpha0,
        gamma: cfg.init_gamma.unwrap_or(alpha0),
        pi: cfg.init_pi.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]),
    };
    let bound = cfg.log_bound;
    let mut theta0 = hyper_to_theta(&start);
    theta0.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
    let lo = vec![-bound; obj.dim()];
    let hi = vec![bound; obj.dim()];
    let lcfg = LbfgsConfig {
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
        ..Default::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot as u64);
    let noise = Normal::new(0.0, cfg.logit_noise).map_err(|e| Error::Config(e.to_string()))?;

    // per-observation scale keeps grad_tol meaningful for any N and m
    let scale = 1.0 / (obj.n * obj.num_days()).max(1) as f64;
    let objective = |theta: &[f64]| {
        let h = theta_to_hyper(theta);
        log_evidence_grad(obj, &h)
            .ok()
            .map(|(f, g)| (-f * scale, g.into_iter().map(|v| -v * scale).collect()))
    };
    let objective_hess = |theta: &[f64]| {
        let h = theta_to_hyper(theta);
        log_evidence_hessian(obj, &h)
            .ok()
            .map(|(f, g, hs)| (-f * scale, g.into_iter().map(|v| -v * scale).collect(), hs * -scale))
    };

    let mut best: Option<FitResult> = None;
    for r in 0..cfg.restarts {
        let mut x0 = theta0.clone();
        if r > 0 {
            for z in x0[2..].iter_mut() {
                *z = (*z + noise.sample(&mut rng)).clamp(-bound, bound);
            }
        }
        let Some(mut res) = minimize(objective, &x0, &lo, &hi, &lcfg) else {
            continue;
        };
        if !res.converged {
            // the mixture directions can be very badly conditioned; finish with Newton steps
            if let Some(polished) = newton(objective_hess, &res.x, &lo, &hi, &lcfg) {
                if polished.f <= res.f {
                    res = LbfgsResult {
                        iterations: res.iterations + polished.iterations,
                        ..polished
                    };
                }
            }
        }
        let candidate = FitResult {
            hyper: theta_to_hyper(&res.x),
            log_evidence: -res.f / scale,
            converged: res.converged,
            iterations: res.iterations,
            grad_norm: res.grad_norm,
        };
        if best.as_ref().is_none_or(|b| candidate.log_evidence > b.log_evidence) {
            best = Some(candidate);
        }
    }
    let best = best.ok_or(Error::NumericalOverflow {
        alpha: start.alpha,
        gamma: start.gamma,
    })?;
    if !best.converged {
        log::warn!(
            "slot {slot}: evidence search stopped after {} iterations (gradient norm {:.2e})",
            best.iterations,
            best.grad_norm
        );
    }
    Ok(best)
}
