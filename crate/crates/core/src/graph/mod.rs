//! Sensor graph construction and heat-diffusion kernels.
//!
//! Distances become Gaussian edge weights `exp(-d^2 / sigma^2)` below a
//! threshold `kappa`; the combinatorial Laplacian `L = diag(W 1) - W` is
//! diagonalised once and every heat kernel `exp(-tau L)` is formed from the
//! cached eigenpairs.

pub(crate) mod kernels;
mod shortest;

pub use kernels::{build_grid, extreme_taus, mix_kernels, tau_candidates, DiffusionGrid};
pub use shortest::{all_pairs_shortest, DirectedEdge, DistanceTable};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues at or below this are treated as zero when testing connectivity.
pub const CONNECTIVITY_TOL: f64 = 1e-10;

/// Graph and diffusion-grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Distance threshold in meters; `None` picks the smallest distance
    /// percentile that connects the graph and doubles it.
    pub kappa: Option<f64>,
    /// Gaussian kernel width in meters; `None` uses the standard deviation
    /// of the below-threshold distances.
    pub sigma: Option<f64>,
    /// Tolerance defining the near-identity and near-averaging kernels.
    pub epsilon: f64,
    /// Number of diffusion periods in the grid.
    pub num_periods: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            kappa: None,
            sigma: None,
            epsilon: 0.01,
            num_periods: 5,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kappa {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::Config(format!("kappa must be positive, got {k}")));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.num_periods < 2 {
            return Err(Error::Config(format!(
                "need at least 2 diffusion periods, got {}",
                self.num_periods
            )));
        }
        Ok(())
    }
}

/// Undirected weighted sensor graph with its Laplacian spectrum.
#[derive(Debug, Clone)]
pub struct SensorGraph {
    pub weights: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    /// Ascending, clamped at zero.
    pub eigvals: DVector<f64>,
    /// Orthonormal columns matching `eigvals`.
    pub eigvecs: DMatrix<f64>,
    /// Threshold actually used (meters).
    pub kappa: f64,
    /// Kernel width actually used (meters).
    pub sigma: f64,
}

impl SensorGraph {
    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Algebraic connectivity (second-smallest Laplacian eigenvalue).
    pub fn lambda2(&self) -> f64 {
        self.eigvals[1]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals[self.len() - 1]
    }

    /// `exp(-tau L)` from the cached eigenpairs.
    pub fn heat_kernel(&self, tau: f64) -> DMatrix<f64> {
        let mut scaled = self.eigvecs.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= (-tau * self.eigvals[j]).exp();
        }
        &scaled * self.eigvecs.transpose()
    }
}

fn finite_upper_distances(dist: &DMatrix<f64>) -> Vec<f64> {
    let n = dist.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[(i, j)];
            if d.is_finite() && d > 0.0 {
                out.push(d);
            }
        }
    }
    out
}

fn connected_below(dist: &DMatrix<f64>, kappa: f64) -> bool {
    let n = dist.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[(i, j)];
            if d > 0.0 && d <= kappa {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                    components -= 1;
                }
            }
        }
    }
    components == 1
}

/// Default threshold: smallest distance percentile that connects the graph, doubled.
pub fn default_kappa(dist: &DMatrix<f64>) -> Result<f64> {
    let mut d = finite_upper_distances(dist);
    if d.is_empty() {
        return Err(Error::DisconnectedGraph { lambda2: 0.0 });
    }
    d.sort_by(f64::total_cmp);
    for pct in 1..=100usize {
        // nearest-rank percentile
        let rank = ((pct as f64 / 100.0) * d.len() as f64).ceil().max(1.0) as usize;
        let cand = d[rank - 1];
        if connected_below(dist, cand) {
            return Ok(2.0 * cand);
        }
    }
    Err(Error::DisconnectedGraph { lambda2: 0.0 })
}

fn auto_sigma(dist: &DMatrix<f64>, kappa: f64) -> Result<f64> {
    let d: Vec<f64> = finite_upper_distances(dist)
        .into_iter()
        .filter(|&x| x <= kappa)
        .collect();
    if d.is_empty() {
        return Err(Error::DisconnectedGraph { lambda2: 0.0 });
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
    let sd = var.sqrt();
    // all edges the same length: fall back to that length
    Ok(if sd > 1e-12 * mean { sd } else { mean })
}

/// Builds the Gaussian-weighted graph, its Laplacian and eigenpairs.
pub fn build_graph(dist: &DMatrix<f64>, cfg: &GraphConfig) -> Result<SensorGraph> {
    cfg.validate()?;
    let n = dist.nrows();
    if n < 2 || dist.ncols() != n {
        return Err(Error::Validation(format!(
            "distance matrix must be square with N >= 2, got {}x{}",
            n,
            dist.ncols()
        )));
    }
    for i in 0..n {
        if dist[(i, i)] != 0.0 {
            return Err(Error::Validation(format!("nonzero diagonal distance at {i}")));
        }
        for j in 0..i {
            let (a, b) = (dist[(i, j)], dist[(j, i)]);
            if a.is_nan() || a < 0.0 || !(a == b || (a - b).abs() <= 1e-9 * a.abs().max(1.0)) {
                return Err(Error::Validation(format!(
                    "distance matrix not symmetric nonnegative at ({i},{j})"
                )));
            }
        }
    }

    let kappa = match cfg.kappa {
        Some(k) => k,
        None => default_kappa(dist)?,
    };
    let sigma = match cfg.sigma {
        Some(s) => s,
        None => auto_sigma(dist, kappa)?,
    };

    let weights = DMatrix::from_fn(n, n, |i, j| {
        let d = dist[(i, j)];
        if i != j && d > 0.0 && d <= kappa {
            (-(d * d) / (sigma * sigma)).exp()
        } else {
            0.0
        }
    });
    let degree = DVector::from_iterator(n, weights.row_iter().map(|r| r.sum()));
    let laplacian = DMatrix::from_diagonal(&degree) - &weights;

    let eig = SymmetricEigen::new(laplacian.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigvals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k].max(0.0)));
    let eigvecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

    let lambda2 = eigvals[1];
    if lambda2 <= CONNECTIVITY_TOL {
        return Err(Error::DisconnectedGraph { lambda2 });
    }
    Ok(SensorGraph {
        weights,
        laplacian,
        eigvals,
        eigvecs,
        kappa,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn cfg(kappa: f64, sigma: f64) -> GraphConfig {
        GraphConfig {
            kappa: Some(kappa),
            sigma: Some(sigma),
            ..Default::default()
        }
    }

    /// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric method).
    fn sym3_eigvals(a: &DMatrix<f64>) -> [f64; 3] {
        let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let q = (a[(0, 0)] + a[(1, 1)] + a[(2, 2)]) / 3.0;
        let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = (a - DMatrix::identity(3, 3) * q) / p;
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut v = [e1, e2, e3];
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn two_node_closed_form() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 50.0, 50.0, 0.0]);
        let g = build_graph(&d, &cfg(100.0, 50.0)).unwrap();
        let w = (-1.0f64).exp();
        assert!((g.weights[(0, 1)] - w).abs() < 1e-15);
        assert_eq!(g.weights[(0, 0)], 0.0);
        assert!(g.eigvals[0].abs() < 1e-12);
        assert!((g.eigvals[1] - 2.0 / E).abs() < 1e-12);
    }

    #[test]
    fn all_beyond_threshold_is_disconnected() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 500.0, 500.0, 0.0]);
        assert!(matches!(
            build_graph(&d, &cfg(100.0, 50.0)),
            Err(Error::DisconnectedGraph { .. })
        ));
    }

    #[test]
    fn path_graph_matches_closed_form_eigensolve() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
        let g = build_graph(&d, &cfg(1.5, 1.0)).unwrap();
        let oracle = sym3_eigvals(&g.laplacian);
        let w = 1.0 / E;
        let expected = [0.0, w, 3.0 * w];
        for k in 0..3 {
            assert!((g.eigvals[k] - oracle[k].max(0.0)).abs() < 1e-12);
            assert!((g.eigvals[k] - expected[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_eigvecs_orthonormal() {
        let d = DMatrix::from_fn(6, 6, |i, j| (i as f64 - j as f64).abs() * 120.0);
        let g = build_graph(&d, &cfg(300.0, 150.0)).unwrap();
        for r in g.laplacian.row_iter() {
            assert!(r.sum().abs() <= 1e-10);
        }
        let vtv = g.eigvecs.transpose() * &g.eigvecs;
        assert!((vtv - DMatrix::identity(6, 6)).amax() < 1e-10);
        assert!(g.eigvals.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn auto_sigma_is_std_of_edges() {
        // edges 1 and 3 (the 4 is above kappa)
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 4.0, 1.0, 0.0, 3.0, 4.0, 3.0, 0.0]);
        let g = build_graph(
            &d,
            &GraphConfig {
                kappa: Some(3.5),
                sigma: None,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((g.sigma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_kappa_connects_then_doubles() {
        let d = DMatrix::from_fn(5, 5, |i, j| (i as f64 - j as f64).abs() * 10.0);
        // neighbours at 10 m connect the chain
        assert_eq!(default_kappa(&d).unwrap(), 20.0);
        let g = build_graph(&d, &GraphConfig::default()).unwrap();
        assert_eq!(g.kappa, 20.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        for bad in [
            GraphConfig {
                epsilon: 1.0,
                ..cfg(2.0, 1.0)
            },
            GraphConfig {
                num_periods: 1,
                ..cfg(2.0, 1.0)
            },
            cfg(-1.0, 1.0),
            cfg(2.0, 0.0),
        ] {
            assert!(matches!(build_graph(&d, &bad), Err(Error::Config(_))));
        }
    }
}
