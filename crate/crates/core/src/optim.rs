//! Box-constrained minimizers: limited-memory BFGS and a Newton refinement
//! with eigenvalue-modified Hessians.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| {
            if (xi <= l && gi > 0.0) || (xi >= h && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Two-loop recursion applied to `pg`, zeroing coordinates pinned at a bound.
fn lbfgs_direction(pg: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = pg.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter()
        .zip(pg)
        .map(|(&d, &p)| if p == 0.0 { 0.0 } else { -d })
        .collect()
}

/// Minimize `f` inside the box `[lo, hi]`.
///
/// `f` returns `None` (or a non-finite value) where the objective is undefined;
/// the line search backs off from such points.
pub fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &LbfgsConfig) -> Option<LbfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let clamp = |x: &mut [f64]| {
        for ((xi, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
            *xi = xi.clamp(l, h);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = f(&x).filter(|(v, g)| v.is_finite() && g.iter().all(|x| x.is_finite()))?;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    loop {
        let pg = projected_gradient(&x, &g, lo, hi);
        let gnorm = inf_norm(&pg);
        if gnorm < cfg.grad_tol {
            return Some(LbfgsResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations,
                converged: true,
            });
        }
        if iterations >= cfg.max_iters {
            return Some(LbfgsResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations,
                converged: false,
            });
        }
        iterations += 1;

        let mut accepted = None;
        for use_history in [true, false] {
            let (dir, mut step) = if use_history && !hist.is_empty() {
                (lbfgs_direction(&pg, &hist), 1.0)
            } else {
                (pg.iter().map(|v| -v).collect::<Vec<_>>(), 1.0 / gnorm.max(1.0))
            };
            for _ in 0..60 {
                let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                clamp(&mut xn);
                let delta: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let slope = dot(&g, &delta);
                if slope >= 0.0 {
                    if inf_norm(&delta) == 0.0 {
                        break;
                    }
                    step *= 0.5;
                    continue;
                }
                match f(&xn) {
                    Some((fv, gv)) if fv.is_finite() && gv.iter().all(|x| x.is_finite()) && fv <= fx + 1e-4 * slope => {
                        accepted = Some((xn, fv, gv, delta));
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if accepted.is_some() || hist.is_empty() {
                break;
            }
            hist.clear();
        }

        let Some((xn, fv, gv, s)) = accepted else {
            let pg = projected_gradient(&x, &g, lo, hi);
            let grad_norm = inf_norm(&pg);
            return Some(LbfgsResult {
                x,
                f: fx,
                grad_norm,
                iterations,
                converged: grad_norm < cfg.grad_tol,
            });
        };
        let y: Vec<f64> = gv.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fv;
        g = gv;
    }
}

/// Newton iterations from `x0` inside `[lo, hi]`.
///
/// Negative or tiny Hessian eigenvalues are replaced by their magnitude
/// (floored relative to the largest), so every step is a descent direction
/// even on badly conditioned or nonconvex stretches.
pub fn newton<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &LbfgsConfig) -> Option<LbfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)>,
{
    let ok = |v: &(f64, Vec<f64>, DMatrix<f64>)| v.0.is_finite() && v.1.iter().all(|x| x.is_finite());
    let mut x: Vec<f64> = x0
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.clamp(*l, *h))
        .collect();
    let (mut fx, mut g, mut hess) = f(&x).filter(ok)?;
    let mut iterations = 0;
    loop {
        let pg = projected_gradient(&x, &g, lo, hi);
        let gnorm = inf_norm(&pg);
        if gnorm < cfg.grad_tol || iterations >= cfg.max_iters {
            return Some(LbfgsResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations,
                converged: gnorm < cfg.grad_tol,
            });
        }
        iterations += 1;
        let free: Vec<usize> = (0..x.len()).filter(|&i| pg[i] != 0.0).collect();
        let sub = DMatrix::from_fn(free.len(), free.len(), |r, c| hess[(free[r], free[c])]);
        let eig = SymmetricEigen::new(sub);
        let top = eig.eigenvalues.amax();
        let floor = (top * 1e-12).max(f64::MIN_POSITIVE);
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let coef = eig.eigenvectors.tr_mul(&gf);
        let scaled = DVector::from_fn(free.len(), |i, _| coef[i] / eig.eigenvalues[i].abs().max(floor));
        let step_free = -(&eig.eigenvectors * scaled);
        let mut dir = vec![0.0; x.len()];
        for (r, &i) in free.iter().enumerate() {
            dir[i] = step_free[r];
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x
                .iter()
                .zip(&dir)
                .zip(lo.iter().zip(hi))
                .map(|((a, d), (l, h))| (a + step * d).clamp(*l, *h))
                .collect();
            let delta: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &delta);
            if slope < 0.0 {
                if let Some(v) = f(&xn).filter(ok) {
                    if v.0 <= fx + 1e-4 * slope {
                        accepted = Some((xn, v));
                        break;
                    }
                }
            } else if inf_norm(&delta) == 0.0 {
                break;
            }
            step *= 0.5;
        }
        let Some((xn, (fv, gv, hv))) = accepted else {
            return Some(LbfgsResult {
                x,
                f: fx,
                grad_norm: gnorm,
                iterations,
                converged: false,
            });
        };
        x = xn;
        fx = fv;
        g = gv;
        hess = hv;
    }
}
