//! Sequential minimal optimisation for the box-constrained dual
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  yᵀα = 0,  0 ≤ α_t ≤ C_t,  y_t ∈ {±1}
//! ```
//!
//! with second-order working-set selection. Shared by ε-SVR and the
//! one-vs-rest SVM baseline.

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// RBF kernel `exp(−γ‖a − b‖²)`.
pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Dense symmetric RBF Gram matrix over a sample set.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    k: Vec<f64>,
}

/// Largest sample count for which a dense Gram matrix is built.
pub const MAX_KERNEL_SAMPLES: usize = 12_000;

impl KernelMatrix {
    pub fn rbf(xs: &[Vec<f64>], gamma: f64) -> Result<Self> {
        let n = xs.len();
        if n > MAX_KERNEL_SAMPLES {
            return Err(Error::param(format!(
                "{n} training samples exceed the dense kernel limit of {MAX_KERNEL_SAMPLES}"
            )));
        }
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf(&xs[i], &xs[j], gamma);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Ok(Self { n, k })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.k[i * self.n..(i + 1) * self.n]
    }
}

/// Access to `Q_ij = y_i y_j K(·,·)` for an SMO problem.
pub(crate) trait QMatrix {
    fn len(&self) -> usize;
    /// Fills `out[t] = Q_{i,t}` for all t.
    fn row_into(&self, i: usize, out: &mut [f64]);
    fn diag(&self, i: usize) -> f64;
}

pub(crate) struct SmoProblem<'a, Q: QMatrix> {
    pub q: &'a Q,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub c: f64,
    pub eps: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn solve<Q: QMatrix>(prob: SmoProblem<'_, Q>) -> SmoSolution {
    let l = prob.q.len();
    let c = prob.c;
    let y = &prob.y;
    let mut alpha = vec![0.0; l];
    let mut grad = prob.p.clone();
    let diag: Vec<f64> = (0..l).map(|i| prob.q.diag(i)).collect();
    let mut qi = vec![0.0; l];
    let mut qj = vec![0.0; l];

    let is_up = |a: f64, yt: f64| if yt > 0.0 { a < c } else { a > 0.0 };
    let is_low = |a: f64, yt: f64| if yt > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < prob.max_iter {
        // i: maximal violating index in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if is_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        prob.q.row_into(i, &mut qi);

        // j: second-order selection in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..l {
            if is_low(alpha[t], y[t]) {
                let yg = y[t] * grad[t];
                if yg >= gmax2 {
                    gmax2 = yg;
                }
                let b = gmax + yg;
                if b > 0.0 {
                    let a = diag[i] + diag[t] - 2.0 * y[i] * y[t] * qi[t];
                    let a = if a > 0.0 { a } else { TAU };
                    let o = -(b * b) / a;
                    if o <= obj_min {
                        obj_min = o;
                        j = t;
                    }
                }
            }
        }
        if gmax + gmax2 < prob.eps || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;
        prob.q.row_into(j, &mut qj);

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_ai;
        let dj = alpha[j] - old_aj;
        for t in 0..l {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    let rho = compute_rho(&alpha, &grad, y, c);
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// `Q_ij = y_i y_j K_ij` for classification.
pub(crate) struct SvcQ<'a> {
    pub k: &'a KernelMatrix,
    pub y: &'a [f64],
}

impl QMatrix for SvcQ<'_> {
    fn len(&self) -> usize {
        self.k.len()
    }

    fn row_into(&self, i: usize, out: &mut [f64]) {
        let yi = self.y[i];
        for ((o, &k), &yt) in out.iter_mut().zip(self.k.row(i)).zip(self.y) {
            *o = yi * yt * k;
        }
    }

    fn diag(&self, i: usize) -> f64 {
        self.k.get(i, i)
    }
}

/// The `2l`-variable regression dual: index `t < l` is `α_t` (sign +1),
/// index `t ≥ l` is `α*_{t−l}` (sign −1).
pub(crate) struct SvrQ<'a> {
    pub k: &'a KernelMatrix,
}

impl QMatrix for SvrQ<'_> {
    fn len(&self) -> usize {
        2 * self.k.len()
    }

    fn row_into(&self, i: usize, out: &mut [f64]) {
        let l = self.k.len();
        let si = if i < l { 1.0 } else { -1.0 };
        let row = self.k.row(i % l);
        let (pos, neg) = out.split_at_mut(l);
        for ((p, n), &k) in pos.iter_mut().zip(neg.iter_mut()).zip(row) {
            *p = si * k;
            *n = -si * k;
        }
    }

    fn diag(&self, i: usize) -> f64 {
        let l = self.k.len();
        self.k.get(i % l, i % l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_matrix_symmetric_unit_diagonal() {
        let xs = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![3.0, -2.0]];
        let k = KernelMatrix::rbf(&xs, 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(k.get(i, i), 1.0);
            for j in 0..3 {
                assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
        assert!((k.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn separable_pair_solves_to_known_dual() {
        // Two points with K_01 = e^{-γ·4}. Hard-margin dual optimum is
        // α = 2 / (2 − 2K_01) for both, with rho = 0 by symmetry.
        let xs = vec![vec![-1.0], vec![1.0]];
        let k = KernelMatrix::rbf(&xs, 0.25).unwrap();
        let y = vec![1.0, -1.0];
        let sol = solve(SmoProblem {
            q: &SvcQ { k: &k, y: &y },
            p: vec![-1.0; 2],
            y: y.clone(),
            c: 100.0,
            eps: 1e-10,
            max_iter: 1000,
        });
        let k01 = (-1.0f64).exp();
        let expected = 2.0 / (2.0 - 2.0 * k01);
        assert!(sol.converged);
        assert!((sol.alpha[0] - expected).abs() < 1e-9);
        assert!((sol.alpha[1] - expected).abs() < 1e-9);
        assert!(sol.rho.abs() < 1e-9);
    }
}
