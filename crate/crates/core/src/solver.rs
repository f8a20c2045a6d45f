//! Solvers for underdetermined linear systems `A x = y`.
//!
//! Three routines live here:
//!
//! * [`svd`], a sorted thin singular value decomposition,
//! * [`min_l2_solution`], the pseudo-inverse (minimum Euclidean norm) solution,
//! * [`basis_pursuit`], the minimum ℓ1-norm solution subject to
//!   `‖A x − y‖₂ ≤ tol`, computed by the ℓ1 homotopy method.
//!
//! The homotopy follows the piecewise-linear path of LASSO solutions
//! `argmin ½‖A x − y‖² + λ‖x‖₁` from `λ = ‖Aᵀy‖∞` (where `x = 0`) downwards.
//! Along each segment the active set is fixed; segments end when an inactive
//! correlation reaches `λ` (a column enters) or an active coefficient crosses
//! zero (a column leaves). The walk stops at the first point on the path whose
//! residual norm equals `tol`. By Lagrangian duality that point is the optimum
//! of the constrained ℓ1 problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default residual tolerance for [`basis_pursuit`].
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default homotopy step limit for [`basis_pursuit`].
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Borrowed, validated view of `A x = y`.
#[derive(Debug, Clone, Copy)]
pub struct LinearSystem<'a> {
    matrix: &'a DMatrix<f64>,
    rhs: &'a DVector<f64>,
}

impl<'a> LinearSystem<'a> {
    pub fn new(matrix: &'a DMatrix<f64>, rhs: &'a DVector<f64>) -> Result<Self> {
        if matrix.nrows() != rhs.len() {
            return Err(Error::param(format!(
                "matrix has {} rows but rhs has length {}",
                matrix.nrows(),
                rhs.len()
            )));
        }
        if matrix.is_empty() {
            return Err(Error::param("empty matrix"));
        }
        if !matrix.iter().all(|v| v.is_finite()) || !rhs.iter().all(|v| v.is_finite()) {
            return Err(Error::param("system contains non-finite entries"));
        }
        Ok(Self { matrix, rhs })
    }

    pub fn matrix(&self) -> &'a DMatrix<f64> {
        self.matrix
    }

    pub fn rhs(&self) -> &'a DVector<f64> {
        self.rhs
    }

    /// `‖A x − y‖₂`.
    pub fn residual_norm(&self, x: &DVector<f64>) -> f64 {
        (self.matrix * x - self.rhs).norm()
    }
}

/// Coefficients returned by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub coeffs: DVector<f64>,
    /// `‖A·coeffs − y‖₂`, recomputed from scratch after solving.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SparseSolution {
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.lp_norm(1)
    }

    /// Indices of coefficients with magnitude above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Thin SVD `M = U·diag(S)·Vt` with `S` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `rows × r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    /// `r × cols` with orthonormal rows.
    pub vt: DMatrix<f64>,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * &self.vt
    }

    /// Numerical rank: singular values above `max(rows, cols)·ε·σ₁`.
    pub fn rank(&self) -> usize {
        let Some(&top) = self.s.iter().next() else {
            return 0;
        };
        let dim = self.u.nrows().max(self.vt.ncols()) as f64;
        let cutoff = dim * f64::EPSILON * top;
        self.s.iter().filter(|&&v| v > cutoff).count()
    }
}

/// Sorted thin SVD of `m`. Equal singular values keep their original relative
/// order, so ties resolve to the first occurrence.
pub fn svd(m: &DMatrix<f64>) -> Result<SvdFactors> {
    if m.is_empty() {
        return Err(Error::param("cannot decompose an empty matrix"));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::param("matrix contains non-finite entries"));
    }
    let raw = nalgebra::SVD::try_new_unordered(m.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::data("SVD did not converge"))?;
    let (u, vt) = match (raw.u, raw.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::data("SVD did not produce singular vectors")),
    };
    let mut order: Vec<usize> = (0..raw.singular_values.len()).collect();
    order.sort_by(|&a, &b| raw.singular_values[b].total_cmp(&raw.singular_values[a]));

    let s = DVector::from_iterator(order.len(), order.iter().map(|&i| raw.singular_values[i]));
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let vt = DMatrix::from_rows(&order.iter().map(|&i| vt.row(i)).collect::<Vec<_>>());
    Ok(SvdFactors { u, s, vt })
}

/// Minimum ℓ2-norm solution `x = A⁺ y`.
///
/// `converged` is false when `y` is not in the range of `A` (beyond a relative
/// tolerance of `1e-8`); the returned `x` is then the least-squares solution
/// of minimal norm.
pub fn min_l2_solution(sys: LinearSystem<'_>) -> Result<SparseSolution> {
    let f = svd(sys.matrix)?;
    let rank = f.rank();
    let ut_y = f.u.columns(0, rank).tr_mul(sys.rhs);
    let scaled = DVector::from_iterator(rank, (0..rank).map(|i| ut_y[i] / f.s[i]));
    let coeffs = f.vt.rows(0, rank).tr_mul(&scaled);
    let residual_norm = sys.residual_norm(&coeffs);
    let converged = residual_norm <= 1e-8 * sys.rhs.norm().max(1.0);
    Ok(SparseSolution {
        coeffs,
        residual_norm,
        iterations: 1,
        converged,
    })
}

enum Breakpoint {
    Enter(usize),
    Leave(usize),
    PathEnd,
}

/// Minimum ℓ1-norm `x` with `‖A x − y‖₂ ≤ tol`, by ℓ1 homotopy.
///
/// On exhaustion of `max_iter` steps, or when the path ends without reaching
/// `tol` (y outside the range of A), the last iterate is returned with
/// `converged = false`.
pub fn basis_pursuit(sys: LinearSystem<'_>, tol: f64, max_iter: usize) -> Result<SparseSolution> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::param("max_iter must be at least 1"));
    }
    let a = sys.matrix;
    let y = sys.rhs;
    let (rows, cols) = a.shape();

    let mut x = DVector::<f64>::zeros(cols);
    let mut r = y.clone();
    if r.norm() <= tol {
        return Ok(finish(sys, x, 0, true));
    }

    let mut corr = a.tr_mul(&r);
    let (first, lambda0) = argmax_abs(&corr, |_| true);
    let mut lambda = lambda0;
    // No column correlates with y: either A = 0 or y ⟂ range(A).
    if lambda <= f64::EPSILON * y.norm() * a.norm().max(1.0) {
        return Ok(finish(sys, x, 0, false));
    }

    let mut active: Vec<usize> = vec![first];
    let mut sign: Vec<f64> = vec![corr[first].signum()];
    let mut is_active = vec![false; cols];
    is_active[first] = true;
    let mut gram = DMatrix::from_element(1, 1, a.column(first).norm_squared());
    let mut last_left: Option<usize> = None;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;

        let Some(chol) = gram.clone().cholesky() else {
            break;
        };
        let dir = chol.solve(&DVector::from_column_slice(&sign));
        let mut v = DVector::<f64>::zeros(rows);
        for (k, &j) in active.iter().enumerate() {
            v.axpy(dir[k], &a.column(j), 1.0);
        }
        let a_v = a.tr_mul(&v);

        let mut step = lambda;
        let mut event = Breakpoint::PathEnd;
        let floor = 1e-12 * lambda0;
        if active.len() < rows {
            for j in 0..cols {
                if is_active[j] {
                    continue;
                }
                // A column that just left sits exactly on the boundary; only a
                // genuine step away from it counts as re-entry.
                let min_step = if last_left == Some(j) { 1e-9 * lambda0 } else { floor };
                let (cj, aj) = (corr[j], a_v[j]);
                // Already on the boundary (ties, rounding): enter without moving.
                if last_left != Some(j) && cj.abs() >= lambda - floor {
                    step = 0.0;
                    event = Breakpoint::Enter(j);
                    break;
                }
                for g in [(lambda - cj) / (1.0 - aj), (lambda + cj) / (1.0 + aj)] {
                    if g.is_finite() && g > min_step && g < step {
                        step = g;
                        event = Breakpoint::Enter(j);
                    }
                }
            }
        }
        for (k, &j) in active.iter().enumerate() {
            if dir[k] != 0.0 {
                let g = -x[j] / dir[k];
                if g > floor && g < step {
                    step = g;
                    event = Breakpoint::Leave(k);
                }
            }
        }

        // Earliest t in (0, step] with ‖r − t·v‖ = tol. Writing r = t₀·v + p
        // with p ⟂ v gives ‖r − t·v‖² = ‖p‖² + (t − t₀)²‖v‖².
        let vv = v.norm_squared();
        if vv > 0.0 {
            let t0 = r.dot(&v) / vv;
            let perp = (&r - &v * t0).norm();
            if perp <= tol {
                let t = (t0 - ((tol * tol - perp * perp) / vv).sqrt()).max(0.0);
                if t <= step {
                    for (k, &j) in active.iter().enumerate() {
                        x[j] += t * dir[k];
                    }
                    converged = true;
                    break;
                }
            }
        }

        for (k, &j) in active.iter().enumerate() {
            x[j] += step * dir[k];
        }
        r.axpy(-step, &v, 1.0);
        corr.axpy(-step, &a_v, 1.0);
        lambda -= step;
        last_left = None;
        if r.norm() <= tol {
            converged = true;
            break;
        }

        match event {
            Breakpoint::Enter(j) => {
                let cross = DVector::from_iterator(
                    active.len(),
                    active.iter().map(|&i| a.column(i).dot(&a.column(j))),
                );
                let k = active.len();
                gram = gram.insert_row(k, 0.0).insert_column(k, 0.0);
                for i in 0..k {
                    gram[(i, k)] = cross[i];
                    gram[(k, i)] = cross[i];
                }
                gram[(k, k)] = a.column(j).norm_squared();
                active.push(j);
                sign.push(corr[j].signum());
                is_active[j] = true;
            }
            Breakpoint::Leave(k) => {
                let j = active.remove(k);
                sign.remove(k);
                x[j] = 0.0;
                is_active[j] = false;
                gram = gram.remove_row(k).remove_column(k);
                last_left = Some(j);
                if active.is_empty() {
                    break;
                }
            }
            Breakpoint::PathEnd => break,
        }
    }
    Ok(finish(sys, x, iterations, converged))
}

fn finish(sys: LinearSystem<'_>, coeffs: DVector<f64>, iterations: usize, hit_tol: bool) -> SparseSolution {
    let residual_norm = sys.residual_norm(&coeffs);
    SparseSolution {
        coeffs,
        residual_norm,
        iterations,
        converged: hit_tol,
    }
}

fn argmax_abs(v: &DVector<f64>, keep: impl Fn(usize) -> bool) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &val) in v.iter().enumerate() {
        if keep(i) && val.abs() > best.1 {
            best = (i, val.abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn unit_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
        for mut c in m.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        m
    }

    /// Minimum ℓ1 over all basic solutions (column subsets of size `rows`).
    /// For a full-row-rank system one of them is an ℓ1 optimum.
    fn brute_force_l1(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let (rows, cols) = a.shape();
        let mut best = f64::INFINITY;
        let mut subset: Vec<usize> = (0..rows).collect();
        loop {
            let sub = DMatrix::from_columns(&subset.iter().map(|&j| a.column(j)).collect::<Vec<_>>());
            if let Some(xs) = sub.lu().solve(y) {
                if xs.iter().all(|v| v.is_finite()) {
                    best = best.min(xs.lp_norm(1));
                }
            }
            // next combination
            let mut i = rows;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if subset[i] < cols - rows + i {
                    subset[i] += 1;
                    for k in i + 1..rows {
                        subset[k] = subset[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn svd_identity() {
        let f = svd(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.s.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn svd_diagonal_is_sorted_signed_permutation() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let f = svd(&m).unwrap();
        assert_relative_eq!(f.s, DVector::from_vec(vec![3.0, 2.0, 1.0]), epsilon = 1e-12);
        for c in f.u.column_iter() {
            let nz = c.iter().filter(|v| v.abs() > 1e-12).count();
            assert_eq!(nz, 1);
            assert_relative_eq!(c.amax(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(f.u[(1, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_random_wide_reconstructs() {
        let m = gaussian(10, 20, 3);
        let f = svd(&m).unwrap();
        let err = (f.reconstruct() - &m).norm() / m.norm();
        assert!(err < 1e-6, "relative reconstruction error {err}");
        let utu = f.u.tr_mul(&f.u);
        assert!((utu - DMatrix::identity(10, 10)).amax() < 1e-8);
        let vvt = &f.vt * f.vt.transpose();
        assert!((vvt - DMatrix::identity(10, 10)).amax() < 1e-8);
        assert!(f.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(f.rank(), 10);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::Parameter(_))));
    }

    #[test]
    fn min_l2_invertible_and_symmetric_cases() {
        let a = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![2.0, 3.0]);
        let sol = min_l2_solution(LinearSystem::new(&a, &y).unwrap()).unwrap();
        assert_relative_eq!(sol.coeffs, y, epsilon = 1e-12);

        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let sol = min_l2_solution(LinearSystem::new(&a, &y).unwrap()).unwrap();
        assert_relative_eq!(sol.coeffs, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-12);
        assert!(sol.converged);
    }

    #[test]
    fn min_l2_beats_null_space_perturbations() {
        let a = gaussian(5, 20, 11);
        let truth = DVector::from_fn(20, |i, _| (i as f64).sin());
        let y = &a * &truth;
        let sys = LinearSystem::new(&a, &y).unwrap();
        let sol = min_l2_solution(sys).unwrap();
        assert!(sol.converged);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = sol.coeffs.norm();
        let null = null_space(&a);
        assert_eq!(null.ncols(), 15);
        for _ in 0..100 {
            let w = DVector::from_fn(null.ncols(), |_, _| StandardNormal.sample(&mut rng));
            let alt = &sol.coeffs + &null * w;
            assert!((&a * &alt - &y).norm() < 1e-9);
            assert!(base <= alt.norm() + 1e-12);
        }
        // Orthogonal to the null space.
        assert!(null.tr_mul(&sol.coeffs).amax() < 1e-8);
    }

    fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
        // Full V from the eigenvectors of AᵀA with zero eigenvalue.
        let eig = nalgebra::SymmetricEigen::new(a.tr_mul(a));
        let cols: Vec<_> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l.abs() < 1e-9)
            .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    }

    #[test]
    fn min_l2_flags_inconsistent_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let sol = min_l2_solution(LinearSystem::new(&a, &y).unwrap()).unwrap();
        assert!(!sol.converged);
        assert_relative_eq!(sol.residual_norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bp_square_invertible_is_inverse() {
        let a = gaussian(6, 6, 2);
        let y = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), 1e-9, 1000).unwrap();
        let exact = a.clone().lu().solve(&y).unwrap();
        assert!(sol.converged);
        assert!((sol.coeffs - exact).amax() < 1e-6);
    }

    #[test]
    fn bp_zero_rhs_gives_zero() {
        let a = gaussian(4, 9, 1);
        let y = DVector::zeros(4);
        let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), DEFAULT_TOL, 10).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.coeffs, DVector::zeros(9));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn bp_zero_matrix_nonzero_rhs_fails() {
        let a = DMatrix::zeros(3, 5);
        let y = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), DEFAULT_TOL, 10).unwrap();
        assert!(!sol.converged);
    }

    #[test]
    fn bp_recovers_two_sparse_vector() {
        let a = unit_columns(gaussian(10, 30, 17));
        let mut truth = DVector::zeros(30);
        truth[4] = 1.0;
        truth[21] = -1.0;
        let y = &a * &truth;
        let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.support(1e-3), vec![4, 21]);
        assert!((sol.coeffs - truth).amax() < 1e-4);
    }

    #[test]
    fn bp_iteration_cap_reports_failure() {
        let a = unit_columns(gaussian(10, 30, 4));
        let y = DVector::from_fn(10, |i, _| (i as f64).cos());
        let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), 1e-9, 1).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn bp_rejects_bad_params() {
        let a = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let sys = LinearSystem::new(&a, &y).unwrap();
        assert!(basis_pursuit(sys, 0.0, 10).is_err());
        assert!(basis_pursuit(sys, 1e-6, 0).is_err());
    }

    #[test]
    fn bp_matches_vertex_enumeration_on_small_systems() {
        for seed in 0..30 {
            let a = gaussian(3, 7, 100 + seed);
            let y = DVector::from_fn(3, |i, _| ((seed + i as u64) as f64).sin());
            let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), 1e-10, DEFAULT_MAX_ITER).unwrap();
            assert!(sol.converged, "seed {seed}");
            let oracle = brute_force_l1(&a, &y);
            assert!(
                (sol.l1_norm() - oracle).abs() < 1e-6 * oracle.max(1.0),
                "seed {seed}: homotopy {} vs enumeration {oracle}",
                sol.l1_norm()
            );
        }
    }

    #[test]
    fn residual_norm_is_recomputed() {
        let a = unit_columns(gaussian(8, 20, 9));
        let y = DVector::from_fn(8, |i, _| i as f64 * 0.1 + 0.3);
        let sol = basis_pursuit(LinearSystem::new(&a, &y).unwrap(), 1e-3, DEFAULT_MAX_ITER).unwrap();
        let direct = (&a * &sol.coeffs - &y).norm();
        assert!((sol.residual_norm - direct).abs() <= 1e-8 * direct.max(1e-300));
        assert!(sol.residual_norm <= 1e-3 * (1.0 + 1e-9));
    }
}
