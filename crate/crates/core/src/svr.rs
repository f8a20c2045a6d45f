//! ε-insensitive support vector regression with an RBF kernel.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::stratified_folds_for_labels;
use crate::error::{Error, Result};
use crate::smo::{rbf, solve, KernelMatrix, SmoProblem, SvrQ};

/// KKT tolerance of the dual solver.
pub const KKT_TOL: f64 = 1e-3;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_GRID_C: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GRID_GAMMA: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const MAX_SMO_ITER: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α − α*` for each support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
}

/// Training-set bookkeeping for KKT checks.
#[derive(Debug, Clone)]
pub struct SvrFit {
    pub model: SvrModel,
    /// `α − α*` for every training point, zeros included.
    pub all_coeffs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_inputs(xs: &[Vec<f64>], ys: &[f64], c: f64, gamma: f64, epsilon: f64) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::param(format!("SVR needs at least 2 samples, got {}", xs.len())));
    }
    if xs.len() != ys.len() {
        return Err(Error::param(format!("{} inputs but {} targets", xs.len(), ys.len())));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("C must be positive, got {c}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let dim = xs[0].len();
    if dim == 0 || xs.iter().any(|x| x.len() != dim) {
        return Err(Error::param("inputs must share one non-zero dimension"));
    }
    if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
        return Err(Error::data(format!("target {i} is not finite")));
    }
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("inputs contain non-finite values"));
    }
    Ok(())
}

pub fn svr_train(xs: &[Vec<f64>], ys: &[f64], c: f64, gamma: f64, epsilon: f64) -> Result<SvrModel> {
    Ok(svr_fit(xs, ys, c, gamma, epsilon)?.model)
}

pub fn svr_fit(xs: &[Vec<f64>], ys: &[f64], c: f64, gamma: f64, epsilon: f64) -> Result<SvrFit> {
    check_inputs(xs, ys, c, gamma, epsilon)?;
    let k = KernelMatrix::rbf(xs, gamma)?;
    svr_fit_with_kernel(xs, ys, &k, c, gamma, epsilon)
}

fn svr_fit_with_kernel(
    xs: &[Vec<f64>],
    ys: &[f64],
    k: &KernelMatrix,
    c: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<SvrFit> {
    let l = xs.len();
    let mut p = Vec::with_capacity(2 * l);
    p.extend(ys.iter().map(|y| epsilon - y));
    p.extend(ys.iter().map(|y| epsilon + y));
    let mut y = vec![1.0; l];
    y.extend(std::iter::repeat_n(-1.0, l));
    let sol = solve(SmoProblem {
        q: &SvrQ { k },
        p,
        y,
        c,
        eps: KKT_TOL,
        max_iter: MAX_SMO_ITER,
    });
    let all_coeffs: Vec<f64> = (0..l).map(|i| sol.alpha[i] - sol.alpha[i + l]).collect();
    let (support_vectors, dual_coeffs) = all_coeffs
        .iter()
        .zip(xs)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, x)| (x.clone(), *a))
        .unzip();
    Ok(SvrFit {
        model: SvrModel {
            support_vectors,
            dual_coeffs,
            bias: -sol.rho,
            gamma,
            c,
            epsilon,
        },
        all_coeffs,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

impl SvrModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn support_count(&self) -> usize {
        self.support_vectors.len()
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// srcfuse-svr 1
    /// gamma <g>
    /// c <C>
    /// epsilon <ε>
    /// bias <b>
    /// dim <n>
    /// sv <count>
    /// <coef> <x_1> … <x_n>     (one line per support vector)
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::from("srcfuse-svr 1\n");
        writeln!(s, "gamma {}", self.gamma).unwrap();
        writeln!(s, "c {}", self.c).unwrap();
        writeln!(s, "epsilon {}", self.epsilon).unwrap();
        writeln!(s, "bias {}", self.bias).unwrap();
        writeln!(s, "dim {}", self.dim()).unwrap();
        writeln!(s, "sv {}", self.support_count()).unwrap();
        for (coef, sv) in self.dual_coeffs.iter().zip(&self.support_vectors) {
            write!(s, "{coef}").unwrap();
            for v in sv {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("srcfuse-svr 1") {
            return Err(Error::data("not an SVR model file"));
        }
        let mut field = |name: &str| -> Result<f64> {
            let line = lines.next().ok_or_else(|| Error::data(format!("missing {name}")))?;
            line.strip_prefix(name)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::data(format!("malformed {name} line: {line:?}")))
        };
        let gamma = field("gamma")?;
        let c = field("c")?;
        let epsilon = field("epsilon")?;
        let bias = field("bias")?;
        let dim = field("dim")? as usize;
        let count = field("sv")? as usize;
        let mut support_vectors = Vec::with_capacity(count);
        let mut dual_coeffs = Vec::with_capacity(count);
        for i in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::data(format!("missing support vector {i}")))?;
            let vals = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::data(format!("support vector {i}: {e}")))?;
            if vals.len() != dim + 1 {
                return Err(Error::data(format!("support vector {i} has {} values", vals.len())));
            }
            dual_coeffs.push(vals[0]);
            support_vectors.push(vals[1..].to_vec());
        }
        Ok(Self {
            support_vectors,
            dual_coeffs,
            bias,
            gamma,
            c,
            epsilon,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

pub fn svr_predict(model: &SvrModel, x: &[f64]) -> Result<f64> {
    if !model.support_vectors.is_empty() && x.len() != model.dim() {
        return Err(Error::param(format!(
            "input of dimension {} does not match model dimension {}",
            x.len(),
            model.dim()
        )));
    }
    Ok(model
        .dual_coeffs
        .iter()
        .zip(&model.support_vectors)
        .map(|(a, sv)| a * rbf(sv, x, model.gamma))
        .sum::<f64>()
        + model.bias)
}

pub fn svr_predict_class(model: &SvrModel, x: &[f64], threshold: f64) -> Result<usize> {
    Ok(class_of(svr_predict(model, x)?, threshold))
}

pub fn class_of(prediction: f64, threshold: f64) -> usize {
    usize::from(prediction >= threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub c: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
    pub cv_mse: f64,
}

/// Cross-validated grid search over `(C, γ)` for 0/1 targets. Cells are
/// ranked by thresholded accuracy, then by mean squared error, then by grid
/// order.
pub fn grid_search(
    xs: &[Vec<f64>],
    labels: &[usize],
    grid_c: &[f64],
    grid_gamma: &[f64],
    epsilon: f64,
    folds: usize,
    seed: u64,
) -> Result<(GridResult, Vec<GridResult>)> {
    if grid_c.is_empty() || grid_gamma.is_empty() {
        return Err(Error::param("empty hyperparameter grid"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::param("grid search expects binary labels"));
    }
    let split = stratified_folds_for_labels(labels, 2, folds, seed)?;
    let ys: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mut cells = Vec::new();
    for &gamma in grid_gamma {
        for &c in grid_c {
            let mut correct = 0usize;
            let mut sq = 0.0;
            for fold in &split {
                let tx: Vec<Vec<f64>> = fold.train.iter().map(|&i| xs[i].clone()).collect();
                let ty: Vec<f64> = fold.train.iter().map(|&i| ys[i]).collect();
                let model = svr_train(&tx, &ty, c, gamma, epsilon)?;
                for &i in &fold.validation {
                    let p = svr_predict(&model, &xs[i])?;
                    sq += (p - ys[i]).powi(2);
                    correct += usize::from(class_of(p, DEFAULT_THRESHOLD) == labels[i]);
                }
            }
            cells.push(GridResult {
                c,
                gamma,
                cv_accuracy: correct as f64 / xs.len() as f64,
                cv_mse: sq / xs.len() as f64,
            });
        }
    }
    let mut best = 0;
    for (i, cell) in cells.iter().enumerate() {
        let b = &cells[best];
        if cell.cv_accuracy > b.cv_accuracy || (cell.cv_accuracy == b.cv_accuracy && cell.cv_mse < b.cv_mse) {
            best = i;
        }
    }
    Ok((cells[best].clone(), cells))
}
