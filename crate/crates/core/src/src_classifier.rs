//! Sparse-representation classification.
//!
//! Training samples are stacked as dictionary columns grouped by class. A test
//! sample is projected, written as a sparse combination of the projected
//! columns by ℓ1 minimisation, and assigned to the class whose columns alone
//! reconstruct it with the smallest residual.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::projection::ProjectionMatrix;
use crate::solver::{basis_pursuit, LinearSystem, SparseSolution, DEFAULT_MAX_ITER};

/// Default residual tolerance used when classifying noisy sensor samples.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-4;

/// Column-stacked training samples with unit-norm columns.
#[derive(Debug, Clone)]
pub struct Dictionary {
    matrix: DMatrix<f64>,
    class_of_column: Vec<usize>,
    class_count: usize,
    column_norms: Vec<f64>,
}

impl Dictionary {
    /// Normalised columns, `n × N`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Columns rescaled back to the original samples.
    pub fn raw_matrix(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        for (mut c, &norm) in m.column_iter_mut().zip(&self.column_norms) {
            c *= norm;
        }
        m
    }

    pub fn class_of_column(&self) -> &[usize] {
        &self.class_of_column
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }
}

/// One column per training sample, in dataset order, normalised to unit ℓ2
/// norm. A zero sample is rejected.
pub fn build_dictionary(train: &Dataset) -> Result<Dictionary> {
    let mut matrix = train.feature_columns();
    let mut column_norms = Vec::with_capacity(train.len());
    for (i, mut c) in matrix.column_iter_mut().enumerate() {
        let norm = c.norm();
        if norm == 0.0 {
            return Err(Error::data(format!("training sample {i} has zero norm")));
        }
        c /= norm;
        column_norms.push(norm);
    }
    Ok(Dictionary {
        matrix,
        class_of_column: train.labels(),
        class_count: train.class_count(),
        column_norms,
    })
}

/// Where column normalisation happens relative to projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeOrder {
    /// Project raw samples, then normalise projected columns.
    #[default]
    AfterProjection,
    /// Project the unit-norm dictionary columns as they are.
    BeforeProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrcDecision {
    pub predicted_class: usize,
    pub per_class_residuals: Vec<f64>,
    pub solution: SparseSolution,
}

/// A dictionary and projection prepared for repeated classification.
#[derive(Debug, Clone)]
pub struct SrcClassifier {
    projection: ProjectionMatrix,
    projected: DMatrix<f64>,
    class_of_column: Vec<usize>,
    class_count: usize,
    order: NormalizeOrder,
    tol: f64,
    max_iter: usize,
}

impl SrcClassifier {
    pub fn new(dict: &Dictionary, projection: ProjectionMatrix, order: NormalizeOrder, tol: f64) -> Result<Self> {
        if projection.n() != dict.dim() {
            return Err(Error::param(format!(
                "projection expects dimension {} but dictionary has {}",
                projection.n(),
                dict.dim()
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::param(format!("tol must be positive, got {tol}")));
        }
        let projected = match order {
            NormalizeOrder::BeforeProjection => projection.project_columns(dict.matrix())?,
            NormalizeOrder::AfterProjection => {
                let mut p = projection.project_columns(&dict.raw_matrix())?;
                for mut c in p.column_iter_mut() {
                    let norm = c.norm();
                    if norm > 0.0 {
                        c /= norm;
                    }
                }
                p
            }
        };
        Ok(Self {
            projection,
            projected,
            class_of_column: dict.class_of_column().to_vec(),
            class_count: dict.class_count(),
            order,
            tol,
            max_iter: DEFAULT_MAX_ITER,
        })
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.projection
    }

    pub fn order(&self) -> NormalizeOrder {
        self.order
    }

    /// The effective sensing matrix `R·A` (with the chosen normalisation).
    pub fn projected_dictionary(&self) -> &DMatrix<f64> {
        &self.projected
    }

    pub fn classify(&self, y: &[f64]) -> Result<SrcDecision> {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::data("test sample contains non-finite values"));
        }
        let mut ry = self.projection.project_slice(y)?;
        let norm = ry.norm();
        if norm == 0.0 {
            return Err(Error::data("test sample projects to zero"));
        }
        ry /= norm;

        let sys = LinearSystem::new(&self.projected, &ry)?;
        let solution = basis_pursuit(sys, self.tol, self.max_iter)?;
        let per_class_residuals = self.class_residuals(&ry, &solution.coeffs);
        let predicted_class = argmin_first(&per_class_residuals);
        Ok(SrcDecision {
            predicted_class,
            per_class_residuals,
            solution,
        })
    }

    /// `‖ŷ − P·δ_i(x)‖₂` for every class `i`.
    fn class_residuals(&self, ry: &DVector<f64>, x: &DVector<f64>) -> Vec<f64> {
        let mut recon = vec![DVector::<f64>::zeros(ry.len()); self.class_count];
        for (j, &coef) in x.iter().enumerate() {
            if coef != 0.0 {
                recon[self.class_of_column[j]].axpy(coef, &self.projected.column(j), 1.0);
            }
        }
        recon.into_iter().map(|r| (ry - r).norm()).collect()
    }

    /// Sum of the per-class reconstructions `P·δ_i(x)`; equals `P·x`.
    pub fn class_reconstructions(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let rows = self.projected.nrows();
        let mut recon = vec![DVector::<f64>::zeros(rows); self.class_count];
        for (j, &coef) in x.iter().enumerate() {
            if coef != 0.0 {
                recon[self.class_of_column[j]].axpy(coef, &self.projected.column(j), 1.0);
            }
        }
        recon
    }
}

/// One-shot classification; prefer [`SrcClassifier`] for many test samples.
pub fn classify(dict: &Dictionary, projection: &ProjectionMatrix, y: &[f64], tol: f64) -> Result<SrcDecision> {
    SrcClassifier::new(dict, projection.clone(), NormalizeOrder::default(), tol)?.classify(y)
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in v.iter().enumerate() {
        if r < v[best] {
            best = i;
        }
    }
    best
}
