//! Labeled datasets, the UCI HAR text layout, cross-validation folds, and the
//! synthetic desk-occupancy trace generator.

mod folds;
mod har;
mod occupancy;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{stratified_folds, stratified_folds_for_labels, stratified_holdout, Fold};
pub use har::{load_uci_har, write_uci_har, HarAxis, HarVariant, HAR_ACTIVITY_NAMES};
pub use occupancy::{
    synth_occupancy, synth_occupancy_with, synth_session, OccupancyParams, OccupancyTrace, Scenario,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub subject: Option<u32>,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self {
            features,
            label,
            subject: None,
        }
    }
}

/// An immutable, validated collection of equal-length labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    class_names: Vec<String>,
    dim: usize,
}

impl Dataset {
    /// Validates that every class in `class_names` has a sample, labels are in
    /// range, dimensions agree and all features are finite.
    pub fn new(samples: Vec<LabeledSample>, class_names: Vec<String>) -> Result<Self> {
        let class_count = class_names.len();
        if class_count < 2 {
            return Err(Error::param(format!("need at least 2 classes, got {class_count}")));
        }
        let Some(first) = samples.first() else {
            return Err(Error::data("dataset has no samples"));
        };
        let dim = first.features.len();
        if dim == 0 {
            return Err(Error::data("samples have zero features"));
        }
        let mut seen = vec![false; class_count];
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::data(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.label >= class_count {
                return Err(Error::data(format!(
                    "sample {i} has label {} but there are {class_count} classes",
                    s.label
                )));
            }
            if let Some(j) = s.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::data(format!("sample {i} feature {j} is not finite")));
            }
            seen[s.label] = true;
        }
        if let Some(c) = seen.iter().position(|&s| !s) {
            return Err(Error::data(format!("class {c} ({}) has no samples", class_names[c])));
        }
        Ok(Self {
            samples,
            class_names,
            dim,
        })
    }

    /// Like [`Dataset::new`] with classes named `"0"`, `"1"`, ...
    pub fn with_class_count(samples: Vec<LabeledSample>, class_count: usize) -> Result<Self> {
        Self::new(samples, (0..class_count).map(|c| c.to_string()).collect())
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Features as a `dim × len` matrix, one sample per column.
    pub fn feature_columns(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |r, c| self.samples[c].features[r])
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::param(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, self.class_names.clone())
    }

    /// Keeps at most `per_class` samples of each class, chosen by a seeded
    /// shuffle; original order is preserved among the kept samples.
    pub fn subsample_per_class(&self, per_class: usize, seed: u64) -> Result<Self> {
        if per_class == 0 {
            return Err(Error::param("per_class must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = Vec::new();
        for c in 0..self.class_count() {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.samples[i].label == c).collect();
            idx.shuffle(&mut rng);
            idx.truncate(per_class);
            keep.extend(idx);
        }
        keep.sort_unstable();
        self.subset(&keep)
    }
}
