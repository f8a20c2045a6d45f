//! k-nearest-neighbour and one-vs-rest RBF SVM baselines.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::projection::ProjectionMatrix;
use crate::smo::{rbf, solve, KernelMatrix, SmoProblem, SvcQ};
use crate::svr::KKT_TOL;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_SVM_C: f64 = 1.0;
const MAX_SMO_ITER: usize = 10_000_000;

/// Majority label among the `k` nearest training samples (Euclidean).
/// Distance ties go to the smaller sample index, vote ties to the smaller
/// class index.
pub fn knn_classify(train: &Dataset, y: &[f64], k: usize) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::param("empty training set"));
    }
    if k == 0 || k > train.len() {
        return Err(Error::param(format!("k must be in 1..={}, got {k}", train.len())));
    }
    if y.len() != train.dim() {
        return Err(Error::param(format!(
            "sample dimension {} does not match training dimension {}",
            y.len(),
            train.dim()
        )));
    }
    let mut dist: Vec<(f64, usize)> = train
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d: f64 = s.features.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, cmp);
    }
    let mut votes = vec![0usize; train.class_count()];
    for &(_, i) in &dist[..k] {
        votes[train.samples()[i].label] += 1;
    }
    Ok(argmax_first(&votes))
}

fn argmax_first<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BinarySvm {
    coeffs: Vec<f64>,
    sv_index: Vec<usize>,
    bias: f64,
}

/// One-vs-rest RBF SVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    support: Vec<Vec<f64>>,
    machines: Vec<BinarySvm>,
    pub c: f64,
    pub gamma: f64,
    dim: usize,
}

pub fn svm_train(train: &Dataset, c: f64, gamma: f64) -> Result<SvmModel> {
    if !(c > 0.0 && c.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("C and gamma must be positive, got C = {c}, gamma = {gamma}")));
    }
    let counts = train.class_counts();
    if counts.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::param("SVM training needs at least two populated classes"));
    }
    let xs: Vec<Vec<f64>> = train.samples().iter().map(|s| s.features.clone()).collect();
    let k = KernelMatrix::rbf(&xs, gamma)?;
    let labels = train.labels();
    let mut machines = Vec::with_capacity(train.class_count());
    let mut used = vec![false; xs.len()];
    for class in 0..train.class_count() {
        let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let sol = solve(SmoProblem {
            q: &SvcQ { k: &k, y: &y },
            p: vec![-1.0; xs.len()],
            y: y.clone(),
            c,
            eps: KKT_TOL,
            max_iter: MAX_SMO_ITER,
        });
        let mut coeffs = Vec::new();
        let mut sv_index = Vec::new();
        for (i, (&a, &yi)) in sol.alpha.iter().zip(&y).enumerate() {
            if a != 0.0 {
                coeffs.push(a * yi);
                sv_index.push(i);
                used[i] = true;
            }
        }
        machines.push(BinarySvm {
            coeffs,
            sv_index,
            bias: -sol.rho,
        });
    }
    // Compact the shared support set.
    let mut remap = vec![usize::MAX; xs.len()];
    let mut support = Vec::new();
    for (i, x) in xs.into_iter().enumerate() {
        if used[i] {
            remap[i] = support.len();
            support.push(x);
        }
    }
    for m in &mut machines {
        for idx in &mut m.sv_index {
            *idx = remap[*idx];
        }
    }
    Ok(SvmModel {
        support,
        machines,
        c,
        gamma,
        dim: train.dim(),
    })
}

impl SvmModel {
    /// One decision value per class.
    pub fn decision_values(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim {
            return Err(Error::param(format!(
                "sample dimension {} does not match model dimension {}",
                y.len(),
                self.dim
            )));
        }
        let kv: Vec<f64> = self.support.iter().map(|s| rbf(s, y, self.gamma)).collect();
        Ok(self
            .machines
            .iter()
            .map(|m| m.coeffs.iter().zip(&m.sv_index).map(|(a, &i)| a * kv[i]).sum::<f64>() + m.bias)
            .collect())
    }

    pub fn support_count(&self) -> usize {
        self.support.len()
    }
}

pub fn svm_classify(model: &SvmModel, y: &[f64]) -> Result<usize> {
    Ok(argmax_first(&model.decision_values(y)?))
}

/// `1 / n`.
pub fn default_gamma(dim: usize) -> f64 {
    1.0 / dim as f64
}

/// Applies `R` to every sample; labels and subjects are kept.
pub fn project_dataset(r: &ProjectionMatrix, ds: &Dataset) -> Result<Dataset> {
    let projected = r.project_columns(&ds.feature_columns())?;
    let samples = ds
        .samples()
        .iter()
        .zip(projected.column_iter())
        .map(|(s, col)| {
            let mut out = s.clone();
            out.features = col.iter().copied().collect();
            out
        })
        .collect();
    Dataset::new(samples, ds.class_names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(points: &[(&[f64], usize)], classes: usize) -> Dataset {
        Dataset::with_class_count(
            points.iter().map(|(f, l)| LabeledSample::new(f.to_vec(), *l)).collect(),
            classes,
        )
        .unwrap()
    }

    fn blobs(seed: u64, classes: usize, per_class: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..classes * per_class)
            .map(|i| {
                let c = i % classes;
                let angle = c as f64 * std::f64::consts::TAU / classes as f64;
                let f = vec![
                    4.0 * angle.cos() + rng.gen_range(-0.8..0.8),
                    4.0 * angle.sin() + rng.gen_range(-0.8..0.8),
                ];
                LabeledSample::new(f, c)
            })
            .collect();
        Dataset::with_class_count(samples, classes).unwrap()
    }

    #[test]
    fn knn_single_neighbour() {
        let train = ds(&[(&[0.0, 0.0], 0), (&[10.0, 10.0], 1)], 2);
        assert_eq!(knn_classify(&train, &[1.0, 1.0], 1).unwrap(), 0);
        assert_eq!(knn_classify(&train, &[9.0, 9.0], 1).unwrap(), 1);
    }

    #[test]
    fn knn_vote_tie_goes_to_lower_class() {
        let train = ds(&[(&[1.0], 1), (&[-1.0], 0), (&[5.0], 1)], 2);
        assert_eq!(knn_classify(&train, &[0.0], 2).unwrap(), 0);
    }

    #[test]
    fn knn_distance_tie_goes_to_lower_index() {
        // Both neighbours at distance 1; the first listed wins the k = 1 slot.
        let train = ds(&[(&[1.0], 1), (&[-1.0], 0)], 2);
        assert_eq!(knn_classify(&train, &[0.0], 1).unwrap(), 1);
        let train = ds(&[(&[-1.0], 0), (&[1.0], 1)], 2);
        assert_eq!(knn_classify(&train, &[0.0], 1).unwrap(), 0);
    }

    #[test]
    fn knn_errors() {
        let train = ds(&[(&[0.0], 0), (&[1.0], 1)], 2);
        assert!(knn_classify(&train, &[0.0], 0).is_err());
        assert!(knn_classify(&train, &[0.0], 3).is_err());
        assert!(knn_classify(&train, &[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn svm_separates_blobs() {
        let train = blobs(1, 2, 30);
        let model = svm_train(&train, 10.0, 0.5).unwrap();
        for s in train.samples() {
            assert_eq!(svm_classify(&model, &s.features).unwrap(), s.label);
        }
    }

    #[test]
    fn svm_multiclass_generalises() {
        let train = blobs(2, 4, 25);
        let test = blobs(3, 4, 25);
        let model = svm_train(&train, DEFAULT_SVM_C, default_gamma(2)).unwrap();
        let correct = test
            .samples()
            .iter()
            .filter(|s| svm_classify(&model, &s.features).unwrap() == s.label)
            .count();
        assert!(correct >= 95, "{correct}/100");
    }

    #[test]
    fn svm_rejects_single_class_and_bad_params() {
        let single = Dataset::with_class_count(
            vec![LabeledSample::new(vec![0.0], 0), LabeledSample::new(vec![1.0], 0)],
            1,
        );
        assert!(matches!(single, Err(Error::Parameter(_))));
        let two = blobs(0, 2, 5);
        assert!(svm_train(&two, 0.0, 1.0).is_err());
        assert!(svm_train(&two, 1.0, -1.0).is_err());
    }

    #[test]
    fn projecting_a_dataset_keeps_labels() {
        let train = blobs(4, 3, 4);
        let r = ProjectionMatrix::identity(2);
        let p = project_dataset(&r, &train).unwrap();
        assert_eq!(p.labels(), train.labels());
        assert_eq!(p.samples()[3].features, train.samples()[3].features);
    }
}
