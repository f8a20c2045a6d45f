//! Weighted-majority fusion of per-modality experts.
//!
//! Each expert starts at weight 1 and is multiplied by `β` whenever its local
//! prediction disagrees with the true label. Voting adds each expert's weight
//! to the bin of the class it predicts and returns the heaviest bin.

mod experiment;

pub use experiment::{
    benchmark_params, benchmark_schedule, benchmark_trace, extract_windows, run_fusion_benchmark,
    run_fusion_experiment, BenchmarkSummary, FusionConfig, FusionMode, FusionReport, ModalityReport, WindowSamples,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Modality;
use crate::svr::{svr_predict_class, SvrModel};

pub const DEFAULT_BETA: f64 = 0.5;

pub trait Expert {
    fn name(&self) -> String;
    fn predict(&self, features: &[f64]) -> Result<usize>;
}

/// Per-feature affine standardisation fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant features get scale 1.
    pub fn fit(xs: &[Vec<f64>]) -> Result<Self> {
        let first = xs.first().ok_or_else(|| Error::param("cannot standardise an empty set"))?;
        let dim = first.len();
        let n = xs.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for x in xs {
            for ((s, v), m) in scale.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// An SVR regressor on standardised features, thresholded to a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrExpert {
    pub modality: Modality,
    pub model: SvrModel,
    pub scaler: Standardizer,
    pub threshold: f64,
}

impl Expert for SvrExpert {
    fn name(&self) -> String {
        self.modality.name().to_string()
    }

    fn predict(&self, features: &[f64]) -> Result<usize> {
        svr_predict_class(&self.model, &self.scaler.apply(features), self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionPrediction {
    pub global_prediction: usize,
    /// `σ`: total weight behind each class.
    pub per_class_weight_sums: Vec<f64>,
    pub per_expert_predictions: Vec<(String, usize)>,
}

/// Expert weights and the voting rule, independent of how local predictions
/// are produced.
///
/// Each weight is held as `mantissa · 2^exponent` with the mantissa in
/// `[0.5, 1)`, so repeated down-weighting never underflows to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMajority {
    names: Vec<String>,
    mantissa: Vec<f64>,
    exponent: Vec<i64>,
    beta: f64,
    class_count: usize,
}

fn split_binary(mut m: f64) -> (f64, i64) {
    let mut e = 0i64;
    while m >= 1.0 {
        m *= 0.5;
        e += 1;
    }
    while m < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

fn pow2(e: i64) -> f64 {
    2f64.powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

impl WeightedMajority {
    pub fn new(names: Vec<String>, class_count: usize, beta: f64) -> Result<Self> {
        let w = vec![1.0; names.len()];
        Self::with_weights(names, w, class_count, beta)
    }

    pub fn with_weights(names: Vec<String>, weights: Vec<f64>, class_count: usize, beta: f64) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::param("ensemble has no experts"));
        }
        if names.len() != weights.len() {
            return Err(Error::param("one weight per expert is required"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
        }
        if class_count < 2 {
            return Err(Error::param(format!("need at least 2 classes, got {class_count}")));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::param("weights must be positive and finite"));
        }
        let (mantissa, exponent) = weights.into_iter().map(split_binary).unzip();
        Ok(Self {
            names,
            mantissa,
            exponent,
            beta,
            class_count,
        })
    }

    /// Current weights. Values below the smallest subnormal read as 0 here
    /// even though the stored weight is positive; see
    /// [`log2_weights`](Self::log2_weights).
    pub fn weights(&self) -> Vec<f64> {
        self.mantissa.iter().zip(&self.exponent).map(|(m, &e)| m * pow2(e)).collect()
    }

    pub fn log2_weights(&self) -> Vec<f64> {
        self.mantissa.iter().zip(&self.exponent).map(|(m, &e)| m.log2() + e as f64).collect()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.mantissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa.is_empty()
    }

    fn check_local(&self, local: &[usize]) -> Result<()> {
        if local.len() != self.len() {
            return Err(Error::data(format!(
                "{} local predictions for {} experts",
                local.len(),
                self.len()
            )));
        }
        if let Some(&l) = local.iter().find(|&&l| l >= self.class_count) {
            return Err(Error::data(format!("prediction {l} outside {} classes", self.class_count)));
        }
        Ok(())
    }

    fn tally(&self, local: &[usize]) -> FusionPrediction {
        let top = *self.exponent.iter().max().expect("non-empty ensemble");
        let mut sigma = vec![0.0; self.class_count];
        for ((&l, &m), &e) in local.iter().zip(&self.mantissa).zip(&self.exponent) {
            sigma[l] += m * pow2(e - top);
        }
        let mut best = 0;
        for (i, &s) in sigma.iter().enumerate() {
            if s > sigma[best] {
                best = i;
            }
        }
        let factor = pow2(top);
        FusionPrediction {
            global_prediction: best,
            per_class_weight_sums: sigma.into_iter().map(|s| s * factor).collect(),
            per_expert_predictions: self.names.iter().cloned().zip(local.iter().copied()).collect(),
        }
    }

    /// Frozen-weight vote.
    pub fn vote(&self, local: &[usize]) -> Result<FusionPrediction> {
        self.check_local(local)?;
        Ok(self.tally(local))
    }

    /// One step of the online learner: penalise wrong experts, then vote with
    /// the updated weights.
    pub fn update(&mut self, local: &[usize], truth: usize) -> Result<FusionPrediction> {
        self.check_local(local)?;
        if truth >= self.class_count {
            return Err(Error::data(format!("label {truth} outside {} classes", self.class_count)));
        }
        for ((m, e), &l) in self.mantissa.iter_mut().zip(&mut self.exponent).zip(local) {
            if l != truth {
                let (nm, de) = split_binary(*m * self.beta);
                *m = nm;
                *e += de;
            }
        }
        Ok(self.tally(local))
    }

    /// Runs [`update`](Self::update) over a stream of `(local predictions, label)`.
    pub fn learn(&mut self, stream: &[(Vec<usize>, usize)]) -> Result<Vec<FusionPrediction>> {
        stream.iter().map(|(local, truth)| self.update(local, *truth)).collect()
    }
}

/// Experts plus their weights.
#[derive(Debug, Clone)]
pub struct ExpertEnsemble<E: Expert> {
    experts: Vec<E>,
    voter: WeightedMajority,
}

impl<E: Expert> ExpertEnsemble<E> {
    pub fn new(experts: Vec<E>, class_count: usize, beta: f64) -> Result<Self> {
        let names = experts.iter().map(Expert::name).collect();
        Ok(Self {
            voter: WeightedMajority::new(names, class_count, beta)?,
            experts,
        })
    }

    pub fn from_parts(experts: Vec<E>, voter: WeightedMajority) -> Result<Self> {
        if experts.len() != voter.len() {
            return Err(Error::param("expert count differs from weight count"));
        }
        Ok(Self { experts, voter })
    }

    pub fn experts(&self) -> &[E] {
        &self.experts
    }

    pub fn voter(&self) -> &WeightedMajority {
        &self.voter
    }

    pub fn weights(&self) -> Vec<f64> {
        self.voter.weights()
    }

    fn local(&self, features: &[Vec<f64>]) -> Result<Vec<usize>> {
        if features.len() != self.experts.len() {
            return Err(Error::data(format!(
                "{} feature vectors for {} experts",
                features.len(),
                self.experts.len()
            )));
        }
        self.experts.iter().zip(features).map(|(e, f)| e.predict(f)).collect()
    }

    /// Processes labelled samples in order, updating weights after each.
    /// Returns the online global prediction for every sample.
    pub fn learn_weights(&mut self, stream: &[(Vec<Vec<f64>>, usize)]) -> Result<Vec<FusionPrediction>> {
        stream
            .iter()
            .map(|(features, truth)| {
                let local = self.local(features)?;
                self.voter.update(&local, *truth)
            })
            .collect()
    }

    /// Weighted vote with the current weights left unchanged.
    pub fn fuse_predict(&self, features: &[Vec<f64>]) -> Result<FusionPrediction> {
        self.voter.vote(&self.local(features)?)
    }

    /// Online variant: predict and update with the revealed label.
    pub fn fuse_predict_online(&mut self, features: &[Vec<f64>], truth: usize) -> Result<FusionPrediction> {
        let local = self.local(features)?;
        self.voter.update(&local, truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Replays a fixed prediction sequence, ignoring its input.
    struct Scripted {
        name: &'static str,
        script: Vec<usize>,
    }

    impl Expert for Scripted {
        fn name(&self) -> String {
            self.name.into()
        }
        fn predict(&self, f: &[f64]) -> Result<usize> {
            Ok(self.script[f[0] as usize])
        }
    }

    fn stream(labels: &[usize], experts: usize) -> Vec<(Vec<Vec<f64>>, usize)> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (vec![vec![i as f64]; experts], l))
            .collect()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    #[test]
    fn always_correct_keeps_unit_weight() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let e = Scripted { name: "a", script: labels.clone() };
        let mut ens = ExpertEnsemble::new(vec![e], 2, 0.5).unwrap();
        ens.learn_weights(&stream(&labels, 1)).unwrap();
        assert_eq!(ens.weights(), vec![1.0]);
    }

    #[test]
    fn three_mistakes_give_one_eighth() {
        let labels = vec![0, 1, 1, 0, 1, 0, 0, 1];
        let mut script = labels.clone();
        for i in [1, 4, 6] {
            script[i] = 1 - script[i];
        }
        let mut ens = ExpertEnsemble::new(vec![Scripted { name: "a", script }], 2, 0.5).unwrap();
        ens.learn_weights(&stream(&labels, 1)).unwrap();
        assert_eq!(ens.weights(), vec![0.125]);
    }

    #[test]
    fn right_versus_wrong_ratio() {
        let labels: Vec<usize> = (0..10).map(|i| (i * 3) % 2).collect();
        let right = Scripted { name: "r", script: labels.clone() };
        let wrong = Scripted { name: "w", script: labels.iter().map(|l| 1 - l).collect() };
        let mut ens = ExpertEnsemble::new(vec![right, wrong], 2, 0.5).unwrap();
        let online = ens.learn_weights(&stream(&labels, 2)).unwrap();
        let w = ens.weights();
        assert_eq!(w[0] / w[1], 1024.0);
        // Post-update weights: the wrong expert is already halved when σ is
        // accumulated, so the right one wins every vote.
        for (p, &l) in online.iter().zip(&labels) {
            assert_eq!(p.global_prediction, l);
        }
        assert_eq!(online[0].per_class_weight_sums[labels[0]], 1.0);
        assert_eq!(online[0].per_class_weight_sums[1 - labels[0]], 0.5);
    }

    #[test]
    fn voting_examples() {
        let unit = WeightedMajority::new(names(2), 2, 0.5).unwrap();
        let p = unit.vote(&[1, 1]).unwrap();
        assert_eq!(p.per_class_weight_sums, vec![0.0, 2.0]);
        assert_eq!(p.global_prediction, 1);
        assert_eq!(unit.vote(&[0, 1]).unwrap().global_prediction, 0);
        assert_eq!(unit.vote(&[1, 0]).unwrap().global_prediction, 0);
        let skew = WeightedMajority::with_weights(names(2), vec![1.0, 0.125], 2, 0.5).unwrap();
        assert_eq!(skew.vote(&[0, 1]).unwrap().global_prediction, 0);
        assert_eq!(skew.vote(&[1, 0]).unwrap().global_prediction, 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(WeightedMajority::new(vec![], 2, 0.5), Err(Error::Parameter(_))));
        assert!(WeightedMajority::new(names(2), 2, 1.0).is_err());
        assert!(WeightedMajority::new(names(2), 2, 0.0).is_err());
        let mut wm = WeightedMajority::new(names(2), 2, 0.5).unwrap();
        assert!(matches!(wm.vote(&[0]), Err(Error::Data(_))));
        assert!(wm.update(&[0, 2], 0).is_err());
        assert!(wm.update(&[0, 1], 5).is_err());
        let mut ens = ExpertEnsemble::new(vec![Scripted { name: "a", script: vec![0] }], 2, 0.5).unwrap();
        assert!(matches!(ens.learn_weights(&[(vec![], 0)]), Err(Error::Data(_))));
    }

    #[test]
    fn long_losing_streak_stays_positive() {
        let mut wm = WeightedMajority::new(names(2), 2, 0.5).unwrap();
        for _ in 0..5000 {
            wm.update(&[1, 0], 0).unwrap();
            wm.update(&[1, 1], 0).unwrap();
        }
        assert_eq!(wm.log2_weights(), vec![-10_000.0, -5_000.0]);
        assert_eq!(wm.weights(), vec![0.0, 0.0]);
        assert_eq!(wm.vote(&[1, 0]).unwrap().global_prediction, 0);
    }

    #[test]
    fn complementary_experts_online_beat_either_alone() {
        // A always says occupied, B always says unoccupied: each is perfect on
        // one class only and their errors are disjoint.
        let labels: Vec<usize> = (0..200).map(|i| usize::from((i / 7) % 2 == 0)).collect();
        let a = Scripted { name: "a", script: vec![1; 200] };
        let b = Scripted { name: "b", script: vec![0; 200] };
        let single = 0.5f64.max(labels.iter().filter(|&&l| l == 1).count() as f64 / 200.0);
        let mut ens = ExpertEnsemble::new(vec![a, b], 2, 0.5).unwrap();
        let fused = ens.learn_weights(&stream(&labels, 2)).unwrap();
        let acc = fused.iter().zip(&labels).filter(|(p, &l)| p.global_prediction == l).count() as f64 / 200.0;
        assert!(acc > single, "fused {acc} vs single {single}");
    }

    fn correctness(len: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
        prop::collection::vec(prop::collection::vec(any::<bool>(), len), 1..5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn weights_never_increase(pattern in correctness(30), labels in prop::collection::vec(0usize..3, 30)) {
            let mut wm = WeightedMajority::new(names(pattern.len()), 3, 0.5).unwrap();
            let mut prev = wm.weights();
            for (t, &l) in labels.iter().enumerate() {
                let local: Vec<usize> = pattern.iter().map(|p| if p[t] { l } else { (l + 1) % 3 }).collect();
                wm.update(&local, l).unwrap();
                let now = wm.weights();
                prop_assert!(now.iter().zip(&prev).all(|(a, b)| a <= b && *a > 0.0));
                prev = now;
            }
        }

        #[test]
        fn weights_depend_only_on_own_correctness(
            pattern in correctness(25),
            labels in prop::collection::vec(0usize..2, 25),
            rot in 0usize..5,
        ) {
            let k = pattern.len();
            let run = |order: &[usize]| {
                let mut wm = WeightedMajority::new(names(k), 2, 0.5).unwrap();
                for (t, &l) in labels.iter().enumerate() {
                    let local: Vec<usize> = order.iter().map(|&e| if pattern[e][t] { l } else { 1 - l }).collect();
                    wm.update(&local, l).unwrap();
                }
                wm.weights()
            };
            let ident: Vec<usize> = (0..k).collect();
            let mut perm = ident.clone();
            perm.rotate_left(rot % k);
            let base = run(&ident);
            let permuted = run(&perm);
            for (pos, &e) in perm.iter().enumerate() {
                prop_assert_eq!(permuted[pos], base[e]);
                let mistakes = pattern[e].iter().filter(|c| !**c).count() as i32;
                prop_assert_eq!(base[e], 0.5f64.powi(mistakes));
            }
        }

        #[test]
        fn vote_invariant_to_uniform_scaling(
            weights in prop::collection::vec(1e-3f64..10.0, 1..6),
            scale in 1e-3f64..1e3,
            local_seed in prop::collection::vec(0usize..4, 6),
        ) {
            let k = weights.len();
            let local = &local_seed[..k];
            let a = WeightedMajority::with_weights(names(k), weights.clone(), 4, 0.5).unwrap();
            let b = WeightedMajority::with_weights(names(k), weights.iter().map(|w| w * scale).collect(), 4, 0.5).unwrap();
            let pa = a.vote(local).unwrap();
            prop_assert_eq!(pa.global_prediction, b.vote(local).unwrap().global_prediction);
            let best = pa.per_class_weight_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(pa.per_class_weight_sums.iter().position(|&s| s == best), Some(pa.global_prediction));
            prop_assert!(pa.per_class_weight_sums.iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn single_expert_passes_through(w in 1e-6f64..1e6, pred in 0usize..5) {
            let wm = WeightedMajority::with_weights(names(1), vec![w], 5, 0.5).unwrap();
            prop_assert_eq!(wm.vote(&[pred]).unwrap().global_prediction, pred);
        }
    }
}
