//! Occupancy estimation from one accelerometer axis and audio zero crossings,
//! single-modality and fused.

use serde::{Deserialize, Serialize};

use super::{ExpertEnsemble, FusionPrediction, Standardizer, SvrExpert, WeightedMajority, DEFAULT_BETA};
use crate::dataset::{stratified_folds_for_labels, stratified_holdout, synth_session, OccupancyParams, OccupancyTrace, Scenario};
use crate::error::{Error, Result};
use crate::features::{accel_feature, audio_zero_crossings, AccelStat, Modality};
use crate::metrics::Confusion;
use crate::svr::{
    grid_search, svr_predict_class, svr_train, SvrModel, DEFAULT_EPSILON, DEFAULT_GRID_C, DEFAULT_GRID_GAMMA,
    DEFAULT_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Weights learned by cross-validation, then fixed for testing.
    #[default]
    Frozen,
    /// Weights keep updating on test samples as labels are revealed.
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub accel_axis: Modality,
    pub accel_stat: AccelStat,
    pub accel_segment_s: f64,
    pub window_s: f64,
    pub folds: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub threshold: f64,
    pub grid_c: Vec<f64>,
    pub grid_gamma: Vec<f64>,
    pub test_fraction: f64,
    pub mode: FusionMode,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            accel_axis: Modality::AccelZ,
            accel_stat: AccelStat::MaxMagnitude,
            accel_segment_s: 1.0,
            window_s: 5.0,
            folds: 5,
            beta: DEFAULT_BETA,
            epsilon: DEFAULT_EPSILON,
            threshold: DEFAULT_THRESHOLD,
            grid_c: DEFAULT_GRID_C.to_vec(),
            grid_gamma: DEFAULT_GRID_GAMMA.to_vec(),
            test_fraction: 0.3,
            mode: FusionMode::Frozen,
            seed: 0,
        }
    }
}

/// One sample per audio window: the accelerometer statistics of the
/// segments inside it, its zero-crossing count, and its label. Windows whose
/// seconds carry mixed labels are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSamples {
    pub accel: Vec<Vec<f64>>,
    pub audio: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl WindowSamples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn features(&self, modality_index: usize) -> &[Vec<f64>] {
        if modality_index == 0 {
            &self.accel
        } else {
            &self.audio
        }
    }
}

pub fn extract_windows(trace: &OccupancyTrace, cfg: &FusionConfig) -> Result<WindowSamples> {
    let ratio = cfg.window_s / cfg.accel_segment_s;
    if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::param(format!(
            "window {} s is not a whole number of {} s segments",
            cfg.window_s, cfg.accel_segment_s
        )));
    }
    let per_window = ratio.round() as usize;
    let channel = match cfg.accel_axis {
        Modality::AccelX => &trace.accel_x,
        Modality::AccelY => &trace.accel_y,
        Modality::AccelZ => &trace.accel_z,
        Modality::AudioZcr => return Err(Error::param("accel_axis must be an accelerometer axis")),
    };
    let accel = accel_feature(cfg.accel_axis, channel, trace.accel_rate, cfg.accel_segment_s, cfg.accel_stat)?;
    let zcr = audio_zero_crossings(&trace.audio, trace.audio_rate, cfg.window_s)?;
    let windows = zcr.len().min(accel.len() / per_window);

    let mut out = WindowSamples {
        accel: Vec::new(),
        audio: Vec::new(),
        labels: Vec::new(),
    };
    for w in 0..windows {
        let t0 = (w as f64 * cfg.window_s).round() as usize;
        let t1 = (((w + 1) as f64) * cfg.window_s).round() as usize;
        let secs = &trace.labels[t0.min(trace.labels.len())..t1.min(trace.labels.len())];
        let Some(&first) = secs.first() else { continue };
        if secs.iter().any(|&l| l != first) {
            continue;
        }
        out.accel.push(accel.values[w * per_window..(w + 1) * per_window].to_vec());
        out.audio.push(vec![zcr.values[w]]);
        out.labels.push(first as usize);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    pub modality: Modality,
    pub c: f64,
    pub gamma: f64,
    pub confusion: Confusion,
    pub model: SvrModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub modalities: Vec<ModalityReport>,
    pub fused: Confusion,
    /// Weights after cross-validated learning, before testing.
    pub learned_weights: Vec<f64>,
    pub mode: FusionMode,
    pub train_windows: usize,
    pub test_windows: usize,
}

fn gather(xs: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| xs[i].clone()).collect()
}

fn fit_expert(
    modality: Modality,
    xs: &[Vec<f64>],
    labels: &[usize],
    c: f64,
    gamma: f64,
    cfg: &FusionConfig,
) -> Result<SvrExpert> {
    let scaler = Standardizer::fit(xs)?;
    let scaled: Vec<Vec<f64>> = xs.iter().map(|x| scaler.apply(x)).collect();
    let ys: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    Ok(SvrExpert {
        modality,
        model: svr_train(&scaled, &ys, c, gamma, cfg.epsilon)?,
        scaler,
        threshold: cfg.threshold,
    })
}

/// Hold out a stratified test share, tune each modality's SVR by grid search,
/// learn fusion weights from out-of-fold predictions, then evaluate both
/// modalities alone and fused on the held-out windows.
pub fn run_fusion_experiment(trace: &OccupancyTrace, cfg: &FusionConfig) -> Result<FusionReport> {
    let data = extract_windows(trace, cfg)?;
    if data.labels.iter().filter(|&&l| l == 0).count() == 0 || data.labels.iter().all(|&l| l == 0) {
        return Err(Error::data("trace must contain both occupied and unoccupied windows"));
    }
    let split = stratified_holdout(&data.labels, 2, cfg.test_fraction, cfg.seed ^ 0x5EED_0001)?;
    let train_labels: Vec<usize> = split.train.iter().map(|&i| data.labels[i]).collect();
    let modalities = [cfg.accel_axis, Modality::AudioZcr];

    // Hyperparameters per modality.
    let mut chosen = Vec::new();
    for m in 0..modalities.len() {
        let xs = gather(data.features(m), &split.train);
        let scaler = Standardizer::fit(&xs)?;
        let scaled: Vec<Vec<f64>> = xs.iter().map(|x| scaler.apply(x)).collect();
        let (best, _) = grid_search(
            &scaled,
            &train_labels,
            &cfg.grid_c,
            &cfg.grid_gamma,
            cfg.epsilon,
            cfg.folds,
            cfg.seed,
        )?;
        chosen.push((best.c, best.gamma));
    }

    // Out-of-fold local predictions drive the weight updates, in time order.
    let names = modalities.iter().map(|m| m.name().to_string()).collect();
    let mut voter = WeightedMajority::new(names, 2, cfg.beta)?;
    let folds = stratified_folds_for_labels(&train_labels, 2, cfg.folds, cfg.seed.wrapping_add(1))?;
    for fold in &folds {
        let mut local = vec![Vec::new(); fold.validation.len()];
        for (m, &modality) in modalities.iter().enumerate() {
            let all = gather(data.features(m), &split.train);
            let xs = gather(&all, &fold.train);
            let ls: Vec<usize> = fold.train.iter().map(|&i| train_labels[i]).collect();
            let expert = fit_expert(modality, &xs, &ls, chosen[m].0, chosen[m].1, cfg)?;
            for (slot, &i) in local.iter_mut().zip(&fold.validation) {
                slot.push(svr_predict_class(&expert.model, &expert.scaler.apply(&all[i]), cfg.threshold)?);
            }
        }
        for (l, &i) in local.iter().zip(&fold.validation) {
            voter.update(l, train_labels[i])?;
        }
    }
    let learned_weights = voter.weights();

    let experts = modalities
        .iter()
        .enumerate()
        .map(|(m, &modality)| {
            let xs = gather(data.features(m), &split.train);
            fit_expert(modality, &xs, &train_labels, chosen[m].0, chosen[m].1, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ensemble = ExpertEnsemble::from_parts(experts, voter)?;

    let mut single: Vec<Confusion> = vec![Confusion::new(2); modalities.len()];
    let mut fused = Confusion::new(2);
    for &i in &split.validation {
        let features = vec![data.accel[i].clone(), data.audio[i].clone()];
        let truth = data.labels[i];
        let p: FusionPrediction = match cfg.mode {
            FusionMode::Frozen => ensemble.fuse_predict(&features)?,
            FusionMode::Online => ensemble.fuse_predict_online(&features, truth)?,
        };
        for (conf, (_, local)) in single.iter_mut().zip(&p.per_expert_predictions) {
            conf.record(truth, *local)?;
        }
        fused.record(truth, p.global_prediction)?;
    }

    let modalities = ensemble
        .experts()
        .iter()
        .zip(single)
        .zip(&chosen)
        .map(|((e, confusion), &(c, gamma))| ModalityReport {
            modality: e.modality,
            c,
            gamma,
            confusion,
            model: e.model.clone(),
        })
        .collect();
    Ok(FusionReport {
        modalities,
        fused,
        learned_weights,
        mode: cfg.mode,
        train_windows: split.train.len(),
        test_windows: split.validation.len(),
    })
}

/// Scenario blocks of one benchmark subject, 1200 s in total. Block lengths
/// are multiples of 5 s so every window has a single label.
pub fn benchmark_schedule() -> Vec<(Scenario, u32)> {
    vec![
        (Scenario::OccupiedTyping, 200),
        (Scenario::UnoccupiedIdle, 200),
        (Scenario::OccupiedQuiet, 200),
        (Scenario::UnoccupiedDeviceVibration, 200),
        (Scenario::OccupiedTyping, 100),
        (Scenario::UnoccupiedDeviceVibration, 100),
        (Scenario::OccupiedQuiet, 100),
        (Scenario::UnoccupiedIdle, 100),
    ]
}

/// Generator settings for the benchmark: defaults with 8 kHz audio.
pub fn benchmark_params() -> OccupancyParams {
    OccupancyParams {
        audio_rate: 8_000,
        ..OccupancyParams::default()
    }
}

pub fn benchmark_trace(subject: u64) -> Result<OccupancyTrace> {
    synth_session(&benchmark_params(), &benchmark_schedule(), 0xC0FF_EE00 + subject)
}

/// Per-subject reports and their pooled confusion matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub subjects: Vec<FusionReport>,
    pub modalities: Vec<(Modality, Confusion)>,
    pub fused: Confusion,
}

/// Runs [`run_fusion_experiment`] on every subject trace, learning weights
/// per subject, and pools the test confusion matrices.
pub fn run_fusion_benchmark(traces: &[OccupancyTrace], cfg: &FusionConfig) -> Result<BenchmarkSummary> {
    let subjects = traces
        .iter()
        .map(|t| run_fusion_experiment(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let first = subjects.first().ok_or_else(|| Error::param("no subject traces"))?;
    let mut modalities: Vec<(Modality, Confusion)> =
        first.modalities.iter().map(|m| (m.modality, Confusion::new(2))).collect();
    let mut fused = Confusion::new(2);
    for r in &subjects {
        for ((_, acc), m) in modalities.iter_mut().zip(&r.modalities) {
            acc.merge(&m.confusion)?;
        }
        fused.merge(&r.fused)?;
    }
    Ok(BenchmarkSummary {
        subjects,
        modalities,
        fused,
    })
}
