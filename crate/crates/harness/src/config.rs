//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srcfuse::dataset::HarAxis;
use srcfuse::features::Modality;
use srcfuse::fusion::FusionConfig;
use srcfuse::projection::ProjectionMethod;
use srcfuse::src_classifier::{NormalizeOrder, DEFAULT_CLASSIFY_TOL};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    HarEngineered,
    HarRawAxis,
    OccupancySingleModality,
    OccupancyFusion,
    ProjectionPowerStudy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::HarEngineered,
        ExperimentKind::HarRawAxis,
        ExperimentKind::OccupancySingleModality,
        ExperimentKind::OccupancyFusion,
        ExperimentKind::ProjectionPowerStudy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::HarEngineered => "har_engineered",
            ExperimentKind::HarRawAxis => "har_raw_axis",
            ExperimentKind::OccupancySingleModality => "occupancy_single_modality",
            ExperimentKind::OccupancyFusion => "occupancy_fusion",
            ExperimentKind::ProjectionPowerStudy => "projection_power_study",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::HarEngineered => {
                "SRC with SVD/Gaussian projections plus SVM and kNN on the 561-feature HAR vectors"
            }
            ExperimentKind::HarRawAxis => "SRC on raw 128-sample single-axis HAR windows",
            ExperimentKind::OccupancySingleModality => {
                "per-modality SVR occupancy accuracy across accelerometer axes and audio windows"
            }
            ExperimentKind::OccupancyFusion => "accel-Z and audio-ZCR SVRs fused by weighted majority",
            ExperimentKind::ProjectionPowerStudy => "signal power of each projection type against d",
        }
    }

    pub fn is_har(self) -> bool {
        matches!(self, ExperimentKind::HarEngineered | ExperimentKind::HarRawAxis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    /// Residual tolerance of the sparse solver during classification.
    pub src_tol: f64,
    pub normalize: NormalizeOrder,
    pub knn_k: usize,
    pub svm_c: f64,
    /// Defaults to `1 / d` when absent.
    pub svm_gamma: Option<f64>,
    /// Run the SVM and kNN baselines.
    pub baselines: bool,
    /// Keep at most this many training samples per class.
    pub train_per_class: Option<usize>,
    /// Classify only the first `n` test samples.
    pub test_limit: Option<usize>,
    /// Raw-axis variant: which axes to run.
    pub axes: Vec<HarAxis>,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            src_tol: DEFAULT_CLASSIFY_TOL,
            normalize: NormalizeOrder::AfterProjection,
            knn_k: srcfuse::baselines::DEFAULT_K,
            svm_c: srcfuse::baselines::DEFAULT_SVM_C,
            svm_gamma: None,
            baselines: true,
            train_per_class: None,
            test_limit: None,
            axes: HarAxis::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupancyParams {
    /// Number of synthetic subjects.
    pub subjects: u64,
    /// Window lengths swept by the single-modality experiment.
    pub windows_s: Vec<f64>,
    /// Accelerometer axes swept by the single-modality experiment.
    pub axes: Vec<Modality>,
    /// Shared settings; `seed` is overwritten by each sweep seed.
    pub fusion: FusionConfig,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        Self {
            subjects: 3,
            windows_s: vec![5.0],
            axes: vec![Modality::AccelX, Modality::AccelY, Modality::AccelZ],
            fusion: FusionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerParams {
    /// Random dictionaries used when no dataset is given.
    pub dictionaries: usize,
    pub dict_rows: usize,
    pub dict_cols: usize,
    /// Random orthonormal-row matrices drawn per `(dictionary, d)`.
    pub random_matrices: usize,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            dictionaries: 20,
            dict_rows: 50,
            dict_cols: 200,
            random_matrices: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default = "default_fractions")]
    pub retained_fractions: Vec<f64>,
    #[serde(default = "default_methods")]
    pub projection_methods: Vec<ProjectionMethod>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub classifier: ClassifierParams,
    #[serde(default)]
    pub occupancy: OccupancyParams,
    #[serde(default)]
    pub power: PowerParams,
}

fn default_fractions() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2]
}

fn default_methods() -> Vec<ProjectionMethod> {
    vec![ProjectionMethod::SvdTopSingular, ProjectionMethod::Gaussian]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_folds() -> usize {
    5
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            dataset_path: None,
            retained_fractions: default_fractions(),
            projection_methods: default_methods(),
            seeds: default_seeds(),
            folds: default_folds(),
            classifier: ClassifierParams::default(),
            occupancy: OccupancyParams::default(),
            power: PowerParams::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        let n = self.input_dim();
        for &f in &self.retained_fractions {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("retained fraction {f} is outside (0, 1]"));
            }
            if let Some(n) = n {
                if ((f * n as f64).floor() as usize) < 1 {
                    return bad(format!("retained fraction {f} gives d = 0 for n = {n}"));
                }
            }
        }
        let c = &self.classifier;
        if !(c.src_tol > 0.0) {
            return bad(format!("classifier.src_tol must be positive, got {}", c.src_tol));
        }
        if c.knn_k == 0 {
            return bad("classifier.knn_k must be at least 1".into());
        }
        if !(c.svm_c > 0.0) || c.svm_gamma.is_some_and(|g| !(g > 0.0)) {
            return bad("classifier.svm_c and svm_gamma must be positive".into());
        }
        if c.train_per_class == Some(0) || c.test_limit == Some(0) {
            return bad("train_per_class and test_limit must be at least 1".into());
        }
        match self.experiment {
            ExperimentKind::HarEngineered | ExperimentKind::HarRawAxis => {
                if self.retained_fractions.is_empty() || self.projection_methods.is_empty() {
                    return bad("HAR experiments need retained_fractions and projection_methods".into());
                }
                if self.experiment == ExperimentKind::HarRawAxis && c.axes.is_empty() {
                    return bad("classifier.axes is empty".into());
                }
            }
            ExperimentKind::OccupancySingleModality | ExperimentKind::OccupancyFusion => {
                let o = &self.occupancy;
                if o.subjects == 0 {
                    return bad("occupancy.subjects must be at least 1".into());
                }
                if o.windows_s.is_empty() || o.windows_s.iter().any(|w| !(*w > 0.0)) {
                    return bad("occupancy.windows_s must be non-empty and positive".into());
                }
                if o.axes.is_empty() || o.axes.contains(&Modality::AudioZcr) {
                    return bad("occupancy.axes must list accelerometer axes".into());
                }
                let f = &o.fusion;
                if !(f.beta > 0.0 && f.beta < 1.0) {
                    return bad(format!("fusion.beta must be in (0, 1), got {}", f.beta));
                }
                if !(f.test_fraction > 0.0 && f.test_fraction < 1.0) {
                    return bad(format!("fusion.test_fraction must be in (0, 1), got {}", f.test_fraction));
                }
                if f.folds < 2 || f.grid_c.is_empty() || f.grid_gamma.is_empty() {
                    return bad("fusion.folds must be at least 2 and grids non-empty".into());
                }
                if f.grid_c.iter().chain(&f.grid_gamma).any(|v| !(*v > 0.0)) || !(f.epsilon >= 0.0) {
                    return bad("fusion grid values must be positive and epsilon non-negative".into());
                }
                if f.accel_axis == Modality::AudioZcr {
                    return bad("fusion.accel_axis must be an accelerometer axis".into());
                }
            }
            ExperimentKind::ProjectionPowerStudy => {
                let p = &self.power;
                if self.retained_fractions.is_empty() {
                    return bad("projection_power_study needs retained_fractions".into());
                }
                if self.dataset_path.is_none() && (p.dictionaries == 0 || p.dict_rows == 0 || p.dict_cols == 0) {
                    return bad("power.dictionaries, dict_rows and dict_cols must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Input dimension implied by the experiment, when known up front.
    fn input_dim(&self) -> Option<usize> {
        match self.experiment {
            ExperimentKind::HarEngineered => Some(561),
            ExperimentKind::HarRawAxis => Some(128),
            ExperimentKind::ProjectionPowerStudy if self.dataset_path.is_none() => Some(self.power.dict_rows),
            _ => None,
        }
    }
}
