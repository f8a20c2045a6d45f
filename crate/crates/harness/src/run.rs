//! Experiment drivers.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use srcfuse::baselines::{knn_classify, project_dataset, svm_classify, svm_train};
use srcfuse::dataset::{load_uci_har, Dataset, HarAxis, HarVariant};
use srcfuse::features::Modality;
use srcfuse::fusion::{benchmark_trace, run_fusion_benchmark, BenchmarkSummary, FusionConfig};
use srcfuse::metrics::Confusion;
use srcfuse::nalgebra::DMatrix;
use srcfuse::projection::{
    gaussian_matrix, gaussian_projection, random_orthonormal_rows, retained_dim, svd_projection_from_factors,
    top_power, PowerEvaluator, ProjectionMatrix, ProjectionMethod, SvdSelection,
};
use srcfuse::solver::{svd, SvdFactors};
use srcfuse::src_classifier::{build_dictionary, SrcClassifier};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::ResultRow;
use crate::HarnessError;

/// Environment variable naming the extracted UCI HAR directory.
pub const HAR_ENV: &str = "UCI_HAR_DIR";
pub const HAR_DEFAULT_PATH: &str = "data/UCI HAR Dataset";

/// Everything a run produced besides the streamed rows.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub rows: Vec<ResultRow>,
    pub resolved: BTreeMap<String, String>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    sink: &'a mut (dyn FnMut(&ResultRow) -> Result<(), HarnessError> + Send),
    record: RunRecord,
}

impl Ctx<'_> {
    fn emit(&mut self, row: ResultRow) -> Result<(), HarnessError> {
        (self.sink)(&row)?;
        self.record.rows.push(row);
        Ok(())
    }

    fn name(&self) -> &'static str {
        self.cfg.experiment.name()
    }
}

/// Resolves the HAR location: config path, then `$UCI_HAR_DIR`, then the
/// default relative path.
pub fn har_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.dataset_path
        .clone()
        .or_else(|| std::env::var_os(HAR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(HAR_DEFAULT_PATH))
}

/// Runs the configured sweep, handing each row to `sink` as soon as it is
/// complete. `jobs` bounds the worker threads used inside each cell.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
    sink: &mut (dyn FnMut(&ResultRow) -> Result<(), HarnessError> + Send),
) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let mut ctx = Ctx {
        cfg,
        sink,
        record: RunRecord::default(),
    };
    pool.install(|| match cfg.experiment {
        ExperimentKind::HarEngineered => run_har(&mut ctx, HarVariant::Engineered561, None),
        ExperimentKind::HarRawAxis => {
            for &axis in &cfg.classifier.axes {
                run_har(&mut ctx, HarVariant::RawAxis(axis), Some(axis))?;
            }
            Ok(())
        }
        ExperimentKind::OccupancySingleModality => run_occupancy_single(&mut ctx),
        ExperimentKind::OccupancyFusion => run_occupancy_fusion(&mut ctx),
        ExperimentKind::ProjectionPowerStudy => run_power(&mut ctx),
    })?;
    Ok(ctx.record)
}

fn load_har(cfg: &ExperimentConfig, variant: HarVariant) -> Result<(Dataset, Dataset), HarnessError> {
    let root = har_path(cfg);
    let (mut train, mut test) = load_uci_har(&root, variant).map_err(|e| {
        HarnessError::from(e).context(&format!(
            "loading UCI HAR ({variant:?}) from {} (set dataset_path or ${HAR_ENV})",
            root.display()
        ))
    })?;
    if let Some(per_class) = cfg.classifier.train_per_class {
        train = train.subsample_per_class(per_class, cfg.seeds[0])?;
    }
    if let Some(limit) = cfg.classifier.test_limit {
        if limit < test.len() {
            let idx: Vec<usize> = (0..limit).collect();
            test = test.subset(&idx)?;
        }
    }
    Ok((train, test))
}

fn timed<T>(f: impl FnOnce() -> Result<T, HarnessError>) -> Result<(T, f64), HarnessError> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64() * 1e3))
}

fn classify_all(clf: &SrcClassifier, test: &Dataset) -> Result<Confusion, HarnessError> {
    let predicted = test
        .samples()
        .par_iter()
        .map(|s| clf.classify(&s.features).map(|d| d.predicted_class))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Confusion::from_pairs(test.class_count(), &test.labels(), &predicted)?)
}

fn projection_for(
    method: ProjectionMethod,
    factors: &SvdFactors,
    d: usize,
    n: usize,
    seed: u64,
) -> Result<ProjectionMatrix, HarnessError> {
    Ok(match method {
        ProjectionMethod::Gaussian => gaussian_projection(d, n, seed)?,
        ProjectionMethod::SvdRandomColumns => svd_projection_from_factors(factors, d, SvdSelection::Random { seed })?,
        ProjectionMethod::SvdTopSingular => svd_projection_from_factors(factors, d, SvdSelection::TopSingular)?,
    })
}

fn run_har(ctx: &mut Ctx<'_>, variant: HarVariant, axis: Option<HarAxis>) -> Result<(), HarnessError> {
    let cfg = ctx.cfg;
    let c = &cfg.classifier;
    let (train, test) = load_har(cfg, variant)?;
    let dict = build_dictionary(&train)?;
    let factors = svd(&dict.raw_matrix())?;
    let n = train.dim();
    let axis_name = axis.map(|a| a.to_string());

    for &fraction in &cfg.retained_fractions {
        let d = retained_dim(n, fraction)?;
        for &method in &cfg.projection_methods {
            // The top-singular projection does not depend on the seed.
            let seeds: &[u64] = if method == ProjectionMethod::SvdTopSingular { &cfg.seeds[..1] } else { &cfg.seeds };
            for &seed in seeds {
                let (confusion, ms) = timed(|| {
                    let r = projection_for(method, &factors, d, n, seed)?;
                    let clf = SrcClassifier::new(&dict, r, c.normalize, c.src_tol)?;
                    classify_all(&clf, &test)
                })?;
                let mut row = ResultRow::new(ctx.name(), &format!("src_{}", method.name()), seed).with_confusion(confusion);
                row.retained_fraction = Some(fraction);
                row.d = Some(d);
                row.axis = axis_name.clone();
                row.params = format!("tol={};normalize={:?}", c.src_tol, c.normalize);
                row.wall_time_ms = ms;
                ctx.emit(row)?;
            }
        }
        if c.baselines {
            let r = svd_projection_from_factors(&factors, d, SvdSelection::TopSingular)?;
            let ptrain = project_dataset(&r, &train)?;
            let ptest = project_dataset(&r, &test)?;
            run_baselines(ctx, &ptrain, &ptest, Some(fraction), axis_name.clone())?;
        }
    }
    if c.baselines {
        run_baselines(ctx, &train, &test, None, axis_name)?;
    }
    Ok(())
}

fn run_baselines(
    ctx: &mut Ctx<'_>,
    train: &Dataset,
    test: &Dataset,
    fraction: Option<f64>,
    axis: Option<String>,
) -> Result<(), HarnessError> {
    let c = &ctx.cfg.classifier;
    let seed = ctx.cfg.seeds[0];
    let k = c.knn_k.min(train.len());
    let (knn, ms) = timed(|| {
        let predicted = test
            .samples()
            .par_iter()
            .map(|s| knn_classify(train, &s.features, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Confusion::from_pairs(test.class_count(), &test.labels(), &predicted)?)
    })?;
    let mut row = ResultRow::new(ctx.name(), "knn", seed).with_confusion(knn);
    row.retained_fraction = fraction;
    row.d = Some(train.dim());
    row.axis = axis.clone();
    row.params = format!("k={k}");
    row.wall_time_ms = ms;
    ctx.emit(row)?;

    let gamma = c.svm_gamma.unwrap_or(1.0 / train.dim() as f64);
    let (svm, ms) = timed(|| {
        let model = svm_train(train, c.svm_c, gamma)?;
        let predicted = test
            .samples()
            .par_iter()
            .map(|s| svm_classify(&model, &s.features))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Confusion::from_pairs(test.class_count(), &test.labels(), &predicted)?)
    })?;
    let mut row = ResultRow::new(ctx.name(), "svm", seed).with_confusion(svm);
    row.retained_fraction = fraction;
    row.d = Some(train.dim());
    row.axis = axis;
    row.params = format!("c={};gamma={gamma}", c.svm_c);
    row.wall_time_ms = ms;
    ctx.emit(row)
}

fn occupancy_traces(ctx: &Ctx<'_>) -> Result<Vec<srcfuse::dataset::OccupancyTrace>, HarnessError> {
    (0..ctx.cfg.occupancy.subjects)
        .into_par_iter()
        .map(|s| benchmark_trace(s).map_err(HarnessError::from))
        .collect()
}

/// Rows for every subject and the pooled result of one benchmark run.
fn emit_benchmark(
    ctx: &mut Ctx<'_>,
    summary: &BenchmarkSummary,
    fcfg: &FusionConfig,
    ms: f64,
    include: &dyn Fn(Modality) -> bool,
    fused: bool,
) -> Result<(), HarnessError> {
    let seed = fcfg.seed;
    let base = |method: &str, axis: &str, fold: Option<usize>, conf: &Confusion, params: String| {
        let mut row = ResultRow::new(ctx.name(), method, seed).with_confusion(conf.clone());
        row.window_s = Some(fcfg.window_s);
        row.axis = Some(axis.to_string());
        row.fold = fold;
        row.params = params;
        row
    };
    let mut rows = Vec::new();
    for (s, report) in summary.subjects.iter().enumerate() {
        for m in report.modalities.iter().filter(|m| include(m.modality)) {
            let params = format!("c={};gamma={};epsilon={}", m.c, m.gamma, fcfg.epsilon);
            rows.push(base("svr", m.modality.name(), Some(s), &m.confusion, params));
        }
        if fused {
            let w: Vec<String> = report.learned_weights.iter().map(f64::to_string).collect();
            let params = format!("beta={};weights={};mode={:?}", fcfg.beta, w.join(","), report.mode);
            rows.push(base("fused", "fusion", Some(s), &report.fused, params));
        }
    }
    for (m, conf) in summary.modalities.iter().filter(|(m, _)| include(*m)) {
        rows.push(base("svr", m.name(), None, conf, String::new()));
    }
    if fused {
        rows.push(base("fused", "fusion", None, &summary.fused, String::new()));
    }
    for (s, report) in summary.subjects.iter().enumerate() {
        for m in &report.modalities {
            ctx.record.resolved.insert(
                format!("seed={seed};window_s={};subject={s};modality={}", fcfg.window_s, m.modality.name()),
                format!("c={};gamma={}", m.c, m.gamma),
            );
        }
        if fused {
            ctx.record.resolved.insert(
                format!("seed={seed};window_s={};subject={s};fusion_weights", fcfg.window_s),
                format!("{:?}", report.learned_weights),
            );
        }
    }
    let per_row = ms / rows.len().max(1) as f64;
    for mut row in rows {
        row.wall_time_ms = per_row;
        ctx.emit(row)?;
    }
    Ok(())
}

fn run_occupancy_single(ctx: &mut Ctx<'_>) -> Result<(), HarnessError> {
    let traces = occupancy_traces(ctx)?;
    let o = ctx.cfg.occupancy.clone();
    for &window_s in &o.windows_s {
        for (ai, &axis) in o.axes.iter().enumerate() {
            for &seed in &ctx.cfg.seeds {
                let fcfg = FusionConfig {
                    accel_axis: axis,
                    window_s,
                    seed,
                    ..o.fusion.clone()
                };
                let (summary, ms) = timed(|| Ok(run_fusion_benchmark(&traces, &fcfg)?))?;
                // Audio results do not depend on the accelerometer axis.
                let include = |m: Modality| m != Modality::AudioZcr || ai == 0;
                emit_benchmark(ctx, &summary, &fcfg, ms, &include, false)?;
            }
        }
    }
    Ok(())
}

fn run_occupancy_fusion(ctx: &mut Ctx<'_>) -> Result<(), HarnessError> {
    let traces = occupancy_traces(ctx)?;
    let o = ctx.cfg.occupancy.clone();
    for &seed in &ctx.cfg.seeds {
        let fcfg = FusionConfig { seed, ..o.fusion.clone() };
        let (summary, ms) = timed(|| Ok(run_fusion_benchmark(&traces, &fcfg)?))?;
        emit_benchmark(ctx, &summary, &fcfg, ms, &|_| true, true)?;
    }
    Ok(())
}

fn run_power(ctx: &mut Ctx<'_>) -> Result<(), HarnessError> {
    let cfg = ctx.cfg;
    if cfg.dataset_path.is_some() || std::env::var_os(HAR_ENV).is_some() {
        let (train, _) = load_har(cfg, HarVariant::Engineered561)?;
        let a = build_dictionary(&train)?.raw_matrix();
        power_on_dictionary(ctx, &a, None)
    } else {
        let p = cfg.power.clone();
        for i in 0..p.dictionaries {
            let a = gaussian_matrix(p.dict_rows, p.dict_cols, 0xD1C7_0000 + i as u64);
            power_on_dictionary(ctx, &a, Some(i))?;
        }
        Ok(())
    }
}

fn power_on_dictionary(ctx: &mut Ctx<'_>, a: &DMatrix<f64>, fold: Option<usize>) -> Result<(), HarnessError> {
    let cfg = ctx.cfg;
    let n = a.nrows();
    let factors = svd(a)?;
    let eval = PowerEvaluator::new(a);
    let rank = factors.rank();
    for &fraction in &cfg.retained_fractions {
        let d = retained_dim(n, fraction)?.min(rank);
        let push = |ctx: &mut Ctx<'_>, method: &str, seed: u64, power: f64, params: String, ms: f64| {
            let mut row = ResultRow::new(ctx.name(), method, seed);
            row.retained_fraction = Some(fraction);
            row.d = Some(d);
            row.fold = fold;
            row.signal_power = Some(power);
            row.params = params;
            row.wall_time_ms = ms;
            ctx.emit(row)
        };
        push(ctx, "top_singular_values", cfg.seeds[0], top_power(&factors, d), String::new(), 0.0)?;
        for &method in &cfg.projection_methods {
            let seeds: &[u64] = if method == ProjectionMethod::SvdTopSingular { &cfg.seeds[..1] } else { &cfg.seeds };
            for &seed in seeds {
                let (power, ms) = timed(|| {
                    let r = projection_for(method, &factors, d, n, seed)?;
                    Ok(eval.power(r.matrix())?)
                })?;
                push(ctx, method.name(), seed, power, String::new(), ms)?;
            }
        }
        let count = cfg.power.random_matrices;
        if count > 0 {
            for &seed in &cfg.seeds {
                let (best, ms) = timed(|| {
                    (0..count)
                        .into_par_iter()
                        .map(|i| {
                            let q = random_orthonormal_rows(d, n, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?;
                            Ok(eval.power(&q)?)
                        })
                        .try_reduce(|| f64::NEG_INFINITY, |x, y| Ok(x.max(y)))
                })?;
                push(ctx, "random_orthonormal_max", seed, best, format!("draws={count}"), ms)?;
            }
        }
    }
    Ok(())
}
