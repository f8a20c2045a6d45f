mod common;

use std::path::Path;
use std::process::Command;

use srcfuse::dataset::{HarAxis, HarVariant};
use srcfuse::projection::ProjectionMethod;
use srcfuse_harness::{emit_results, read_results, run_to_dir, ExperimentConfig, ExperimentKind, Format, ResultRow};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srcfuse"))
}

fn engineered_config(root: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::HarEngineered);
    cfg.dataset_path = Some(root.to_path_buf());
    cfg.retained_fractions = vec![0.02, 0.05];
    cfg.projection_methods = vec![ProjectionMethod::SvdTopSingular, ProjectionMethod::Gaussian];
    cfg.seeds = vec![3, 4];
    cfg
}

#[test]
fn engineered_sweep_covers_every_cell() {
    let data = tempfile::tempdir().unwrap();
    common::write_surrogate(data.path(), HarVariant::Engineered561);
    let out = tempfile::tempdir().unwrap();
    let cfg = engineered_config(data.path());
    let files = run_to_dir(&cfg, out.path(), Format::Csv, 2).unwrap();
    let rows = read_results(&files.results, Format::Csv).unwrap();
    assert_eq!(rows.len(), files.rows);

    let count = |m: &str| rows.iter().filter(|r| r.method == m).count();
    // Top-singular runs once per fraction, gaussian once per seed.
    assert_eq!(count("src_svd_top_singular"), 2);
    assert_eq!(count("src_gaussian"), 4);
    // Baselines on each projected fraction plus the raw features.
    assert_eq!(count("knn"), 3);
    assert_eq!(count("svm"), 3);
    for r in &rows {
        let c = r.confusion.as_ref().unwrap();
        assert_eq!(r.accuracy, Some(c.correct() as f64 / c.total() as f64));
        assert_eq!(c.total(), 30);
    }
    let best = rows
        .iter()
        .filter(|r| r.method.starts_with("src_"))
        .filter_map(|r| r.accuracy)
        .fold(0.0, f64::max);
    assert!(best > 0.9, "surrogate classes are separable, got {best}");

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.metadata).unwrap()).unwrap();
    assert_eq!(meta["rows"], rows.len());
    assert_eq!(meta["config"]["seeds"], serde_json::json!([3, 4]));
    let summary = std::fs::read_to_string(&files.summary).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("har_engineered,src_gaussian,0.02,")));
}

#[test]
fn raw_axis_rows_are_tagged_with_axis() {
    let data = tempfile::tempdir().unwrap();
    for axis in [HarAxis::X, HarAxis::Z] {
        common::write_surrogate(data.path(), HarVariant::RawAxis(axis));
    }
    let mut cfg = ExperimentConfig::new(ExperimentKind::HarRawAxis);
    cfg.dataset_path = Some(data.path().to_path_buf());
    cfg.classifier.axes = vec![HarAxis::X, HarAxis::Z];
    cfg.classifier.baselines = false;
    cfg.retained_fractions = vec![0.35];
    cfg.projection_methods = vec![ProjectionMethod::SvdTopSingular];
    let out = tempfile::tempdir().unwrap();
    let files = run_to_dir(&cfg, out.path(), Format::Json, 1).unwrap();
    let rows = read_results(&files.results, Format::Json).unwrap();
    let axes: Vec<_> = rows.iter().map(|r| r.axis.clone().unwrap()).collect();
    assert_eq!(axes, ["x", "z"]);
    assert!(rows.iter().all(|r| r.d == Some(44)));
}

#[test]
fn identical_runs_write_identical_accuracies() {
    let data = tempfile::tempdir().unwrap();
    common::write_surrogate(data.path(), HarVariant::Engineered561);
    let cfg = engineered_config(data.path());
    let strip = |rows: Vec<ResultRow>| {
        rows.into_iter()
            .map(|mut r| {
                r.wall_time_ms = 0.0;
                r
            })
            .collect::<Vec<_>>()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_to_dir(&cfg, a.path(), Format::Csv, 1).unwrap();
    let rb = run_to_dir(&cfg, b.path(), Format::Csv, 3).unwrap();
    let ra = strip(read_results(&ra.results, Format::Csv).unwrap());
    let rb = strip(read_results(&rb.results, Format::Csv).unwrap());
    assert_eq!(ra, rb);
}

#[test]
fn emission_contract() {
    let mut row = ResultRow::new("projection_power_study", "gaussian", 7);
    row.retained_fraction = Some(0.1);
    row.signal_power = Some(1.25);
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    emit_results(&[row.clone()], &one, Format::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&one).unwrap().lines().count(), 2);

    let again = dir.path().join("again.csv");
    emit_results(&[row.clone()], &again, Format::Csv).unwrap();
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&again).unwrap());

    let json = dir.path().join("rows.jsonl");
    emit_results(&[row.clone(), row.clone()], &json, Format::Json).unwrap();
    assert_eq!(read_results(&json, Format::Json).unwrap(), vec![row.clone(), row.clone()]);

    assert!(emit_results(&[], &dir.path().join("empty.csv"), Format::Csv).is_err());
    assert!(emit_results(&[row], &dir.path().join("missing/dir/x.csv"), Format::Csv).is_err());
}

#[test]
fn cli_runs_power_study_and_reports_categories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("power.toml");
    std::fs::write(
        &cfg,
        "experiment = \"projection_power_study\"\nretained_fractions = [0.1]\n\n[power]\ndictionaries = 2\nrandom_matrices = 20\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .args(["--seeds", "1,2", "--jobs", "2", "--format", "json"])
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["results.jsonl", "summary.csv", "metadata.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let rows = read_results(&out.join("results.jsonl"), Format::Json).unwrap();
    assert!(rows.iter().any(|r| r.seed == 2));

    let listed = bin().arg("list-experiments").output().unwrap();
    let text = String::from_utf8(listed.stdout).unwrap();
    for k in ExperimentKind::ALL {
        assert!(text.contains(k.name()));
    }

    assert!(bin().arg("validate").arg(&cfg).status().unwrap().success());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"har_engineered\"\nretained_fractions = [0.0]\n").unwrap();
    assert_eq!(bin().arg("validate").arg(&bad).status().unwrap().code(), Some(2));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "experiment = \"occupancy_fusion\"\ncolour = 1\n").unwrap();
    assert_eq!(bin().arg("validate").arg(&unknown).status().unwrap().code(), Some(2));

    let missing_data = dir.path().join("har.toml");
    std::fs::write(
        &missing_data,
        format!("experiment = \"har_engineered\"\ndataset_path = \"{}\"\n", dir.path().join("nowhere").display()),
    )
    .unwrap();
    let status = bin().arg("run").arg(&missing_data).arg("--out-dir").arg(&out).status().unwrap();
    assert!(matches!(status.code(), Some(3 | 4)), "got {:?}", status.code());
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::HarEngineered);
    cfg.seeds.clear();
    let out = tempfile::tempdir().unwrap();
    let err = run_to_dir(&cfg, out.path(), Format::Csv, 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.path().join("results.csv").exists());
}
