//! Result rows, their CSV and JSON-lines encodings, and per-cell summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srcfuse::metrics::{mean_sem, Confusion};

use crate::config::ExperimentConfig;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub retained_fraction: Option<f64>,
    pub d: Option<usize>,
    pub window_s: Option<f64>,
    /// Sensor axis or modality.
    pub axis: Option<String>,
    pub seed: u64,
    /// Subject index for occupancy runs; absent for pooled or predefined splits.
    pub fold: Option<usize>,
    pub accuracy: Option<f64>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub signal_power: Option<f64>,
    pub confusion: Option<Confusion>,
    /// Resolved hyperparameters, `key=value` pairs joined by `;`.
    pub params: String,
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn new(experiment: &str, method: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            method: method.into(),
            retained_fraction: None,
            d: None,
            window_s: None,
            axis: None,
            seed,
            fold: None,
            accuracy: None,
            per_class_accuracy: Vec::new(),
            signal_power: None,
            confusion: None,
            params: String::new(),
            wall_time_ms: 0.0,
        }
    }

    /// Fills accuracy fields from a confusion matrix.
    pub fn with_confusion(mut self, confusion: Confusion) -> Self {
        self.accuracy = Some(confusion.accuracy());
        self.per_class_accuracy = confusion
            .per_class_accuracy()
            .into_iter()
            .map(|v| (!v.is_nan()).then_some(v))
            .collect();
        self.confusion = Some(confusion);
        self
    }

    /// Key identifying the sweep cell, i.e. everything except seed, fold and
    /// measurements.
    fn cell(&self) -> CellKey {
        CellKey {
            experiment: self.experiment.clone(),
            method: self.method.clone(),
            retained_fraction: self.retained_fraction.map(f64::to_bits),
            d: self.d,
            window_s: self.window_s.map(f64::to_bits),
            axis: self.axis.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    experiment: String,
    method: String,
    retained_fraction: Option<u64>,
    d: Option<usize>,
    window_s: Option<u64>,
    axis: Option<String>,
}

pub const CSV_HEADER: [&str; 15] = [
    "experiment",
    "method",
    "retained_fraction",
    "d",
    "window_s",
    "axis",
    "seed",
    "fold",
    "accuracy",
    "per_class_accuracy",
    "signal_power",
    "confusion",
    "params",
    "wall_time_ms",
    "correct_total",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Rows of the matrix joined by `|`, entries by `;`.
fn encode_confusion(c: &Confusion) -> String {
    c.counts
        .iter()
        .map(|r| r.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
        .collect::<Vec<_>>()
        .join("|")
}

fn decode_confusion(s: &str) -> Result<Confusion, HarnessError> {
    let counts = s
        .split('|')
        .map(|r| r.split(';').map(str::parse::<usize>).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Data(format!("bad confusion field {s:?}: {e}")))?;
    Ok(Confusion { counts })
}

fn csv_record(row: &ResultRow) -> Vec<String> {
    vec![
        row.experiment.clone(),
        row.method.clone(),
        opt(&row.retained_fraction),
        opt(&row.d),
        opt(&row.window_s),
        opt(&row.axis),
        row.seed.to_string(),
        opt(&row.fold),
        opt(&row.accuracy),
        row.per_class_accuracy.iter().map(opt).collect::<Vec<_>>().join(";"),
        opt(&row.signal_power),
        row.confusion.as_ref().map(encode_confusion).unwrap_or_default(),
        row.params.clone(),
        row.wall_time_ms.to_string(),
        row.confusion
            .as_ref()
            .map(|c| format!("{}/{}", c.correct(), c.total()))
            .unwrap_or_default(),
    ]
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|e| HarnessError::Data(format!("bad field {s:?}: {e}")))
    }
}

fn from_csv_record(r: &csv::StringRecord) -> Result<ResultRow, HarnessError> {
    if r.len() != CSV_HEADER.len() {
        return Err(HarnessError::Data(format!("row has {} fields", r.len())));
    }
    let per_class = if r[9].is_empty() {
        Vec::new()
    } else {
        r[9].split(';').map(parse_opt).collect::<Result<Vec<_>, _>>()?
    };
    Ok(ResultRow {
        experiment: r[0].into(),
        method: r[1].into(),
        retained_fraction: parse_opt(&r[2])?,
        d: parse_opt(&r[3])?,
        window_s: parse_opt(&r[4])?,
        axis: parse_opt(&r[5])?,
        seed: parse_opt(&r[6])?.ok_or_else(|| HarnessError::Data("missing seed".into()))?,
        fold: parse_opt(&r[7])?,
        accuracy: parse_opt(&r[8])?,
        per_class_accuracy: per_class,
        signal_power: parse_opt(&r[10])?,
        confusion: if r[11].is_empty() { None } else { Some(decode_confusion(&r[11])?) },
        params: r[12].into(),
        wall_time_ms: parse_opt(&r[13])?.unwrap_or(0.0),
    })
}

/// Appends rows to a results file, flushing after each one.
pub struct RowWriter {
    format: Format,
    path: PathBuf,
    csv: Option<csv::Writer<File>>,
    json: Option<BufWriter<File>>,
}

impl RowWriter {
    pub fn create(path: impl AsRef<Path>, format: Format) -> Result<Self, HarnessError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut w = Self {
            format,
            path,
            csv: None,
            json: None,
        };
        match format {
            Format::Csv => {
                let mut c = csv::Writer::from_writer(file);
                c.write_record(CSV_HEADER).map_err(|e| w.io(e))?;
                c.flush().map_err(|e| w.io(e))?;
                w.csv = Some(c);
            }
            Format::Json => w.json = Some(BufWriter::new(file)),
        }
        Ok(w)
    }

    fn io(&self, e: impl std::fmt::Display) -> HarnessError {
        HarnessError::Io(format!("{}: {e}", self.path.display()))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<(), HarnessError> {
        let res = match self.format {
            Format::Csv => {
                let c = self.csv.as_mut().expect("csv writer");
                c.write_record(csv_record(row))
                    .map_err(|e| e.to_string())
                    .and_then(|_| c.flush().map_err(|e| e.to_string()))
            }
            Format::Json => {
                let j = self.json.as_mut().expect("json writer");
                serde_json::to_writer(&mut *j, row)
                    .map_err(|e| e.to_string())
                    .and_then(|_| j.write_all(b"\n").map_err(|e| e.to_string()))
                    .and_then(|_| j.flush().map_err(|e| e.to_string()))
            }
        };
        res.map_err(|e| self.io(e))
    }
}

/// Writes `rows` to `path` in one go.
pub fn emit_results(rows: &[ResultRow], path: impl AsRef<Path>, format: Format) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("no rows to emit".into()));
    }
    let mut w = RowWriter::create(path, format)?;
    for r in rows {
        w.write(r)?;
    }
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>, format: Format) -> Result<Vec<ResultRow>, HarnessError> {
    let path = path.as_ref();
    let io = |e: &dyn std::fmt::Display| HarnessError::Io(format!("{}: {e}", path.display()));
    let file = File::open(path).map_err(|e| io(&e))?;
    match format {
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(file);
            rdr.records()
                .map(|r| from_csv_record(&r.map_err(|e| io(&e))?))
                .collect()
        }
        Format::Json => BufReader::new(file)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| {
                let l = l.map_err(|e| io(&e))?;
                serde_json::from_str(&l).map_err(|e| HarnessError::Data(e.to_string()))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub retained_fraction: Option<f64>,
    pub d: Option<usize>,
    pub window_s: Option<f64>,
    pub axis: Option<String>,
    /// Number of seeds contributing.
    pub n: usize,
    pub mean_accuracy: Option<f64>,
    pub sem_accuracy: Option<f64>,
    pub mean_signal_power: Option<f64>,
    pub sem_signal_power: Option<f64>,
}

/// Mean and standard error across seeds for every sweep cell. Per-subject
/// rows (those with a fold) are excluded in favour of pooled rows when both
/// exist.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells.entry(r.cell()).or_default().push(r);
    }
    cells
        .into_values()
        .map(|group| {
            let pooled: Vec<&ResultRow> = group.iter().copied().filter(|r| r.fold.is_none()).collect();
            let used = if pooled.is_empty() { group } else { pooled };
            let stat = |f: &dyn Fn(&ResultRow) -> Option<f64>| {
                let v: Vec<f64> = used.iter().filter_map(|r| f(r)).collect();
                if v.is_empty() {
                    (None, None)
                } else {
                    let (m, s) = mean_sem(&v);
                    (Some(m), Some(s))
                }
            };
            let (mean_accuracy, sem_accuracy) = stat(&|r| r.accuracy);
            let (mean_signal_power, sem_signal_power) = stat(&|r| r.signal_power);
            let first = used[0];
            SummaryRow {
                experiment: first.experiment.clone(),
                method: first.method.clone(),
                retained_fraction: first.retained_fraction,
                d: first.d,
                window_s: first.window_s,
                axis: first.axis.clone(),
                n: used.len(),
                mean_accuracy,
                sem_accuracy,
                mean_signal_power,
                sem_signal_power,
            }
        })
        .collect()
}

pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io = |e: &dyn std::fmt::Display| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    w.write_record([
        "experiment",
        "method",
        "retained_fraction",
        "d",
        "window_s",
        "axis",
        "n",
        "mean_accuracy",
        "sem_accuracy",
        "mean_signal_power",
        "sem_signal_power",
    ])
    .map_err(|e| io(&e))?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.method.clone(),
            opt(&r.retained_fraction),
            opt(&r.d),
            opt(&r.window_s),
            opt(&r.axis),
            r.n.to_string(),
            opt(&r.mean_accuracy),
            opt(&r.sem_accuracy),
            opt(&r.mean_signal_power),
            opt(&r.sem_signal_power),
        ])
        .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub library_version: String,
    pub harness_version: String,
    pub config: ExperimentConfig,
    pub results_file: String,
    pub rows: usize,
    /// Hyperparameters chosen during the run, keyed by cell.
    pub resolved: BTreeMap<String, String>,
}

pub fn write_metadata(meta: &Metadata, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(meta).map_err(|e| HarnessError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<ResultRow> {
        let mut a = ResultRow::new("har_engineered", "src_svd_top_singular", 0)
            .with_confusion(Confusion::from_pairs(3, &[0, 1, 2, 2], &[0, 1, 1, 2]).unwrap());
        a.retained_fraction = Some(0.15);
        a.d = Some(84);
        a.params = "tol=0.0001".into();
        a.wall_time_ms = 12.5;
        let mut b = ResultRow::new("projection_power_study", "gaussian", 3);
        b.d = Some(10);
        b.signal_power = Some(1234.5678);
        let mut c = ResultRow::new("occupancy_fusion", "fused", 1)
            .with_confusion(Confusion::from_pairs(2, &[1, 1], &[1, 1]).unwrap());
        c.fold = Some(2);
        c.axis = Some("fusion, \"quoted\"".into());
        c.window_s = Some(5.0);
        vec![a, b, c]
    }

    #[test]
    fn single_row_csv_has_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_results(&sample_rows()[..1], &p, Format::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("experiment,method,retained_fraction"));
    }

    #[test]
    fn emission_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        for f in [Format::Csv, Format::Json] {
            let a = dir.path().join(format!("a.{}", f.extension()));
            let b = dir.path().join(format!("b.{}", f.extension()));
            emit_results(&sample_rows(), &a, f).unwrap();
            emit_results(&sample_rows(), &b, f).unwrap();
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for f in [Format::Csv, Format::Json] {
            let p = dir.path().join(format!("rows.{}", f.extension()));
            emit_results(&sample_rows(), &p, f).unwrap();
            assert_eq!(read_results(&p, f).unwrap(), sample_rows(), "{f:?}");
        }
    }

    #[test]
    fn accuracy_recomputable_from_confusion() {
        for r in sample_rows() {
            if let Some(c) = &r.confusion {
                assert_eq!(r.accuracy.unwrap(), c.correct() as f64 / c.total() as f64);
            }
        }
    }

    #[test]
    fn empty_rows_rejected_and_bad_path_is_io() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_results(&[], dir.path().join("x.csv"), Format::Csv).is_err());
        let err = emit_results(&sample_rows(), dir.path().join("missing/x.csv"), Format::Csv).unwrap_err();
        assert!(matches!(err, HarnessError::Io(_)));
    }

    #[test]
    fn summary_groups_seeds() {
        let mk = |seed, acc_pairs: (&[usize], &[usize])| {
            let mut r = ResultRow::new("e", "m", seed).with_confusion(Confusion::from_pairs(2, acc_pairs.0, acc_pairs.1).unwrap());
            r.retained_fraction = Some(0.1);
            r
        };
        let rows = vec![mk(0, (&[0, 1], &[0, 1])), mk(1, (&[0, 1], &[0, 0]))];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].n, 2);
        assert_eq!(s[0].mean_accuracy, Some(0.75));
        assert_eq!(s[0].sem_accuracy, Some(0.25));
    }
}
