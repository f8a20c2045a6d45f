//! Reader and writer for the UCI "Human Activity Recognition Using
//! Smartphones" directory layout:
//!
//! ```text
//! <root>/activity_labels.txt            (optional, "1 WALKING" ...)
//! <root>/train/X_train.txt              561 engineered features per row
//! <root>/train/y_train.txt              activity id 1..=6 per row
//! <root>/train/subject_train.txt        subject id per row (optional)
//! <root>/train/Inertial Signals/total_acc_{x,y,z}_train.txt   128 samples per row
//! <root>/test/...                        same with the `test` suffix
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample};
use crate::error::{Error, Result};

/// Activity names in label order (file ids 1..=6).
pub const HAR_ACTIVITY_NAMES: [&str; 6] = [
    "WALKING",
    "WALKING_UPSTAIRS",
    "WALKING_DOWNSTAIRS",
    "SITTING",
    "STANDING",
    "LAYING",
];

const ENGINEERED_DIM: usize = 561;
const WINDOW_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarAxis {
    X,
    Y,
    Z,
}

impl HarAxis {
    pub const ALL: [HarAxis; 3] = [HarAxis::X, HarAxis::Y, HarAxis::Z];

    fn suffix(self) -> &'static str {
        match self {
            HarAxis::X => "x",
            HarAxis::Y => "y",
            HarAxis::Z => "z",
        }
    }
}

impl std::fmt::Display for HarAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.suffix())
    }
}

/// Which view of the dataset to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarVariant {
    /// The 561 engineered features of `X_{split}.txt`.
    Engineered561,
    /// One 128-sample total-acceleration window per row for a single axis.
    RawAxis(HarAxis),
}

impl HarVariant {
    pub fn dim(self) -> usize {
        match self {
            HarVariant::Engineered561 => ENGINEERED_DIM,
            HarVariant::RawAxis(_) => WINDOW_LEN,
        }
    }

    fn feature_path(self, root: &Path, split: &str) -> PathBuf {
        match self {
            HarVariant::Engineered561 => root.join(split).join(format!("X_{split}.txt")),
            HarVariant::RawAxis(axis) => root
                .join(split)
                .join("Inertial Signals")
                .join(format!("total_acc_{}_{split}.txt", axis.suffix())),
        }
    }
}

/// Loads the predefined train and test splits. Labels are remapped from the
/// file's 1..=6 to 0..=5.
pub fn load_uci_har(root: impl AsRef<Path>, variant: HarVariant) -> Result<(Dataset, Dataset)> {
    let root = root.as_ref();
    let names = read_activity_names(root)?;
    let train = load_split(root, "train", variant, &names)?;
    let test = load_split(root, "test", variant, &names)?;
    Ok((train, test))
}

fn read_activity_names(root: &Path) -> Result<Vec<String>> {
    let path = root.join("activity_labels.txt");
    if !path.exists() {
        return Ok(HAR_ACTIVITY_NAMES.iter().map(|s| s.to_string()).collect());
    }
    let text = read(&path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (Some(id), Some(name)) = (parts.next(), parts.next()) else {
            continue;
        };
        let id: usize = id
            .parse()
            .ok()
            .filter(|&id| id >= 1)
            .ok_or_else(|| format_err(&path, lineno + 1, format!("bad activity id {id:?}")))?;
        entries.push((id, name.to_string()));
    }
    let mut names = vec![String::new(); entries.iter().map(|e| e.0).max().unwrap_or(0)];
    for (id, name) in entries {
        names[id - 1] = name;
    }
    if let Some(i) = names.iter().position(|n| n.is_empty()) {
        return Err(format_err(&path, 0, format!("activity id {} missing", i + 1)));
    }
    Ok(names)
}

fn load_split(root: &Path, split: &str, variant: HarVariant, names: &[String]) -> Result<Dataset> {
    let x_path = variant.feature_path(root, split);
    let y_path = root.join(split).join(format!("y_{split}.txt"));
    let subject_path = root.join(split).join(format!("subject_{split}.txt"));

    let rows = parse_matrix(&x_path, Some(variant.dim()))?;
    let labels = parse_matrix(&y_path, Some(1))?;
    if rows.len() != labels.len() {
        return Err(format_err(
            &y_path,
            labels.len(),
            format!("{} labels but {} feature rows in {}", labels.len(), rows.len(), x_path.display()),
        ));
    }
    let subjects = if subject_path.exists() {
        let s = parse_matrix(&subject_path, Some(1))?;
        if s.len() != rows.len() {
            return Err(format_err(
                &subject_path,
                s.len(),
                format!("{} subject ids but {} feature rows", s.len(), rows.len()),
            ));
        }
        Some(s)
    } else {
        None
    };

    let mut samples = Vec::with_capacity(rows.len());
    for (i, (features, label)) in rows.into_iter().zip(labels).enumerate() {
        let raw = label[0];
        if raw.fract() != 0.0 || raw < 1.0 || raw > names.len() as f64 {
            return Err(format_err(&y_path, i + 1, format!("activity label {raw} not in 1..={}", names.len())));
        }
        let subject = subjects.as_ref().map(|s| s[i][0] as u32);
        samples.push(LabeledSample {
            features,
            label: raw as usize - 1,
            subject,
        });
    }
    Dataset::new(samples, names.to_vec())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Ingestion {
        path: path.to_path_buf(),
        source,
    })
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Whitespace-separated decimal rows. Blank lines are skipped.
fn parse_matrix(path: &Path, width: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format_err(path, lineno + 1, format!("non-numeric token {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(w) = width {
            if row.len() != w {
                return Err(format_err(path, lineno + 1, format!("expected {w} values, found {}", row.len())));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `train` and `test` in the published layout for `variant`.
/// Subject files are written only when every sample carries a subject id.
pub fn write_uci_har(root: impl AsRef<Path>, train: &Dataset, test: &Dataset, variant: HarVariant) -> Result<()> {
    let root = root.as_ref();
    for ds in [train, test] {
        if ds.dim() != variant.dim() {
            return Err(Error::param(format!(
                "dataset has dimension {} but {variant:?} requires {}",
                ds.dim(),
                variant.dim()
            )));
        }
    }
    fs::create_dir_all(root)?;
    let mut labels = String::new();
    for (i, name) in train.class_names().iter().enumerate() {
        writeln!(labels, "{} {name}", i + 1).expect("write to String");
    }
    fs::write(root.join("activity_labels.txt"), labels)?;

    for (split, ds) in [("train", train), ("test", test)] {
        let x_path = variant.feature_path(root, split);
        fs::create_dir_all(x_path.parent().expect("feature path has a parent"))?;

        let mut x = String::new();
        let mut y = String::new();
        let mut subj = String::new();
        for s in ds.samples() {
            for v in &s.features {
                x.push(' ');
                x.push_str(&fixed_width(*v));
            }
            x.push('\n');
            writeln!(y, "{}", s.label + 1).expect("write to String");
            if let Some(id) = s.subject {
                writeln!(subj, "{id}").expect("write to String");
            }
        }
        fs::write(&x_path, x)?;
        fs::write(root.join(split).join(format!("y_{split}.txt")), y)?;
        if ds.samples().iter().all(|s| s.subject.is_some()) {
            fs::write(root.join(split).join(format!("subject_{split}.txt")), subj)?;
        }
    }
    Ok(())
}

/// `-2.0294171e-002` style: 8 significant digits, three-digit exponent,
/// right-aligned to 15 characters.
fn fixed_width(v: f64) -> String {
    let sci = format!("{v:.7e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{:>15}", format!("{mantissa}e{sign}{:03}", exp.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(dim: usize, per_class: usize, offset: f64) -> Dataset {
        let samples = (0..6 * per_class)
            .map(|i| LabeledSample {
                features: (0..dim).map(|j| ((i * dim + j) as f64 * 0.37 + offset).sin()).collect(),
                label: i % 6,
                subject: Some(1 + (i % 3) as u32),
            })
            .collect();
        Dataset::new(samples, HAR_ACTIVITY_NAMES.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn fixed_width_matches_published_style() {
        assert_eq!(fixed_width(0.28858451), " 2.8858451e-001");
        assert_eq!(fixed_width(-0.020294171), "-2.0294171e-002");
        assert_eq!(fixed_width(0.0), " 0.0000000e+000");
        assert_eq!("-2.0294171e-002".parse::<f64>().unwrap(), -0.020294171);
    }

    #[test]
    fn engineered_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (train, test) = (synthetic(561, 3, 0.0), synthetic(561, 2, 1.0));
        write_uci_har(dir.path(), &train, &test, HarVariant::Engineered561).unwrap();
        let (tr, te) = load_uci_har(dir.path(), HarVariant::Engineered561).unwrap();
        assert_eq!(tr.dim(), 561);
        assert_eq!(tr.class_count(), 6);
        assert_eq!(tr.labels(), train.labels());
        assert_eq!(te.len(), test.len());
        assert_eq!(tr.samples()[4].subject, Some(2));
    }

    #[test]
    fn raw_axis_has_window_dim() {
        let dir = tempfile::tempdir().unwrap();
        let (train, test) = (synthetic(128, 2, 0.0), synthetic(128, 1, 2.0));
        write_uci_har(dir.path(), &train, &test, HarVariant::RawAxis(HarAxis::X)).unwrap();
        let (tr, _) = load_uci_har(dir.path(), HarVariant::RawAxis(HarAxis::X)).unwrap();
        assert_eq!(tr.dim(), 128);
        // Other axes were not written.
        let err = load_uci_har(dir.path(), HarVariant::RawAxis(HarAxis::Y)).unwrap_err();
        assert!(err.to_string().contains("total_acc_y_train.txt"), "{err}");
    }

    #[test]
    fn missing_labels_is_ingestion_error_naming_file() {
        let dir = tempfile::tempdir().unwrap();
        write_uci_har(dir.path(), &synthetic(561, 1, 0.0), &synthetic(561, 1, 0.0), HarVariant::Engineered561)
            .unwrap();
        fs::remove_file(dir.path().join("train/y_train.txt")).unwrap();
        match load_uci_har(dir.path(), HarVariant::Engineered561) {
            Err(Error::Ingestion { path, .. }) => assert!(path.ends_with("y_train.txt")),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn row_count_mismatch_and_bad_token() {
        let dir = tempfile::tempdir().unwrap();
        write_uci_har(dir.path(), &synthetic(561, 1, 0.0), &synthetic(561, 1, 0.0), HarVariant::Engineered561)
            .unwrap();
        let y = dir.path().join("train/y_train.txt");
        fs::write(&y, "1\n2\n3\n").unwrap();
        assert!(matches!(load_uci_har(dir.path(), HarVariant::Engineered561), Err(Error::Format { .. })));

        fs::write(&y, "1\n2\nthree\n4\n5\n6\n").unwrap();
        match load_uci_har(dir.path(), HarVariant::Engineered561) {
            Err(Error::Format { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("three"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn text_round_trip_keeps_six_significant_digits(
            values in prop::collection::vec(-1e6f64..1e6, 128 * 2),
        ) {
            let samples = values
                .chunks(128)
                .enumerate()
                .map(|(i, c)| LabeledSample::new(c.to_vec(), i))
                .collect();
            let ds = Dataset::with_class_count(samples, 2).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_uci_har(dir.path(), &ds, &ds, HarVariant::RawAxis(HarAxis::Z)).unwrap();
            let (back, _) = load_uci_har(dir.path(), HarVariant::RawAxis(HarAxis::Z)).unwrap();
            prop_assert_eq!(back.labels(), ds.labels());
            for (a, b) in back.samples().iter().zip(ds.samples()) {
                for (x, y) in a.features.iter().zip(&b.features) {
                    prop_assert!((x - y).abs() <= 5e-7 * y.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
}
