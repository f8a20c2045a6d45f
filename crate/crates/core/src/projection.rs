//! Dimension-reducing projection matrices `R ∈ ℝ^{d×n}` and the signal-power
//! objective `E[yᵀy] = trace(R·A·Aᵀ·Rᵀ)` used to compare them.
//!
//! Three constructions are provided:
//!
//! * Gaussian: i.i.d. standard normal entries, rows rescaled to unit norm.
//! * SVD, random columns: `d` left singular vectors of the dictionary chosen
//!   uniformly at random.
//! * SVD, top singular: the `d` left singular vectors paired with the largest
//!   singular values. Among all `R` with orthonormal rows this maximises the
//!   signal power, which then equals `σ₁² + … + σ_d²`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SvdFactors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Gaussian,
    SvdRandomColumns,
    SvdTopSingular,
}

impl ProjectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionMethod::Gaussian => "gaussian",
            ProjectionMethod::SvdRandomColumns => "svd_random_columns",
            ProjectionMethod::SvdTopSingular => "svd_top_singular",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Gaussian, Self::SvdRandomColumns, Self::SvdTopSingular]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Column selection for [`svd_projection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdSelection {
    Random { seed: u64 },
    TopSingular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    matrix: DMatrix<f64>,
    method: ProjectionMethod,
    seed: Option<u64>,
}

impl ProjectionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn method(&self) -> ProjectionMethod {
        self.method
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Output dimension.
    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    /// Input dimension.
    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.n() {
            return Err(Error::param(format!(
                "vector of length {} does not match projection input dimension {}",
                y.len(),
                self.n()
            )));
        }
        Ok(&self.matrix * y)
    }

    pub fn project_slice(&self, y: &[f64]) -> Result<DVector<f64>> {
        self.project(&DVector::from_column_slice(y))
    }

    /// Projects every column of `a`.
    pub fn project_columns(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.n() {
            return Err(Error::param(format!(
                "matrix with {} rows does not match projection input dimension {}",
                a.nrows(),
                self.n()
            )));
        }
        Ok(&self.matrix * a)
    }

    /// Identity-like full projection (`d = n`), useful as a no-op baseline.
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            method: ProjectionMethod::SvdTopSingular,
            seed: None,
        }
    }

    /// CSV with a `# method=...,d=...,n=...,seed=...` header line followed by
    /// one comma-separated row per output dimension. Values use the shortest
    /// round-trip decimal form, so re-import is exact.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# method={},d={},n={},seed={}\n",
            self.method.name(),
            self.d(),
            self.n(),
            self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into())
        );
        for row in self.matrix.row_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(",")).expect("write to String");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::data("projection CSV is missing its header line"))?;
        let mut method = None;
        let mut dims = (None, None);
        let mut seed = None;
        for field in header.split(',') {
            match field.split_once('=') {
                Some(("method", v)) => method = ProjectionMethod::parse(v),
                Some(("d", v)) => dims.0 = v.parse::<usize>().ok(),
                Some(("n", v)) => dims.1 = v.parse::<usize>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => return Err(Error::data(format!("unrecognised header field {field:?}"))),
            }
        }
        let method = method.ok_or_else(|| Error::data("header lacks a valid method"))?;
        let (Some(d), Some(n)) = dims else {
            return Err(Error::data("header lacks d or n"));
        };
        let mut values = Vec::with_capacity(d * n);
        let mut rows = 0;
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::data(format!("row {}: {e}", i + 1)))?;
            if row.len() != n {
                return Err(Error::data(format!("row {} has {} values, expected {n}", i + 1, row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != d {
            return Err(Error::data(format!("expected {d} rows, found {rows}")));
        }
        Ok(Self {
            matrix: DMatrix::from_row_slice(d, n, &values),
            method,
            seed,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&text)
    }
}

/// `floor(fraction · n)`, at least 1.
pub fn retained_dim(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param(format!("retained fraction must be in (0, 1], got {fraction}")));
    }
    Ok(((fraction * n as f64).floor() as usize).max(1))
}

/// Seeded Gaussian projection with unit-norm rows.
pub fn gaussian_projection(d: usize, n: usize, seed: u64) -> Result<ProjectionMatrix> {
    if d == 0 || d >= n {
        return Err(Error::param(format!("gaussian projection needs 0 < d < n, got d = {d}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = DMatrix::from_fn(d, n, |_, _| StandardNormal.sample(&mut rng));
    for mut row in matrix.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    Ok(ProjectionMatrix {
        matrix,
        method: ProjectionMethod::Gaussian,
        seed: Some(seed),
    })
}

/// Projection from the left singular vectors of `a` (the raw dictionary,
/// one training sample per column).
pub fn svd_projection(a: &DMatrix<f64>, d: usize, selection: SvdSelection) -> Result<ProjectionMatrix> {
    let f = crate::solver::svd(a)?;
    svd_projection_from_factors(&f, d, selection)
}

/// As [`svd_projection`], reusing an existing decomposition.
pub fn svd_projection_from_factors(f: &SvdFactors, d: usize, selection: SvdSelection) -> Result<ProjectionMatrix> {
    let rank = f.rank();
    if d == 0 || d > rank {
        return Err(Error::param(format!(
            "SVD projection needs 0 < d <= rank, got d = {d} with rank {rank}"
        )));
    }
    let (columns, method, seed) = match selection {
        SvdSelection::TopSingular => ((0..d).collect::<Vec<_>>(), ProjectionMethod::SvdTopSingular, None),
        SvdSelection::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cols = sample(&mut rng, f.u.ncols(), d).into_vec();
            cols.sort_unstable();
            (cols, ProjectionMethod::SvdRandomColumns, Some(seed))
        }
    };
    let rows: Vec<_> = columns.iter().map(|&c| f.u.column(c).transpose()).collect();
    Ok(ProjectionMatrix {
        matrix: DMatrix::from_rows(&rows),
        method,
        seed,
    })
}

/// `trace(R·A·Aᵀ·Rᵀ) = ‖R·A‖²_F`.
pub fn signal_power(r: &ProjectionMatrix, a: &DMatrix<f64>) -> Result<f64> {
    Ok(r.project_columns(a)?.norm_squared())
}

/// Evaluates `trace(R·G·Rᵀ)` against a precomputed Gram matrix `G = A·Aᵀ`.
/// Cheaper than [`signal_power`] when many `R` are compared on one `A`.
#[derive(Debug, Clone)]
pub struct PowerEvaluator {
    gram: DMatrix<f64>,
}

impl PowerEvaluator {
    pub fn new(a: &DMatrix<f64>) -> Self {
        Self { gram: a * a.transpose() }
    }

    pub fn power(&self, r: &DMatrix<f64>) -> Result<f64> {
        if r.ncols() != self.gram.nrows() {
            return Err(Error::param(format!(
                "projection has {} columns, dictionary has {} rows",
                r.ncols(),
                self.gram.nrows()
            )));
        }
        let rg = r * &self.gram;
        Ok(rg.component_mul(r).sum())
    }
}

/// Sum of the `d` largest squared singular values.
pub fn top_power(f: &SvdFactors, d: usize) -> f64 {
    f.s.iter().take(d).map(|s| s * s).sum()
}

/// A uniformly random `d × n` matrix with orthonormal rows (QR of a Gaussian
/// matrix with the sign of `R`'s diagonal fixed).
pub fn random_orthonormal_rows(d: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 || d > n {
        return Err(Error::param(format!("need 0 < d <= n, got d = {d}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(q.transpose())
}

/// Seeded matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}
