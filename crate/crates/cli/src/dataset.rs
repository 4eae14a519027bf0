//! Loading, writing and generating datasets.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use screenkit::DesignMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("target column `{0}` not found in header")]
    MissingTarget(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
    /// Where the data came from, e.g. `libsvm:path` or `synthetic:...`.
    pub source: String,
}

impl Dataset {
    pub fn new(x: DesignMatrix, y: Vec<f64>, source: impl Into<String>) -> Result<Self, DataError> {
        if x.n_rows() != y.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} targets",
                x.n_rows(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite target value".into()));
        }
        Ok(Dataset {
            x,
            y,
            feature_names: None,
            source: source.into(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_number(token: &str, line: usize, what: &str) -> Result<f64, DataError> {
    let v: f64 = token.parse().map_err(|_| DataError::Parse {
        line,
        message: format!("invalid {what} `{token}`"),
    })?;
    if !v.is_finite() {
        return Err(DataError::Parse {
            line,
            message: format!("non-finite {what} `{token}`"),
        });
    }
    Ok(v)
}

/// Parse `label idx:val ...` lines (1-based indices) into a sparse matrix.
/// Blank lines and `#` comments are ignored.
pub fn parse_libsvm<R: BufRead>(reader: R, source: &str) -> Result<Dataset, DataError> {
    let mut y = Vec::new();
    let mut triplets = Vec::new();
    let mut n_cols = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| DataError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_number(tokens.next().expect("non-empty line"), lineno, "label")?;
        let row = y.len();
        let mut entries = BTreeMap::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: lineno,
                message: format!("expected `index:value`, found `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: lineno,
                message: format!("invalid feature index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            let val = parse_number(val, lineno, "value")?;
            if entries.insert(idx - 1, val).is_some() {
                return Err(DataError::Parse {
                    line: lineno,
                    message: format!("duplicate feature index {idx}"),
                });
            }
        }
        for (col, val) in entries {
            n_cols = n_cols.max(col + 1);
            if val != 0.0 {
                triplets.push((row, col, val));
            }
        }
        y.push(label);
    }
    if y.is_empty() {
        return Err(DataError::Empty(source.to_string()));
    }
    let x = DesignMatrix::from_triplets(y.len(), n_cols, &triplets)
        .map_err(|e| DataError::Invalid(e.to_string()))?;
    Dataset::new(x, y, format!("libsvm:{source}"))
}

pub fn load_libsvm(path: &Path) -> Result<Dataset, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    parse_libsvm(BufReader::new(file), &path.display().to_string())
}

/// Write one `label idx:val ...` line per row, listing the nonzero entries.
pub fn write_libsvm(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let n = data.n_samples();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for j in 0..data.x.n_cols() {
        for (i, v) in data.x.column(j) {
            if v != 0.0 {
                rows[i].push((j, v));
            }
        }
    }
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&format!("{}", data.y[i]));
        for (j, v) in row {
            out.push_str(&format!(" {}:{}", j + 1, v));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Numeric CSV with a header row; `target` names the response column.
pub fn load_csv(path: &Path, target: &str) -> Result<Dataset, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    parse_csv(file, target, &path.display().to_string())
}

pub fn parse_csv<R: std::io::Read>(reader: R, target: &str, source: &str) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| DataError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let t = header
        .iter()
        .position(|h| h.trim() == target)
        .ok_or_else(|| DataError::MissingTarget(target.to_string()))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != t)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let width = header.len();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| DataError::Parse { line, message: e.to_string() })?;
        if rec.len() != width {
            return Err(DataError::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(width - 1);
        for (c, cell) in rec.iter().enumerate() {
            let v = parse_number(cell.trim(), line, "cell")?;
            if c == t {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::Empty(source.to_string()));
    }
    let x = DesignMatrix::from_rows(&rows).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut data = Dataset::new(x, y, format!("csv:{source}"))?;
    data.feature_names = Some(names);
    Ok(data)
}

/// A synthetic dataset together with the coefficients that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub data: Dataset,
    pub beta_true: Vec<f64>,
}

/// Gaussian design with unit-norm columns, `k_true` coefficients equal to
/// ±1, and noise scaled so that `‖Xβ‖/‖noise‖ = snr` (`snr = ∞` gives no
/// noise; `k_true = 0` gives unit Gaussian noise only). Deterministic in
/// `seed`.
pub fn make_synthetic(n: usize, p: usize, k_true: usize, snr: f64, seed: u64) -> Result<Synthetic, DataError> {
    if n == 0 || p == 0 {
        return Err(DataError::Invalid("n and p must be positive".into()));
    }
    if k_true > p {
        return Err(DataError::Invalid(format!("k_true = {k_true} exceeds p = {p}")));
    }
    if !(snr > 0.0) {
        return Err(DataError::Invalid(format!("snr must be positive, got {snr}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![0.0; n * p];
    for col in cols.chunks_mut(n) {
        for v in col.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let x = DesignMatrix::from_col_major(n, p, cols).map_err(|e| DataError::Invalid(e.to_string()))?;

    let mut beta_true = vec![0.0; p];
    for j in sample(&mut rng, p, k_true) {
        beta_true[j] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let signal = x.matvec(&beta_true).map_err(|e| DataError::Invalid(e.to_string()))?;
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let signal_norm = signal.iter().map(|v| v * v).sum::<f64>().sqrt();
    let noise_norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if snr.is_infinite() {
        0.0
    } else if signal_norm == 0.0 {
        1.0
    } else {
        signal_norm / (snr * noise_norm)
    };
    let y = signal.iter().zip(&noise).map(|(s, e)| s + scale * e).collect();
    let data = Dataset::new(x, y, format!("synthetic:n={n},p={p},k={k_true},snr={snr},seed={seed}"))?;
    Ok(Synthetic { data, beta_true })
}
