//! Dense datasets, LIBSVM/CSV ingestion, seeded splits and quantile split
//! candidates.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BoostError, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(BoostError::input(format!(
                "matrix buffer has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(BoostError::input("ragged rows"));
        }
        Matrix::new(rows.concat(), rows.len(), cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(BoostError::input("dataset needs at least one row and one column"));
        }
        if labels.len() != features.rows() {
            return Err(BoostError::input(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if features.as_slice().iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(BoostError::input("dataset contains non-finite values"));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(BoostError::input(format!(
                "{} feature names for {} columns",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Maps `{0, 1}` labels to `{-1, +1}`; `-1` is kept as is.
    pub fn to_signed_labels(mut self) -> Result<Self> {
        for (i, y) in self.labels.iter_mut().enumerate() {
            *y = match *y {
                1.0 => 1.0,
                v if v == 0.0 || v == -1.0 => -1.0,
                v => {
                    return Err(BoostError::input(format!(
                        "row {i}: label {v} is not binary (expected 0/1 or -1/+1)"
                    )))
                }
            };
        }
        Ok(self)
    }

    /// SHA-256 over the little-endian bytes of labels and features.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_rows() as u64).to_le_bytes());
        hasher.update((self.n_features() as u64).to_le_bytes());
        for v in self.labels.iter().chain(self.features.as_slice()) {
            hasher.update(v.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based ascending
/// indices. Absent entries are zero; the column count is the largest index.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut cols = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| BoostError::parse(lineno, format!("bad label '{label_tok}'")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| BoostError::parse(lineno, format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| BoostError::parse(lineno, format!("bad index '{idx}'")))?;
            if idx == 0 {
                return Err(BoostError::parse(lineno, "indices are 1-based"));
            }
            if idx <= last {
                return Err(BoostError::parse(
                    lineno,
                    format!("index {idx} is not ascending (previous {last})"),
                ));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| BoostError::parse(lineno, format!("bad value '{val}'")))?;
            if !val.is_finite() {
                return Err(BoostError::parse(lineno, format!("non-finite value '{val}'")));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        cols = cols.max(last);
        labels.push(label);
        entries.push(row);
    }

    if labels.is_empty() {
        return Err(BoostError::Format("no samples".into()));
    }
    if cols == 0 {
        return Err(BoostError::Format("no features".into()));
    }
    let mut data = vec![0.0; labels.len() * cols];
    for (i, row) in entries.iter().enumerate() {
        for &(j, v) in row {
            data[i * cols + j] = v;
        }
    }
    Dataset::new(Matrix::new(data, labels.len(), cols)?, labels)
}

/// Writes LIBSVM text that [`parse_libsvm`] reads back to an identical
/// dataset. Zeros are omitted except where needed to pin the column count.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let p = data.n_features();
    let last_col_present = data.features().column(p - 1).any(|v| v != 0.0);
    for i in 0..data.n_rows() {
        write!(out, "{}", data.labels()[i])?;
        let row = data.features().row(i);
        for (j, &v) in row.iter().enumerate() {
            let pin = i == 0 && j == p - 1 && !last_col_present;
            if v != 0.0 || pin {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// Parses a numeric CSV with a header row; the label column is removed and
/// the rest become features in header order.
pub fn parse_csv<R: std::io::Read>(reader: R, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| BoostError::Format(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = match label {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BoostError::Format(format!("label column '{name}' not found")))?,
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => {
            return Err(BoostError::Format(format!(
                "label column index {i} out of range ({} columns)",
                headers.len()
            )))
        }
    };
    if headers.len() < 2 {
        return Err(BoostError::Format("need a label column and at least one feature".into()));
    }

    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        // Header is line 1.
        let lineno = k + 2;
        let record = record.map_err(|e| BoostError::parse(lineno, e.to_string()))?;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                BoostError::parse(lineno, format!("non-numeric cell '{cell}' in column '{}'", headers[j]))
            })?;
            if j == label_idx {
                labels.push(v);
            } else {
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(BoostError::Format("no samples".into()));
    }
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let n = labels.len();
    Dataset::new(Matrix::new(data, n, names.len())?, labels)?.with_feature_names(names)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    fn sizes(&self, n: usize) -> Result<(usize, usize)> {
        let f = self.train_fraction;
        let nf = n as f64;
        if !(f > 0.0 && f < 1.0) || f * nf < 1.0 || (1.0 - f) * nf < 1.0 {
            return Err(BoostError::input(format!(
                "train fraction {f} leaves an empty side for n={n}"
            )));
        }
        let n_train = ((f * nf).round() as usize).clamp(1, n - 1);
        Ok((n_train, n - n_train))
    }
}

/// Seeded shuffle, then the first `round(fraction * n)` rows train.
pub fn train_test_split(data: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let (n_train, _) = spec.sizes(data.n_rows())?;
    let mut idx: Vec<usize> = (0..data.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

/// Per-feature ascending split candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileIndex {
    thresholds: Vec<Vec<f64>>,
    q: usize,
}

impl QuantileIndex {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.thresholds[feature]
    }

    /// Number of thresholds strictly below `value`; a split at threshold
    /// `k` sends exactly the values with `bin <= k` left.
    pub fn bin(&self, feature: usize, value: f64) -> usize {
        self.thresholds[feature].partition_point(|&t| t < value)
    }
}

/// Builds candidates from sorted-order cut points `ceil(k n / q)`,
/// `k = 1..q-1`, plus the maximum. Features with at most `q` distinct values
/// keep every distinct value, so the search is exhaustive; constant features
/// get no candidates.
pub fn build_quantile_index(data: &Dataset, q: usize) -> Result<QuantileIndex> {
    if q == 0 {
        return Err(BoostError::input("quantile count must be positive"));
    }
    let n = data.n_rows();
    let thresholds = (0..data.n_features())
        .map(|j| {
            let mut col: Vec<f64> = data.features().column(j).collect();
            col.sort_by(f64::total_cmp);
            let mut distinct = col.clone();
            distinct.dedup();
            if distinct.len() <= 1 {
                return Vec::new();
            }
            if distinct.len() <= q {
                return distinct;
            }
            let mut cuts: Vec<f64> = (1..q)
                .map(|k| {
                    let pos = (k * n).div_ceil(q);
                    col[pos.max(1) - 1]
                })
                .collect();
            cuts.push(col[n - 1]);
            cuts.dedup();
            cuts
        })
        .collect();
    Ok(QuantileIndex { thresholds, q })
}
