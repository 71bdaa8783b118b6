//! Incomplete data matrices, missingness patterns, CSV I/O and the
//! block-wise MAR removal used by the simulation study.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed and missing coordinate indices of one row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservedPattern {
    pub observed_idx: Vec<usize>,
    pub missing_idx: Vec<usize>,
}

impl ObservedPattern {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut observed_idx = Vec::new();
        let mut missing_idx = Vec::new();
        for (j, &m) in mask.iter().enumerate() {
            if m {
                observed_idx.push(j);
            } else {
                missing_idx.push(j);
            }
        }
        Self {
            observed_idx,
            missing_idx,
        }
    }

    pub fn dim(&self) -> usize {
        self.observed_idx.len() + self.missing_idx.len()
    }

    pub fn n_observed(&self) -> usize {
        self.observed_idx.len()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_idx.is_empty()
    }
}

/// Distinct patterns of a data matrix and the pattern index of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    patterns: Vec<ObservedPattern>,
    row_pattern: Vec<usize>,
}

impl PatternSet {
    fn build(mask: &[bool], n: usize, p: usize) -> Self {
        let mut lookup: HashMap<&[bool], usize> = HashMap::new();
        let mut patterns = Vec::new();
        let mut row_pattern = Vec::with_capacity(n);
        for i in 0..n {
            let row = &mask[i * p..(i + 1) * p];
            let k = *lookup.entry(row).or_insert_with(|| {
                patterns.push(ObservedPattern::from_mask(row));
                patterns.len() - 1
            });
            row_pattern.push(k);
        }
        Self {
            patterns,
            row_pattern,
        }
    }

    pub fn patterns(&self) -> &[ObservedPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn index_of(&self, row: usize) -> usize {
        self.row_pattern[row]
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_pattern
    }
}

/// An `n × p` matrix with a per-cell observation mask. Values stored in
/// missing cells are placeholders and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    column_names: Vec<String>,
    patterns: PatternSet,
}

impl DataMatrix {
    /// Builds from row-major `values` and `mask` (true = observed).
    pub fn new(
        n: usize,
        p: usize,
        values: Vec<f64>,
        mask: Vec<bool>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidData("matrix has no columns".into()));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        if mask.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: mask.len(),
            });
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: column_names.len(),
            });
        }
        for i in 0..n {
            let row = &mask[i * p..(i + 1) * p];
            if !row.iter().any(|&m| m) {
                return Err(Error::InvalidData(format!("row {i} has no observed cells")));
            }
            for j in 0..p {
                if row[j] && !values[i * p + j].is_finite() {
                    return Err(Error::InvalidData(format!(
                        "row {i}, column {j}: observed value is not finite"
                    )));
                }
            }
        }
        let patterns = PatternSet::build(&mask, n, p);
        Ok(Self {
            n,
            p,
            values,
            mask,
            column_names,
            patterns,
        })
    }

    /// A fully observed matrix.
    pub fn complete(n: usize, p: usize, values: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        Self::new(n, p, values, vec![true; n * p], column_names)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(n * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        let mask = values.iter().map(|v| !v.is_nan()).collect();
        Self::new(n, p, values, mask, default_names(p))
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Raw row including placeholders.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        &self.mask[i * self.p..(i + 1) * self.p]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.p + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j).then(|| self.values[i * self.p + j])
    }

    /// Value of an observed cell.
    #[inline]
    pub fn observed(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.is_observed(i, j), "read of missing cell ({i}, {j})");
        self.values[i * self.p + j]
    }

    pub fn n_missing(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn pattern_of(&self, row: usize) -> &ObservedPattern {
        &self.patterns.patterns[self.patterns.row_pattern[row]]
    }

    /// Copy with every missing cell overwritten by `placeholder`.
    pub fn with_placeholder(&self, placeholder: f64) -> Self {
        let mut out = self.clone();
        for (v, &m) in out.values.iter_mut().zip(&self.mask) {
            if !m {
                *v = placeholder;
            }
        }
        out
    }

    /// Copy with a new mask over the same values.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        let mut values = self.values.clone();
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m {
                *v = f64::NAN;
            }
        }
        Self::new(self.n, self.p, values, mask, self.column_names.clone())
    }

    /// Fully observed copy with `fill(i, j)` written into missing cells.
    pub fn filled<F: FnMut(usize, usize) -> f64>(&self, mut fill: F) -> Result<Self> {
        let mut values = self.values.clone();
        for i in 0..self.n {
            for j in 0..self.p {
                if !self.mask[i * self.p + j] {
                    values[i * self.p + j] = fill(i, j);
                }
            }
        }
        Self::complete(self.n, self.p, values, self.column_names.clone())
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.p);
        let mut mask = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            values.extend_from_slice(self.row(i));
            mask.extend_from_slice(self.mask_row(i));
        }
        Self::new(idx.len(), self.p, values, mask, self.column_names.clone())
    }
}

pub fn pattern_of(row: usize, d: &DataMatrix) -> &ObservedPattern {
    d.pattern_of(row)
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("V{j}")).collect()
}

pub const DEFAULT_MISSING_TOKENS: [&str; 2] = ["", "NA"];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            path: path.to_path_buf(),
            line,
            column: len as usize,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a comma-separated file with a header row.
pub fn read_csv<P: AsRef<Path>>(path: P, missing_tokens: &[&str]) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let column_names: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let p = column_names.len();
    if p == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: "empty header".into(),
        });
    }
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(n + 2, |p| p.line() as usize);
        let mut any = false;
        for (j, cell) in rec.iter().enumerate() {
            if missing_tokens.contains(&cell) {
                values.push(f64::NAN);
                mask.push(false);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                column: j + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: j + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
            mask.push(true);
            any = true;
        }
        if !any {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: 1,
                message: "row has no observed values".into(),
            });
        }
        n += 1;
    }
    DataMatrix::new(n, p, values, mask, column_names)
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes with a header row; missing cells become `NA`.
pub fn write_csv<P: AsRef<Path>>(path: P, d: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let rows = (0..d.nrows()).map(|i| {
        (0..d.ncols())
            .map(|j| d.get(i, j).map_or_else(|| "NA".to_string(), fmt_real))
            .collect::<Vec<_>>()
    });
    write_table(path, d.column_names(), rows)
}

/// Writes a header and string rows as CSV.
pub fn write_table<P, I, R, S>(path: P, header: &[String], rows: I) -> Result<()>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Writes an `n × k` real matrix given as rows.
pub fn write_matrix<P: AsRef<Path>>(path: P, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    write_table(
        path,
        header,
        rows.iter().map(|r| r.iter().map(|&v| fmt_real(v)).collect::<Vec<_>>()),
    )
}

pub fn write_labels<P: AsRef<Path>>(path: P, labels: &[usize]) -> Result<()> {
    write_table(
        path,
        &["label".to_string()],
        labels.iter().map(|l| [l.to_string()]),
    )
}

/// Reads the first column of a CSV with header as integer labels.
pub fn read_labels<P: AsRef<Path>>(path: P) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let cell = rec.get(0).unwrap_or("");
        let v: usize = cell.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: k + 2,
            column: 1,
            message: format!("cannot parse {cell:?} as a label"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Writes a 0/1 matrix, 1 marking cells that are `true` in `flags`.
pub fn write_mask<P: AsRef<Path>>(path: P, header: &[String], p: usize, flags: &[bool]) -> Result<()> {
    write_table(
        path,
        header,
        flags
            .chunks(p)
            .map(|r| r.iter().map(|&b| if b { "1" } else { "0" }).collect::<Vec<_>>()),
    )
}

/// Reads a 0/1 matrix written by [`write_mask`].
pub fn read_mask<P: AsRef<Path>>(path: P) -> Result<(usize, usize, Vec<bool>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let p = rdr.headers().map_err(|e| csv_err(path, e))?.len();
    let mut flags = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (j, cell) in rec.iter().enumerate() {
            flags.push(match cell {
                "1" => true,
                "0" => false,
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: n + 2,
                        column: j + 1,
                        message: format!("expected 0 or 1, found {cell:?}"),
                    })
                }
            });
        }
        n += 1;
    }
    Ok((n, p, flags))
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<P: AsRef<Path>, T: Serialize>(path: P, value: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// One of the three block-wise removal patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarPattern {
    One,
    Two,
    Three,
}

impl MarPattern {
    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            _ => Err(Error::invalid("pattern", format!("must be 1, 2 or 3, got {k}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
        }
    }

    /// Removal counts per block at 5% of 600 rows.
    pub fn base_counts(self) -> [usize; 3] {
        match self {
            Self::One => [4, 20, 6],
            Self::Two => [20, 4, 6],
            Self::Three => [6, 4, 20],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarSpec {
    pub pattern: MarPattern,
    pub rate: f64,
    /// Cells removed per column from the top, middle and bottom blocks.
    pub block_counts: [usize; 3],
}

impl MarSpec {
    /// Scales the pattern's block proportions to `round(n·rate)` removals
    /// per column using largest remainders.
    pub fn new(pattern: MarPattern, rate: f64, n: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid("rate", format!("must lie in [0, 1), got {rate}")));
        }
        let total = (n as f64 * rate).round() as usize;
        let base = pattern.base_counts();
        let base_sum: usize = base.iter().sum();
        let exact: Vec<f64> = base
            .iter()
            .map(|&b| total as f64 * b as f64 / base_sum as f64)
            .collect();
        let mut counts = [0usize; 3];
        for k in 0..3 {
            counts[k] = exact[k].floor() as usize;
        }
        let mut left = total - counts.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra)
        });
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        Ok(Self {
            pattern,
            rate,
            block_counts: counts,
        })
    }

    pub fn total(&self) -> usize {
        self.block_counts.iter().sum()
    }
}

fn block_bounds(n: usize) -> [(usize, usize); 3] {
    let b = n.div_ceil(3);
    let first = b.min(n);
    let second = (2 * b).min(n);
    [(0, first), (first, second), (second, n)]
}

/// Removes cells column by column. For each column `c` the rows are ranked by
/// column `c` in descending order, split into three consecutive blocks, and
/// `block_counts[k]` cells of column `c+1` (wrapping to the first column) are
/// removed uniformly at random within block `k`. Rows are never left without
/// an observed cell.
pub fn apply_mar<R: Rng + ?Sized>(d: &DataMatrix, spec: &MarSpec, rng: &mut R) -> Result<DataMatrix> {
    if !d.is_complete() {
        return Err(Error::InvalidData("MAR removal needs a complete matrix".into()));
    }
    let (n, p) = (d.nrows(), d.ncols());
    let bounds = block_bounds(n);
    for k in 0..3 {
        let size = bounds[k].1 - bounds[k].0;
        if spec.block_counts[k] > size {
            return Err(Error::invalid(
                "block_counts",
                format!("block {k} has {size} rows but {} removals were requested", spec.block_counts[k]),
            ));
        }
    }
    if spec.total() == 0 {
        return Ok(d.clone());
    }
    let mut mask = vec![true; n * p];
    let mut observed_in_row = vec![p; n];
    for c in 0..p {
        let target = (c + 1) % p;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d.observed(b, c).total_cmp(&d.observed(a, c)));
        for k in 0..3 {
            let want = spec.block_counts[k];
            if want == 0 {
                continue;
            }
            let eligible: Vec<usize> = order[bounds[k].0..bounds[k].1]
                .iter()
                .copied()
                .filter(|&i| observed_in_row[i] > 1 && mask[i * p + target])
                .collect();
            if want > eligible.len() {
                return Err(Error::InvalidData(format!(
                    "column {target}, block {k}: only {} removable cells for {want} removals",
                    eligible.len()
                )));
            }
            for pick in rand::seq::index::sample(rng, eligible.len(), want) {
                let i = eligible[pick];
                mask[i * p + target] = false;
                observed_in_row[i] -= 1;
            }
        }
    }
    d.with_mask(mask)
}
