//! Labeled tabular input: the group vector `y`, the covariate matrix `x`,
//! and the per-column empirical distribution summaries built on top of it.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{GlpError, Result};

/// A labeled n×d sample with groups re-indexed to `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<usize>,
    k: usize,
    group_names: Vec<String>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from a covariate matrix and arbitrary group labels.
    ///
    /// Labels are re-indexed to `1..=k` in order of first appearance; the
    /// original spellings are kept in [`Dataset::group_names`].
    pub fn from_labels<S: AsRef<str>>(
        x: DMatrix<f64>,
        labels: &[S],
        column_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(GlpError::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        if let Some(names) = &column_names {
            if names.len() != x.ncols() {
                return Err(GlpError::DimensionMismatch(format!(
                    "{} column names for {} columns",
                    names.len(),
                    x.ncols()
                )));
            }
        }
        if x.ncols() == 0 {
            return Err(GlpError::NoCovariates);
        }
        if let Some((pos, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (pos % x.nrows(), pos / x.nrows());
            return Err(GlpError::Parse {
                row: row + 1,
                column: col.to_string(),
                message: "non-finite value".into(),
            });
        }

        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut group_names = Vec::new();
        let mut y = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            let next = index.len() + 1;
            let g = *index.entry(label).or_insert_with(|| {
                group_names.push(label.to_string());
                next
            });
            y.push(g);
        }
        let k = group_names.len();
        if k < 2 {
            return Err(GlpError::SingleGroup(k));
        }
        let mut counts = vec![0usize; k];
        for &g in &y {
            counts[g - 1] += 1;
        }
        if let Some(g) = counts.iter().position(|&c| c < 2) {
            return Err(GlpError::DegenerateGroup {
                label: group_names[g].clone(),
                count: counts[g],
            });
        }

        Ok(Self {
            x,
            y,
            k,
            group_names,
            column_names,
        })
    }

    /// Builds a dataset from integer group identifiers.
    pub fn new(x: DMatrix<f64>, groups: &[usize]) -> Result<Self> {
        let labels: Vec<String> = groups.iter().map(|g| g.to_string()).collect();
        Self::from_labels(x, &labels, None)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Group labels in `1..=k`.
    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Original label of each internal group, indexed by `group - 1`.
    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Name of column `j`, falling back to `x{j+1}` when the input had no header.
    pub fn column_name(&self, j: usize) -> String {
        match &self.column_names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &g in &self.y {
            counts[g - 1] += 1;
        }
        counts
    }
}

/// Which CSV column holds the group labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

impl LabelColumn {
    /// Interprets a `--label` argument: a header name if one matches,
    /// otherwise a zero-based index.
    pub fn parse(spec: &str) -> Self {
        match spec.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(spec.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label: LabelColumn,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            label: LabelColumn::Index(0),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    read_csv(File::open(path)?, options)
}

/// Parses comma-delimited UTF-8 input into a [`Dataset`].
///
/// Every non-label cell must parse as a finite decimal number; an empty cell
/// is a missing value and rejects the whole input.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(false)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        Some(
            rdr.headers()?
                .iter()
                .map(|s| s.trim().to_string())
                .collect(),
        )
    } else {
        None
    };

    let mut label_idx: Option<usize> = None;
    if let Some(h) = &header {
        label_idx = match &options.label {
            LabelColumn::Name(name) => Some(
                h.iter()
                    .position(|c| c == name)
                    .ok_or_else(|| GlpError::LabelColumnNotFound(name.clone()))?,
            ),
            LabelColumn::Index(i) => {
                // A header cell spelled like the index wins over positional lookup.
                let by_name = h.iter().position(|c| *c == i.to_string());
                Some(by_name.unwrap_or(*i))
            }
        };
    } else if let LabelColumn::Name(name) = &options.label {
        return Err(GlpError::LabelColumnNotFound(format!(
            "{name} (input has no header row)"
        )));
    }

    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cols = record.len();
        let li = match (label_idx, &options.label) {
            (Some(i), _) => i,
            (None, LabelColumn::Index(i)) => *i,
            (None, LabelColumn::Name(_)) => unreachable!(),
        };
        if li >= cols {
            return Err(GlpError::LabelColumnNotFound(format!(
                "index {li} (row has {cols} columns)"
            )));
        }
        width.get_or_insert(cols);
        let column_label = |j: usize| match &header {
            Some(h) => h[j].clone(),
            None => j.to_string(),
        };
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if j == li {
                if cell.is_empty() {
                    return Err(GlpError::MissingValue {
                        row: line,
                        column: column_label(j),
                    });
                }
                labels.push(cell.to_string());
                continue;
            }
            if cell.is_empty() {
                return Err(GlpError::MissingValue {
                    row: line,
                    column: column_label(j),
                });
            }
            let v: f64 = cell.parse().map_err(|_| GlpError::Parse {
                row: line,
                column: column_label(j),
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(GlpError::Parse {
                    row: line,
                    column: column_label(j),
                    message: format!("{cell:?} is not finite"),
                });
            }
            values.push(v);
        }
    }

    let n = labels.len();
    let width = width.unwrap_or(0);
    if n == 0 {
        return Err(GlpError::SingleGroup(0));
    }
    if width < 2 {
        return Err(GlpError::NoCovariates);
    }
    let d = width - 1;
    let x = DMatrix::from_row_slice(n, d, &values);
    let li = label_idx.unwrap_or_else(|| match options.label {
        LabelColumn::Index(i) => i,
        LabelColumn::Name(_) => unreachable!(),
    });
    let column_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(j, _)| *j != li)
            .map(|(_, s)| s)
            .collect()
    });
    Dataset::from_labels(x, &labels, column_names)
}

/// Empirical distribution of one column: distinct support, probability mass
/// and mid-distribution values.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    distinct_values: Vec<f64>,
    pmf: Vec<f64>,
    mid_cdf: Vec<f64>,
    tie_factor: f64,
    n: usize,
}

impl ColumnSummary {
    /// Sorted distinct observed values.
    pub fn distinct_values(&self) -> &[f64] {
        &self.distinct_values
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `F(x) - p(x)/2` at each distinct value.
    pub fn mid_cdf(&self) -> &[f64] {
        &self.mid_cdf
    }

    /// `1 - Σ p³`; zero for a constant column.
    pub fn tie_factor(&self) -> f64 {
        self.tie_factor
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support_size(&self) -> usize {
        self.distinct_values.len()
    }

    /// Mid-distribution transform of an arbitrary value against this column's
    /// empirical distribution. Unobserved values get `F(x)` since `p(x) = 0`.
    pub fn mid_cdf_at(&self, value: f64) -> f64 {
        match self
            .distinct_values
            .binary_search_by(|probe| probe.total_cmp(&value))
        {
            Ok(i) => self.mid_cdf[i],
            Err(i) => self.pmf[..i].iter().sum(),
        }
    }

    /// Position of `value` in the distinct support, if observed.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.distinct_values
            .binary_search_by(|probe| probe.total_cmp(&value))
            .ok()
    }
}

pub fn summarize_column(values: &[f64]) -> ColumnSummary {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));

    let mut distinct_values = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in sorted {
        match distinct_values.last() {
            Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
            _ => {
                // Normalise -0.0 so lookups by total order find it.
                distinct_values.push(if v == 0.0 { 0.0 } else { v });
                counts.push(1);
            }
        }
    }

    let nf = n as f64;
    let mut cumulative = 0usize;
    let mut pmf = Vec::with_capacity(counts.len());
    let mut mid_cdf = Vec::with_capacity(counts.len());
    for &c in &counts {
        cumulative += c;
        pmf.push(c as f64 / nf);
        mid_cdf.push((cumulative as f64 - 0.5 * c as f64) / nf);
    }
    let tie_factor = 1.0 - pmf.iter().map(|p| p * p * p).sum::<f64>();

    ColumnSummary {
        distinct_values,
        pmf,
        mid_cdf,
        tie_factor,
        n,
    }
}
