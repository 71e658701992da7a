//! Covariate tables, term specifications, and encoded design matrices.
//!
//! A [`CovariateTable`] holds raw patient covariates (numeric or categorical).
//! A list of [`TermSpec`]s is encoded into a [`DesignMatrix`]: intercept
//! first, categorical predictors as reference-cell dummies (first declared
//! level is the reference), interactions as products of the encoded columns.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One raw covariate column.
#[derive(Debug, Clone)]
pub enum Column {
    Numeric(Vec<f64>),
    /// Level codes index into `levels`; the first level is the reference.
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

/// A named collection of covariate columns of equal length.
#[derive(Debug, Clone, Default)]
pub struct CovariateTable {
    names: Vec<String>,
    columns: Vec<Column>,
    n: usize,
}

/// A model term over raw covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermSpec {
    Main(String),
    Interaction(String, String),
}

impl std::fmt::Display for TermSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TermSpec::Main(a) => write!(f, "{a}"),
            TermSpec::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

impl CovariateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn push_column(&mut self, name: &str, column: Column) -> Result<()> {
        let len = match &column {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        };
        if self.columns.is_empty() {
            self.n = len;
        } else if len != self.n {
            return Err(Error::DimensionMismatch {
                what: format!("covariate column {name}"),
                expected: self.n,
                found: len,
            });
        }
        if self.names.iter().any(|existing| existing == name) {
            return Err(Error::InvalidData(format!("duplicate covariate name {name}")));
        }
        self.names.push(name.to_string());
        self.columns.push(column);
        Ok(())
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite value in covariate {name}")));
        }
        self.push_column(name, Column::Numeric(values))
    }

    /// Add a categorical column from string labels; `levels` fixes the level
    /// order (reference level first).
    pub fn add_categorical(&mut self, name: &str, levels: Vec<String>, labels: &[String]) -> Result<()> {
        let index: HashMap<&str, usize> =
            levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let codes = labels
            .iter()
            .map(|l| {
                index.get(l.as_str()).copied().ok_or_else(|| {
                    Error::InvalidData(format!("unknown level {l} for covariate {name}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.push_column(name, Column::Categorical { levels, codes })
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    /// Encode (name, values) pairs for one raw covariate: a numeric column
    /// passes through unchanged; a categorical one becomes k−1 dummies.
    fn encode_main(&self, name: &str) -> Result<Vec<(String, Vec<f64>)>> {
        let column = self
            .column(name)
            .ok_or_else(|| Error::InvalidData(format!("unknown covariate {name}")))?;
        Ok(match column {
            Column::Numeric(values) => vec![(name.to_string(), values.clone())],
            Column::Categorical { levels, codes } => levels
                .iter()
                .enumerate()
                .skip(1)
                .map(|(code, level)| {
                    let indicator =
                        codes.iter().map(|&c| if c == code { 1.0 } else { 0.0 }).collect();
                    (format!("{name}:{level}"), indicator)
                })
                .collect(),
        })
    }

    /// Encode terms into a design matrix with an `(intercept)` column first.
    /// Returns the matrix together with, for each input term, the indices of
    /// the columns it produced.
    pub fn design(&self, terms: &[TermSpec]) -> Result<(DesignMatrix, Vec<Vec<usize>>)> {
        let mut names = vec!["(intercept)".to_string()];
        let mut columns: Vec<Vec<f64>> = vec![vec![1.0; self.n]];
        let mut groups = Vec::with_capacity(terms.len());
        for term in terms {
            let encoded = match term {
                TermSpec::Main(name) => self.encode_main(name)?,
                TermSpec::Interaction(a, b) => {
                    let left = self.encode_main(a)?;
                    let right = self.encode_main(b)?;
                    let mut out = Vec::new();
                    for (ln, lv) in &left {
                        for (rn, rv) in &right {
                            let values = lv.iter().zip(rv).map(|(x, y)| x * y).collect();
                            out.push((format!("{ln}:{rn}"), values));
                        }
                    }
                    out
                }
            };
            let mut group = Vec::with_capacity(encoded.len());
            for (name, values) in encoded {
                group.push(columns.len());
                names.push(name);
                columns.push(values);
            }
            groups.push(group);
        }
        Ok((DesignMatrix::from_columns(names, columns)?, groups))
    }
}

/// A dense row-major design matrix with named columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DesignMatrix {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                what: "design column names".into(),
                expected: columns.len(),
                found: names.len(),
            });
        }
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidDesign("ragged design columns".into()));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, column) in columns.iter().enumerate() {
            for (i, &v) in column.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Ok(Self { names, data, rows, cols })
    }

    /// A design holding only an intercept column.
    pub fn intercept_only(rows: usize) -> Self {
        Self {
            names: vec!["(intercept)".to_string()],
            data: vec![1.0; rows],
            rows,
            cols: 1,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// A copy containing only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(Error::DimensionMismatch {
                    what: "row selection".into(),
                    expected: self.rows,
                    found: r,
                });
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(Self { names: self.names.clone(), data, rows: rows.len(), cols: self.cols })
    }

    /// Append a named column, returning its index.
    pub fn push_column(&mut self, name: &str, values: &[f64]) -> Result<usize> {
        if values.len() != self.rows {
            return Err(Error::DimensionMismatch {
                what: format!("design column {name}"),
                expected: self.rows,
                found: values.len(),
            });
        }
        let mut data = vec![0.0; self.rows * (self.cols + 1)];
        for i in 0..self.rows {
            data[i * (self.cols + 1)..i * (self.cols + 1) + self.cols]
                .copy_from_slice(&self.data[i * self.cols..(i + 1) * self.cols]);
            data[i * (self.cols + 1) + self.cols] = values[i];
        }
        self.data = data;
        self.cols += 1;
        self.names.push(name.to_string());
        Ok(self.cols - 1)
    }

    /// Verify the selected columns have full column rank, via the spectrum of
    /// the Gram matrix.
    pub fn check_full_rank(&self, columns: &[usize]) -> Result<()> {
        let p = columns.len();
        if p == 0 {
            return Ok(());
        }
        let mut gram = nalgebra::DMatrix::<f64>::zeros(p, p);
        for i in 0..self.rows {
            let row = self.row(i);
            for (a, &ca) in columns.iter().enumerate() {
                for (b, &cb) in columns.iter().enumerate().skip(a) {
                    gram[(a, b)] += row[ca] * row[cb];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let eigen = gram.symmetric_eigen();
        let max = eigen.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let tol = max * 1e-10 * p as f64;
        let rank = eigen.eigenvalues.iter().filter(|&&l| l > tol).count();
        if rank < p {
            let names: Vec<&str> = columns.iter().map(|&c| self.names[c].as_str()).collect();
            return Err(Error::InvalidDesign(format!(
                "rank deficiency: columns {names:?} have rank {rank} < {p}"
            )));
        }
        Ok(())
    }
}

/// η = Xβ over the selected columns.
pub fn linear_predictor(design: &DesignMatrix, columns: &[usize], beta: &[f64]) -> Result<Vec<f64>> {
    if columns.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            what: "linear predictor coefficients".into(),
            expected: columns.len(),
            found: beta.len(),
        });
    }
    Ok((0..design.nrows())
        .map(|i| {
            let row = design.row(i);
            columns.iter().zip(beta).map(|(&c, b)| row[c] * b).sum()
        })
        .collect())
}
