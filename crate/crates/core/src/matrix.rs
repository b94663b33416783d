//! Row-major sparse matrix used as the feature matrix for every model.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One sparse row: `(column, value)` pairs with strictly increasing columns.
pub type SparseRow = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<SparseRow>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(n_cols: usize, rows: Vec<SparseRow>) -> Result<Self> {
        let mut m = SparseMatrix::new(n_cols);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Builds a matrix from dense rows, dropping explicit zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = SparseMatrix::new(n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            m.rows.push(
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j as u32, *v))
                    .collect(),
            );
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: SparseRow) -> Result<()> {
        for w in row.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid("sparse row", "columns must be strictly increasing"));
            }
        }
        if let Some(&(c, _)) = row.last() {
            if c as usize >= self.n_cols {
                return Err(Error::DimensionMismatch {
                    expected: self.n_cols,
                    actual: c as usize + 1,
                });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&(j as u32), |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().flatten().all(|(_, v)| v.is_finite())
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> SparseMatrix {
        SparseMatrix {
            n_cols: self.n_cols,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; self.n_cols];
                for &(c, v) in r {
                    d[c as usize] = v;
                }
                d
            })
            .collect()
    }
}

/// Dot product of a sparse row with a dense weight vector.
pub fn dot(row: &[(u32, f64)], w: &[f64]) -> f64 {
    row.iter().map(|&(c, v)| v * w[c as usize]).sum()
}
