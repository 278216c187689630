use serde::{Deserialize, Serialize};

use crate::error::{PurpleError, Result};

/// Row-indexed feature matrix, stored either densely (row-major) or as
/// compressed sparse rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_dims: usize,
    storage: Storage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Storage {
    Dense(Vec<f64>),
    Sparse {
        row_ptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub enum RowView<'a> {
    Dense(&'a [f64]),
    Sparse { indices: &'a [u32], values: &'a [f64] },
}

impl<'a> RowView<'a> {
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        match *self {
            RowView::Dense(x) => x.iter().zip(w).map(|(a, b)| a * b).sum(),
            RowView::Sparse { indices, values } => indices
                .iter()
                .zip(values)
                .map(|(&j, v)| v * w[j as usize])
                .sum(),
        }
    }

    /// Adds `scale * x` into `acc`.
    #[inline]
    pub fn axpy(&self, scale: f64, acc: &mut [f64]) {
        match *self {
            RowView::Dense(x) => {
                for (a, v) in acc.iter_mut().zip(x) {
                    *a += scale * v;
                }
            }
            RowView::Sparse { indices, values } => {
                for (&j, v) in indices.iter().zip(values) {
                    acc[j as usize] += scale * v;
                }
            }
        }
    }

    /// Calls `f(index, value)` for every nonzero entry, in ascending index order.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            RowView::Dense(x) => {
                for (j, &v) in x.iter().enumerate() {
                    if v != 0.0 {
                        f(j, v);
                    }
                }
            }
            RowView::Sparse { indices, values } => {
                for (&j, &v) in indices.iter().zip(values) {
                    if v != 0.0 {
                        f(j as usize, v);
                    }
                }
            }
        }
    }

    pub fn to_dense(&self, n_dims: usize) -> Vec<f64> {
        match *self {
            RowView::Dense(x) => x.to_vec(),
            RowView::Sparse { .. } => {
                let mut out = vec![0.0; n_dims];
                self.for_each_nonzero(|j, v| out[j] = v);
                out
            }
        }
    }
}

impl FeatureMatrix {
    pub fn dense(n_rows: usize, n_dims: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_dims {
            return Err(PurpleError::InvalidInput(format!(
                "dense matrix {n_rows}x{n_dims} needs {} values, got {}",
                n_rows * n_dims,
                values.len()
            )));
        }
        Ok(FeatureMatrix {
            n_rows,
            n_dims,
            storage: Storage::Dense(values),
        })
    }

    pub fn from_dense_rows(n_dims: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * n_dims);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_dims {
                return Err(PurpleError::InvalidInput(format!(
                    "row {i} has {} values, expected {n_dims}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::dense(rows.len(), n_dims, values)
    }

    /// Builds a sparse matrix from per-row `(index, value)` lists. Indices
    /// must be strictly increasing within a row and below `n_dims`.
    pub fn from_sparse_rows(n_dims: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut builder = SparseBuilder::new(n_dims);
        for r in rows {
            builder.push_row(r)?;
        }
        Ok(builder.finish())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_> {
        match &self.storage {
            Storage::Dense(v) => RowView::Dense(&v[i * self.n_dims..(i + 1) * self.n_dims]),
            Storage::Sparse {
                row_ptr,
                indices,
                values,
            } => {
                let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                RowView::Sparse {
                    indices: &indices[lo..hi],
                    values: &values[lo..hi],
                }
            }
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = RowView<'_>> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// New matrix holding the given rows, in the given order, with the same
    /// storage kind.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        match &self.storage {
            Storage::Dense(v) => {
                let d = self.n_dims;
                let mut out = Vec::with_capacity(rows.len() * d);
                for &i in rows {
                    out.extend_from_slice(&v[i * d..(i + 1) * d]);
                }
                FeatureMatrix {
                    n_rows: rows.len(),
                    n_dims: d,
                    storage: Storage::Dense(out),
                }
            }
            Storage::Sparse {
                row_ptr,
                indices,
                values,
            } => {
                let mut new_ptr = Vec::with_capacity(rows.len() + 1);
                new_ptr.push(0);
                let mut new_idx = Vec::new();
                let mut new_val = Vec::new();
                for &i in rows {
                    let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                    new_idx.extend_from_slice(&indices[lo..hi]);
                    new_val.extend_from_slice(&values[lo..hi]);
                    new_ptr.push(new_idx.len());
                }
                FeatureMatrix {
                    n_rows: rows.len(),
                    n_dims: self.n_dims,
                    storage: Storage::Sparse {
                        row_ptr: new_ptr,
                        indices: new_idx,
                        values: new_val,
                    },
                }
            }
        }
    }

    /// Drops every entry whose column is in `columns`; the dimensionality is
    /// unchanged, so the dropped columns become all-zero.
    pub fn without_columns(&self, columns: &[usize]) -> FeatureMatrix {
        let drop: std::collections::HashSet<usize> = columns.iter().copied().collect();
        match &self.storage {
            Storage::Dense(v) => {
                let d = self.n_dims;
                let mut out = v.clone();
                for i in 0..self.n_rows {
                    for &j in &drop {
                        if j < d {
                            out[i * d + j] = 0.0;
                        }
                    }
                }
                FeatureMatrix {
                    n_rows: self.n_rows,
                    n_dims: d,
                    storage: Storage::Dense(out),
                }
            }
            Storage::Sparse { .. } => {
                let mut builder = SparseBuilder::new(self.n_dims);
                let mut buf = Vec::new();
                for row in self.rows() {
                    buf.clear();
                    row.for_each_nonzero(|j, v| {
                        if !drop.contains(&j) {
                            buf.push((j, v));
                        }
                    });
                    builder
                        .push_row(&buf)
                        .expect("entries taken from a valid row stay valid");
                }
                builder.finish()
            }
        }
    }

    /// Converts to sparse storage (no-op for sparse input).
    pub fn to_sparse(&self) -> FeatureMatrix {
        if self.is_sparse() {
            return self.clone();
        }
        let mut builder = SparseBuilder::new(self.n_dims);
        let mut buf = Vec::new();
        for row in self.rows() {
            buf.clear();
            row.for_each_nonzero(|j, v| buf.push((j, v)));
            builder.push_row(&buf).expect("dense rows are valid");
        }
        builder.finish()
    }

    /// Converts to dense storage (no-op for dense input).
    pub fn to_dense(&self) -> FeatureMatrix {
        if !self.is_sparse() {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.n_rows * self.n_dims);
        for row in self.rows() {
            values.extend(row.to_dense(self.n_dims));
        }
        FeatureMatrix {
            n_rows: self.n_rows,
            n_dims: self.n_dims,
            storage: Storage::Dense(values),
        }
    }

    /// Number of rows in which each column is nonzero.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_dims];
        for row in self.rows() {
            row.for_each_nonzero(|j, _| counts[j] += 1);
        }
        counts
    }

    /// Whether every stored value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        let vals: &[f64] = match &self.storage {
            Storage::Dense(v) => v,
            Storage::Sparse { values, .. } => values,
        };
        vals.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Incremental CSR construction with index validation.
#[derive(Debug)]
pub struct SparseBuilder {
    n_dims: usize,
    row_ptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseBuilder {
    pub fn new(n_dims: usize) -> Self {
        SparseBuilder {
            n_dims,
            row_ptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: &[(usize, f64)]) -> Result<()> {
        let mut prev: Option<usize> = None;
        for &(j, _) in entries {
            if j >= self.n_dims {
                return Err(PurpleError::InvalidInput(format!(
                    "index {j} out of range for {} dims",
                    self.n_dims
                )));
            }
            if prev.is_some_and(|p| j <= p) {
                return Err(PurpleError::InvalidInput(format!(
                    "indices must be strictly increasing (saw {j} after {})",
                    prev.unwrap()
                )));
            }
            prev = Some(j);
        }
        for &(j, v) in entries {
            self.indices.push(j as u32);
            self.values.push(v);
        }
        self.row_ptr.push(self.indices.len());
        Ok(())
    }

    pub fn finish(self) -> FeatureMatrix {
        FeatureMatrix {
            n_rows: self.row_ptr.len() - 1,
            n_dims: self.n_dims,
            storage: Storage::Sparse {
                row_ptr: self.row_ptr,
                indices: self.indices,
                values: self.values,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_unsorted_or_out_of_range_indices() {
        assert!(FeatureMatrix::from_sparse_rows(4, &[vec![(2, 1.0), (1, 1.0)]]).is_err());
        assert!(FeatureMatrix::from_sparse_rows(4, &[vec![(1, 1.0), (1, 1.0)]]).is_err());
        assert!(FeatureMatrix::from_sparse_rows(4, &[vec![(4, 1.0)]]).is_err());
    }

    #[test]
    fn without_columns_zeroes_dropped_entries() {
        let m = FeatureMatrix::from_sparse_rows(4, &[vec![(0, 1.0), (2, 1.0)], vec![(2, 1.0)]])
            .unwrap();
        let out = m.without_columns(&[2]);
        assert_eq!(out.column_counts(), vec![1, 0, 0, 0]);
        let dense = m.to_dense().without_columns(&[2]);
        assert_eq!(dense.column_counts(), vec![1, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn dense_and_sparse_dot_products_agree(
            rows in prop::collection::vec(prop::collection::vec(
                prop_oneof![Just(0.0), -5.0f64..5.0], 6), 1..20),
            w in prop::collection::vec(-3.0f64..3.0, 6),
        ) {
            let dense = FeatureMatrix::from_dense_rows(6, &rows).unwrap();
            let sparse = dense.to_sparse();
            for i in 0..dense.n_rows() {
                let a = dense.row(i).dot(&w);
                let b = sparse.row(i).dot(&w);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            prop_assert_eq!(sparse.to_dense(), dense);
        }
    }
}
