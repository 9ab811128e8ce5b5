//! Symmetric sparse matrices in compressed-row form.
//!
//! Both triangles are kept in the row structure so that rows can be walked
//! under any symmetric permutation; symmetry is an invariant of the
//! constructors, so only one triangle carries independent information.

use std::io::{self, Write};
use std::sync::Arc;

use crate::{Error, Result};

/// Sparsity pattern of a structurally symmetric matrix, column indices sorted per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

impl Pattern {
    pub fn new(dim: usize, row_ptr: Vec<usize>, cols: Vec<u32>) -> Self {
        debug_assert_eq!(row_ptr.len(), dim + 1);
        debug_assert_eq!(*row_ptr.last().unwrap(), cols.len());
        Self { dim, row_ptr, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of structural nonzeros of the full (both triangles) matrix.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    /// Position of entry `(i, j)` in the column array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.cols[r.clone()]
            .binary_search(&(j as u32))
            .ok()
            .map(|k| r.start + k)
    }

    /// Pattern of `A ⊗ B`; `B`'s index runs fastest.
    pub fn kron(a: &Pattern, b: &Pattern) -> Pattern {
        let dim = a.dim * b.dim;
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(a.nnz() * b.nnz());
        row_ptr.push(0);
        for ia in 0..a.dim {
            for ib in 0..b.dim {
                for &ja in a.row(ia) {
                    let base = ja as usize * b.dim;
                    cols.extend(b.row(ib).iter().map(|&jb| (base + jb as usize) as u32));
                }
                row_ptr.push(cols.len());
            }
        }
        Pattern::new(dim, row_ptr, cols)
    }

    /// Pattern restricted to the rows/columns in `keep` (ascending), renumbered.
    pub fn submatrix(&self, keep: &[usize]) -> (Pattern, Vec<usize>) {
        let mut new_index = vec![u32::MAX; self.dim];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k as u32;
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut source = Vec::new();
        for &i in keep {
            for pos in self.row_range(i) {
                let j = new_index[self.cols[pos] as usize];
                if j != u32::MAX {
                    cols.push(j);
                    source.push(pos);
                }
            }
            row_ptr.push(cols.len());
        }
        (Pattern::new(keep.len(), row_ptr, cols), source)
    }
}

/// Symmetric sparse matrix; the pattern may be shared between matrices
/// (K, M and their shifted combinations).
#[derive(Debug, Clone)]
pub struct SymSparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SymSparseMatrix {
    pub fn from_parts(pattern: Arc<Pattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self { pattern, values }
    }

    /// Build from `(row, col, value)` triplets of either triangle; duplicates
    /// are summed and the result is symmetrized.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            rows[i].push((j as u32, v));
            if i != j {
                rows[j].push((i as u32, v));
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            pattern: Arc::new(Pattern::new(dim, row_ptr, cols)),
            values,
        }
    }

    /// Sparse copy of a dense symmetric matrix (row-major), dropping exact zeros.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Self {
        let mut t = Vec::new();
        for i in 0..dim {
            for j in 0..=i {
                let v = dense[i * dim + j];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dim, &t)
    }

    pub fn identity(dim: usize) -> Self {
        let t: Vec<_> = (0..dim).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(dim, &t)
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    /// Full-matrix nonzero count.
    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + c · other`; both matrices must share one pattern.
    pub fn add_scaled(&self, c: f64, other: &SymSparseMatrix) -> Result<SymSparseMatrix> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && *self.pattern != *other.pattern {
            return Err(Error::InvalidSystem("matrices do not share a sparsity pattern".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Self {
            pattern: self.pattern.clone(),
            values,
        })
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if x.len() != n { x.len() } else { y.len() },
            });
        }
        let cols = self.pattern.cols();
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.pattern.row_range(i) {
                acc += self.values[k] * x[cols[k] as usize];
            }
            *yi = acc;
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// Principal submatrix on the ascending index list `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SymSparseMatrix {
        let (pattern, source) = self.pattern.submatrix(keep);
        let values = source.iter().map(|&k| self.values[k]).collect();
        Self {
            pattern: Arc::new(pattern),
            values,
        }
    }

    /// Dense row-major copy (tests and small oracles).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for k in self.pattern.row_range(i) {
                d[i * n + self.pattern.cols[k] as usize] = self.values[k];
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for k in self.pattern.row_range(i) {
                let j = self.pattern.cols[k] as usize;
                let t = self.pattern.find(j, i).map_or(f64::INFINITY, |kt| self.values[kt]);
                worst = worst.max((self.values[k] - t).abs());
            }
        }
        worst
    }

    /// Matrix Market `coordinate real symmetric` output (lower triangle, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim();
        let lower = (self.nnz() + n) / 2;
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{n} {n} {lower}")?;
        for i in 0..n {
            for k in self.pattern.row_range(i) {
                let j = self.pattern.cols[k] as usize;
                if j <= i {
                    writeln!(w, "{} {} {:.17e}", i + 1, j + 1, self.values[k])?;
                }
            }
        }
        Ok(())
    }
}
