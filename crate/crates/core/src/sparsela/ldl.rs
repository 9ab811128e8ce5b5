//! Up-looking sparse LDLᵀ factorization without pivoting.
//!
//! The symbolic phase (elimination tree and column counts) depends only on
//! the sparsity pattern and the ordering, so one analysis serves every shift
//! `K - σM`. Its column counts also fix the FLOP cost of the numeric phase.

use std::sync::Arc;
use std::time::Instant;

use crate::counters::{CostCounters, OpCounter};
use crate::sparse::{Pattern, SymSparseMatrix};
use crate::{Error, Result};

use super::ordering::Permutation;

const NONE: usize = usize::MAX;

/// Elimination tree and column structure of `P A Pᵀ = L D Lᵀ`.
#[derive(Debug, Clone)]
pub struct SymbolicFactor {
    perm: Permutation,
    parent: Vec<usize>,
    /// Strictly-lower nonzeros per column of `L`.
    col_counts: Vec<usize>,
    col_ptr: Vec<usize>,
}

impl SymbolicFactor {
    pub fn analyze(pattern: &Pattern, perm: Permutation) -> Self {
        let n = pattern.dim();
        assert_eq!(perm.len(), n);
        let order = perm.order();
        let inv = perm.inverse();
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut counts = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &col in pattern.row(order[k] as usize) {
                let mut i = inv[col as usize] as usize;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    counts[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for c in &counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        Self {
            perm,
            parent,
            col_counts: counts,
            col_ptr,
        }
    }

    pub fn dim(&self) -> usize {
        self.parent.len()
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    /// Parent of each column in the elimination tree (`None` for roots).
    pub fn parent(&self, j: usize) -> Option<usize> {
        (self.parent[j] != NONE).then_some(self.parent[j])
    }

    /// Nonzeros of `L` including its unit diagonal.
    pub fn fill_nnz(&self) -> u64 {
        (self.col_ptr[self.dim()] + self.dim()) as u64
    }

    /// `Σ_j (column nnz of L)²`, the multiply–add count of the numeric phase.
    pub fn factor_flops(&self) -> u64 {
        self.col_counts
            .iter()
            .map(|&c| ((c + 1) as u64).pow(2))
            .sum()
    }

    /// FLOPs of one forward/backward elimination.
    pub fn solve_flops(&self) -> u64 {
        2 * self.fill_nnz()
    }
}

/// Signature of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// Numeric factors of `P A Pᵀ = L D Lᵀ`.
#[derive(Debug, Clone)]
pub struct LdlFactorization {
    symbolic: Arc<SymbolicFactor>,
    row_idx: Vec<u32>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    inertia: Inertia,
    growth: f64,
    cost: OpCounter,
}

/// Factor `a` using a precomputed symbolic analysis of its pattern.
///
/// Fails with [`Error::ZeroPivot`] when a pivot falls below `1e-14·max|A|`.
pub fn factor_ldl(a: &SymSparseMatrix, symbolic: &Arc<SymbolicFactor>) -> Result<LdlFactorization> {
    let started = Instant::now();
    let n = a.dim();
    if symbolic.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: symbolic.dim(),
            got: n,
        });
    }
    let pattern = a.pattern();
    let values = a.values();
    let order = symbolic.perm.order();
    let inv = symbolic.perm.inverse();
    let col_ptr = &symbolic.col_ptr;
    let parent = &symbolic.parent;
    let nnz = col_ptr[n];
    let mut row_idx = vec![0u32; nnz];
    let mut l_values = vec![0.0f64; nnz];
    let mut d = vec![0.0f64; n];
    let mut filled = vec![0usize; n];
    let mut flag = vec![NONE; n];
    let mut stack = vec![0usize; n];
    let mut y = vec![0.0f64; n];
    let max_a = a.max_abs();
    let threshold = 1e-14 * max_a;

    for k in 0..n {
        // Nonzero pattern of row k of L: union of etree paths.
        let mut top = n;
        flag[k] = k;
        let old = order[k] as usize;
        for pos in pattern.row_range(old) {
            let mut i = inv[pattern.cols()[pos] as usize] as usize;
            if i > k {
                continue;
            }
            y[i] += values[pos];
            let mut len = 0;
            while flag[i] != k {
                stack[len] = i;
                len += 1;
                flag[i] = k;
                i = parent[i];
            }
            while len > 0 {
                top -= 1;
                len -= 1;
                stack[top] = stack[len];
            }
        }
        let mut dk = y[k];
        y[k] = 0.0;
        for &i in &stack[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let start = col_ptr[i];
            let end = start + filled[i];
            for p in start..end {
                y[row_idx[p] as usize] -= l_values[p] * yi;
            }
            let lki = yi / d[i];
            dk -= lki * yi;
            row_idx[end] = k as u32;
            l_values[end] = lki;
            filled[i] += 1;
        }
        if !(dk.abs() > threshold) {
            return Err(Error::ZeroPivot { step: k, value: dk });
        }
        d[k] = dk;
    }

    let mut inertia = Inertia::default();
    for &v in &d {
        if v < 0.0 {
            inertia.negative += 1;
        } else if v > 0.0 {
            inertia.positive += 1;
        } else {
            inertia.zero += 1;
        }
    }
    let growth = d.iter().fold(0.0f64, |g, v| g.max(v.abs())) / max_a;
    let mut cost = OpCounter::default();
    cost.record(symbolic.factor_flops(), started);
    Ok(LdlFactorization {
        symbolic: symbolic.clone(),
        row_idx,
        l_values,
        d,
        inertia,
        growth,
        cost,
    })
}

impl LdlFactorization {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    pub fn symbolic(&self) -> &Arc<SymbolicFactor> {
        &self.symbolic
    }

    /// Pivot growth `max|D| / max|A|`. Without pivoting an indefinite matrix
    /// can produce a tiny pivot followed by huge ones, and solves then lose
    /// accuracy roughly in proportion to this number.
    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn fill_nnz(&self) -> u64 {
        self.symbolic.fill_nnz()
    }

    pub fn factor_flops(&self) -> u64 {
        self.symbolic.factor_flops()
    }

    /// FLOPs and wall time spent in the numeric factorization.
    pub fn cost(&self) -> OpCounter {
        self.cost
    }

    /// `A⁻¹ b`: permute, unit-lower solve, diagonal scale, transpose solve, unpermute.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let order = self.symbolic.perm.order();
        let col_ptr = &self.symbolic.col_ptr;
        let mut x: Vec<f64> = order.iter().map(|&o| b[o as usize]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in col_ptr[j]..col_ptr[j + 1] {
                    x[self.row_idx[p] as usize] -= self.l_values[p] * xj;
                }
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in col_ptr[j]..col_ptr[j + 1] {
                acc -= self.l_values[p] * x[self.row_idx[p] as usize];
            }
            x[j] = acc;
        }
        let mut out = vec![0.0; n];
        for (new, &old) in order.iter().enumerate() {
            out[old as usize] = x[new];
        }
        Ok(out)
    }
}

/// Forward/backward elimination with the factors, counted as one f/b call.
pub fn solve_fb(
    fact: &LdlFactorization,
    b: &[f64],
    counters: &mut CostCounters,
) -> Result<Vec<f64>> {
    let started = Instant::now();
    let x = fact.solve(b)?;
    counters.n_fb += 1;
    counters.elimination.record(fact.symbolic.solve_flops(), started);
    Ok(x)
}
