//! Sparse symmetric linear algebra: orderings, LDLᵀ factorization with
//! inertia, and the M-weighted vector kernels used by the eigensolver.

pub mod ldl;
pub mod ordering;

use std::sync::Arc;
use std::time::Instant;

pub use ldl::{factor_ldl, solve_fb, Inertia, LdlFactorization, SymbolicFactor};
pub use ordering::{compute_ordering, nested_dissection, separator_ordering, OrderingStrategy, Permutation};

use crate::assembly::DiscreteSystem;
use crate::counters::CostCounters;
use crate::sparse::SymSparseMatrix;
use crate::{Error, Result};

/// `y = M v`, counted as one mat–vec of `2·nnz(M)` FLOPs.
pub fn mass_matvec(m: &SymSparseMatrix, v: &[f64], counters: &mut CostCounters) -> Result<Vec<f64>> {
    let started = Instant::now();
    let y = m.matvec(v)?;
    counters.n_mv += 1;
    counters.matvec.record(2 * m.nnz() as u64, started);
    Ok(y)
}

/// Plain dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `vᵀ M u`.
pub fn m_inner(u: &[f64], v: &[f64], m: &SymSparseMatrix) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(dot(v, &m.matvec(u)?))
}

/// `(vᵀ M v)^{1/2}`; small negative round-off is clamped to zero.
pub fn m_norm(v: &[f64], m: &SymSparseMatrix) -> Result<f64> {
    norm_from_square(m_inner(v, v, m)?)
}

pub(crate) fn norm_from_square(sq: f64) -> Result<f64> {
    if sq < -1e-12 {
        return Err(Error::NegativeNorm(sq));
    }
    Ok(sq.max(0.0).sqrt())
}

/// Factors `K - σM` for any shift, sharing one ordering and symbolic analysis.
#[derive(Debug, Clone)]
pub struct ShiftFactorizer {
    k: SymSparseMatrix,
    m: SymSparseMatrix,
    symbolic: Arc<SymbolicFactor>,
}

impl ShiftFactorizer {
    pub fn new(system: &DiscreteSystem, strategy: OrderingStrategy) -> Self {
        let perm = compute_ordering(strategy, system.k.pattern(), &system.spaces);
        let symbolic = Arc::new(SymbolicFactor::analyze(system.k.pattern(), perm));
        Self {
            k: system.k.clone(),
            m: system.m.clone(),
            symbolic,
        }
    }

    pub fn symbolic(&self) -> &Arc<SymbolicFactor> {
        &self.symbolic
    }

    /// Factor `K - σM`, recording one factorization in `counters`.
    pub fn factor(&self, sigma: f64, counters: &mut CostCounters) -> Result<LdlFactorization> {
        let shifted = self.k.add_scaled(-sigma, &self.m)?;
        let fact = factor_ldl(&shifted, &self.symbolic);
        counters.n_fa += 1;
        if let Ok(f) = &fact {
            counters.factorization += f.cost();
        }
        fact
    }
}
