//! Galerkin matrices of the Laplace eigenproblem on `[0,1]^d`.
//!
//! 1D stiffness and mass matrices are integrated element by element with
//! Gauss–Legendre rules; the d-dimensional pencil is the Kronecker
//! composition of the Dirichlet-reduced 1D matrices with the x index running
//! fastest.

use std::sync::Arc;

use crate::bspline::{BasisRole, SplineSpace};
use crate::quadrature::gauss_legendre_on;
use crate::sparse::{Pattern, SymSparseMatrix};
use crate::{Error, Result};

/// Structural pattern of a 1D space: bases interact when they share an element.
pub fn pattern_1d(space: &SplineSpace) -> Pattern {
    let n = space.basis_count();
    let p = space.degree();
    let mut lo = vec![usize::MAX; n];
    let mut hi = vec![0usize; n];
    for e in 0..space.elements() {
        let first = space.element_first_basis(e);
        for i in first..=first + p {
            lo[i] = lo[i].min(first);
            hi[i] = hi[i].max(first + p);
        }
    }
    // Supports are intervals, so each row is a contiguous band.
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    for i in 0..n {
        cols.extend((lo[i]..=hi[i]).map(|j| j as u32));
        row_ptr.push(cols.len());
    }
    Pattern::new(n, row_ptr, cols)
}

/// 1D stiffness and mass matrices with `p + 1` Gauss points per element.
pub fn assemble_1d(space: &SplineSpace) -> (SymSparseMatrix, SymSparseMatrix) {
    assemble_1d_with_points(space, space.degree() + 1)
}

/// 1D stiffness and mass matrices with a chosen number of Gauss points per element.
pub fn assemble_1d_with_points(
    space: &SplineSpace,
    points: usize,
) -> (SymSparseMatrix, SymSparseMatrix) {
    let pattern = Arc::new(pattern_1d(space));
    let mut k = vec![0.0; pattern.nnz()];
    let mut m = vec![0.0; pattern.nnz()];
    let bp = space.knots().breakpoints();
    let p = space.degree();
    let mut ke = vec![0.0; (p + 1) * (p + 1)];
    let mut me = vec![0.0; (p + 1) * (p + 1)];
    for e in 0..space.elements() {
        ke.iter_mut().for_each(|v| *v = 0.0);
        me.iter_mut().for_each(|v| *v = 0.0);
        let (xs, ws) = gauss_legendre_on(points, bp[e], bp[e + 1]);
        for (x, w) in xs.iter().zip(&ws) {
            let b = space.eval_in_element(e, *x);
            for a in 0..=p {
                let (wd, wv) = (w * b.derivs[a], w * b.values[a]);
                for c in a..=p {
                    ke[a * (p + 1) + c] += wd * b.derivs[c];
                    me[a * (p + 1) + c] += wv * b.values[c];
                }
            }
        }
        for a in 0..=p {
            for c in 0..a {
                ke[a * (p + 1) + c] = ke[c * (p + 1) + a];
                me[a * (p + 1) + c] = me[c * (p + 1) + a];
            }
        }
        let first = space.element_first_basis(e);
        for a in 0..=p {
            for c in 0..=p {
                let pos = pattern.find(first + a, first + c).expect("element entry in pattern");
                k[pos] += ke[a * (p + 1) + c];
                m[pos] += me[a * (p + 1) + c];
            }
        }
    }
    (
        SymSparseMatrix::from_parts(pattern.clone(), k),
        SymSparseMatrix::from_parts(pattern, m),
    )
}

/// Drop the first and last basis (homogeneous Dirichlet condition).
pub fn apply_dirichlet(
    k: &SymSparseMatrix,
    m: &SymSparseMatrix,
) -> Result<(SymSparseMatrix, SymSparseMatrix)> {
    let n = k.dim();
    if n < 3 {
        return Err(Error::InvalidSystem(format!(
            "{n} basis functions leave no interior degree of freedom"
        )));
    }
    let keep: Vec<usize> = (1..n - 1).collect();
    let kd = k.principal_submatrix(&keep);
    let md = m.principal_submatrix(&keep);
    let md = SymSparseMatrix::from_parts(kd.pattern().clone(), md.values().to_vec());
    Ok((kd, md))
}

/// Interior DOF count `N`: `(ne+p-2)^d` for IGA, `(ne + 2^ℓ(p-1) - 1)^d` for rIGA.
pub fn dof_count(ne: usize, p: usize, level: u32, d: u32) -> usize {
    let per_dir = if level == 0 {
        ne + p - 2
    } else {
        ne + (1usize << level) * (p - 1) - 1
    };
    per_dir.pow(d)
}

/// Nonzero count of the mass matrix as given by the closed-form estimate:
/// `[ne(2p+1) + p²]^d` for IGA and `2^{dℓ}[2^{-ℓ}ne(2p+1) + p² - 1]^d` for rIGA.
pub fn nnz_mass_formula(ne: usize, p: usize, level: u32, d: u32) -> u64 {
    let (ne, p) = (ne as u64, p as u64);
    if level == 0 {
        (ne * (2 * p + 1) + p * p).pow(d)
    } else {
        let blocks = 1u64 << level;
        blocks.pow(d) * ((ne / blocks) * (2 * p + 1) + p * p - 1).pow(d)
    }
}

/// Exact structural nonzero count of the assembled mass matrix before the
/// Dirichlet reduction.
///
/// The closed-form estimate reproduces this count for IGA. For rIGA the 1D
/// estimate is one short: neighbouring macroelement blocks share their C⁰
/// basis, whose diagonal entry is counted once per block in the assembled
/// matrix but subtracted once per block in the estimate.
pub fn nnz_mass_exact(ne: usize, p: usize, level: u32, d: u32) -> u64 {
    let one_d = nnz_mass_formula(ne, p, level, 1) + u64::from(level > 0);
    one_d.pow(d)
}

/// Kronecker product `A ⊗ B` with `B`'s index running fastest.
pub fn kron(a: &SymSparseMatrix, b: &SymSparseMatrix) -> SymSparseMatrix {
    let pattern = Pattern::kron(a.pattern(), b.pattern());
    let mut values = Vec::with_capacity(pattern.nnz());
    let (pa, pb) = (a.pattern(), b.pattern());
    for ia in 0..pa.dim() {
        for ib in 0..pb.dim() {
            for ka in pa.row_range(ia) {
                let va = a.values()[ka];
                values.extend(pb.row_range(ib).map(|kb| va * b.values()[kb]));
            }
        }
    }
    SymSparseMatrix::from_parts(Arc::new(pattern), values)
}

/// Discretized Laplace pencil `(K, M)` on `[0,1]^d`.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub k: SymSparseMatrix,
    pub m: SymSparseMatrix,
    /// One space per direction, x first.
    pub spaces: Vec<SplineSpace>,
}

impl DiscreteSystem {
    /// Same space in each of the `d` directions.
    pub fn new(d: u32, ne: usize, p: usize, level: u32) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidSystem(format!("dimension {d} not in 1..=3")));
        }
        let space = SplineSpace::riga(ne, p, level)?;
        kron_assemble(&vec![space; d as usize])
    }

    pub fn dim(&self) -> usize {
        self.spaces.len()
    }

    pub fn dof_count(&self) -> usize {
        self.k.dim()
    }

    pub fn degree(&self) -> usize {
        self.spaces[0].degree()
    }

    /// Interior basis counts per direction, x first.
    pub fn shape(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.basis_count() - 2).collect()
    }

    /// Per-direction interior indices of linear DOF `i` (x fastest).
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        self.shape()
            .iter()
            .map(|&n| {
                let r = i % n;
                i /= n;
                r
            })
            .collect()
    }
}

fn reduced_1d(space: &SplineSpace) -> Result<(SymSparseMatrix, SymSparseMatrix)> {
    let (k, m) = assemble_1d(space);
    apply_dirichlet(&k, &m)
}

/// Compose the d-dimensional pencil from per-direction spaces (x first).
pub fn kron_assemble(spaces: &[SplineSpace]) -> Result<DiscreteSystem> {
    let d = spaces.len();
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidSystem(format!("dimension {d} not in 1..=3")));
    }
    let p = spaces[0].degree();
    if spaces.iter().any(|s| s.degree() != p) {
        return Err(Error::InvalidSystem("per-direction degrees differ".into()));
    }
    let one_d = spaces.iter().map(reduced_1d).collect::<Result<Vec<_>>>()?;

    // Slowest direction first in each Kronecker chain.
    let chain = |stiff_dir: Option<usize>| -> SymSparseMatrix {
        let pick = |dir: usize| {
            if Some(dir) == stiff_dir {
                &one_d[dir].0
            } else {
                &one_d[dir].1
            }
        };
        let mut acc = pick(d - 1).clone();
        for dir in (0..d - 1).rev() {
            acc = kron(&acc, pick(dir));
        }
        acc
    };
    let m = chain(None);
    let mut k_values = vec![0.0; m.nnz()];
    for dir in 0..d {
        let term = chain(Some(dir));
        debug_assert_eq!(**term.pattern(), **m.pattern());
        for (acc, v) in k_values.iter_mut().zip(term.values()) {
            *acc += v;
        }
    }
    let k = SymSparseMatrix::from_parts(m.pattern().clone(), k_values);
    Ok(DiscreteSystem {
        k,
        m,
        spaces: spaces.to_vec(),
    })
}

/// Structural pattern of the Dirichlet-reduced d-dimensional system without
/// computing any values (for ordering and symbolic cost studies).
pub fn kron_pattern(spaces: &[SplineSpace]) -> Pattern {
    let reduced: Vec<Pattern> = spaces
        .iter()
        .map(|s| {
            let full = pattern_1d(s);
            let keep: Vec<usize> = (1..full.dim() - 1).collect();
            full.submatrix(&keep).0
        })
        .collect();
    let d = reduced.len();
    let mut acc = reduced[d - 1].clone();
    for dir in (0..d - 1).rev() {
        acc = Pattern::kron(&acc, &reduced[dir]);
    }
    acc
}

/// Interior roles per direction (x first), used to build separator orderings.
pub fn interior_roles(spaces: &[SplineSpace]) -> Vec<Vec<BasisRole>> {
    spaces.iter().map(|s| s.interior_roles()).collect()
}
