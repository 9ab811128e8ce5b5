//! Dense reference solutions shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use riga_core::assembly::{apply_dirichlet, assemble_1d, DiscreteSystem};
use riga_core::eigensolver::RitzPair;
use riga_core::sparse::SymSparseMatrix;

pub fn dense(a: &SymSparseMatrix) -> DMatrix<f64> {
    let n = a.dim();
    DMatrix::from_row_slice(n, n, &a.to_dense())
}

/// Generalized eigenpairs of `(K, M)` via `M = LLᵀ` and a symmetric eigensolve
/// of `L⁻¹KL⁻ᵀ`. Vectors are M-orthonormal columns, values ascending.
pub fn generalized_eig(k: &DMatrix<f64>, m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let chol = m.clone().cholesky().expect("mass matrix is SPD");
    let l = chol.l();
    let linv = l.clone().try_inverse().expect("triangular factor invertible");
    let c = &linv * k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(k.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let x = linv.transpose() * y;
    (values, x)
}

/// Dense oracle for the whole system.
pub fn oracle(sys: &DiscreteSystem) -> (Vec<f64>, DMatrix<f64>) {
    generalized_eig(&dense(&sys.k), &dense(&sys.m))
}

/// Oracle for tensor-product systems: 1D dense eigenpairs combined by
/// Kronecker products (x fastest).
pub fn separable_oracle(sys: &DiscreteSystem) -> (Vec<f64>, DMatrix<f64>) {
    let per_dir: Vec<(Vec<f64>, DMatrix<f64>)> = sys
        .spaces
        .iter()
        .map(|s| {
            let (k, m) = assemble_1d(s);
            let (k, m) = apply_dirichlet(&k, &m).unwrap();
            generalized_eig(&dense(&k), &dense(&m))
        })
        .collect();
    let mut combos: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    for (vals, _) in &per_dir {
        combos = combos
            .iter()
            .flat_map(|(s, idx)| {
                vals.iter().enumerate().map(move |(i, v)| {
                    let mut idx = idx.clone();
                    idx.push(i);
                    (s + v, idx)
                })
            })
            .collect();
    }
    combos.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sys.dof_count();
    let mut x = DMatrix::zeros(n, combos.len());
    for (c, (_, idx)) in combos.iter().enumerate() {
        let mut v = vec![1.0];
        for (dir, &i) in idx.iter().enumerate() {
            let col = per_dir[dir].1.column(i);
            v = col.iter().flat_map(|&a| v.iter().map(move |&b| a * b)).collect();
        }
        x.set_column(c, &nalgebra::DVector::from_vec(v));
    }
    (combos.into_iter().map(|c| c.0).collect(), x)
}

/// Index ranges of eigenvalues closer than `rel` relative to each other.
pub fn clusters(values: &[f64], rel: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i] - values[i - 1]).abs() > rel * values[i].abs() {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Largest sine of the M-angle between a computed vector and the oracle
/// eigenspace of its cluster.
pub fn max_subspace_angle(
    pairs: &[RitzPair],
    oracle_values: &[f64],
    oracle_vectors: &DMatrix<f64>,
    m: &SymSparseMatrix,
) -> f64 {
    let mut worst = 0.0f64;
    for range in clusters(&oracle_values[..pairs.len()], 1e-8) {
        // Extend to the full oracle cluster (it may run past the computed set).
        let mut end = range.end;
        while end < oracle_values.len()
            && (oracle_values[end] - oracle_values[end - 1]).abs() <= 1e-8 * oracle_values[end]
        {
            end += 1;
        }
        for p in &pairs[range.clone()] {
            let mx = m.matvec(&p.vector).unwrap();
            let norm2: f64 = p.vector.iter().zip(&mx).map(|(a, b)| a * b).sum();
            let mut proj2 = 0.0;
            for c in range.start..end {
                let y = oracle_vectors.column(c);
                let coef: f64 = y.iter().zip(&mx).map(|(a, b)| a * b).sum();
                proj2 += coef * coef;
            }
            let sin2 = (1.0 - proj2 / norm2).max(0.0);
            worst = worst.max(sin2.sqrt());
        }
    }
    worst
}

/// Largest off-diagonal and diagonal defect of `XᵀMX`.
pub fn m_orthonormality(pairs: &[RitzPair], m: &SymSparseMatrix) -> (f64, f64) {
    let products: Vec<Vec<f64>> = pairs.iter().map(|p| m.matvec(&p.vector).unwrap()).collect();
    let (mut off, mut diag) = (0.0f64, 0.0f64);
    for i in 0..pairs.len() {
        for (j, mx) in products.iter().enumerate().take(i + 1) {
            let g: f64 = pairs[i].vector.iter().zip(mx).map(|(a, b)| a * b).sum();
            if i == j {
                diag = diag.max((g - 1.0).abs());
            } else {
                off = off.max(g.abs());
            }
        }
    }
    (off, diag)
}

pub fn max_relative_error(computed: &[f64], reference: &[f64]) -> f64 {
    computed
        .iter()
        .zip(reference)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max)
}
