//! Lanczos recurrence for an M-self-adjoint operator with full
//! M-reorthogonalization, Rayleigh–Ritz extraction and thick restart.

use rand::Rng;

use crate::counters::CostCounters;
use crate::sparse::SymSparseMatrix;
use crate::sparsela::{dot, mass_matvec, norm_from_square};
use crate::{Error, Result};

use super::tridiag::{symmetric_eig, tridiag_eig, SymEigen};

/// Relative size of `β` below which the Krylov space is taken as invariant.
const BREAKDOWN: f64 = 1e-12;

/// Vectors (with their M-products) that new Lanczos vectors are kept
/// M-orthogonal to.
#[derive(Debug, Clone, Default)]
pub struct LockedSet {
    vecs: Vec<Vec<f64>>,
    mvecs: Vec<Vec<f64>>,
}

impl LockedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: Vec<f64>, mv: Vec<f64>) {
        self.vecs.push(v);
        self.mvecs.push(mv);
    }

    pub fn len(&self) -> usize {
        self.vecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vecs.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vecs
    }

    /// Remove the M-components of `w` along the stored vectors.
    pub fn project(&self, w: &mut [f64]) {
        project_out(w, &self.vecs, &self.mvecs);
    }

    pub fn extend(&mut self, other: &LockedSet) {
        self.vecs.extend(other.vecs.iter().cloned());
        self.mvecs.extend(other.mvecs.iter().cloned());
    }
}

/// Subtract the M-projections of `w` onto `vecs` (classical Gram–Schmidt).
fn project_out(w: &mut [f64], vecs: &[Vec<f64>], mvecs: &[Vec<f64>]) -> Vec<f64> {
    let coeffs: Vec<f64> = mvecs.iter().map(|mv| dot(mv, w)).collect();
    for (v, &c) in vecs.iter().zip(&coeffs) {
        if c != 0.0 {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
    }
    coeffs
}

/// A Ritz value of the projected matrix with its weights in the basis.
#[derive(Debug, Clone)]
pub struct RitzValue {
    pub theta: f64,
    pub lambda: f64,
    /// `|β_m · w[last]|`, the residual norm of the Ritz pair for the operator.
    pub bound: f64,
    pub converged: bool,
    pub weights: Vec<f64>,
}

/// Lanczos decomposition `H V = V T + β v_next e_mᵀ` of the shift-and-invert
/// operator `H = (K − σM)⁻¹M`.
///
/// After a thick restart the leading `spike.len()` vectors are Ritz vectors:
/// `T` then has a diagonal leading block coupled to the following vector
/// through the spike, and is tridiagonal from there on.
#[derive(Debug, Clone)]
pub struct LanczosState {
    sigma: f64,
    basis: Vec<Vec<f64>>,
    mbasis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    /// `beta[i]` couples vectors `i` and `i + 1`; the last entry couples the
    /// basis to `next`. Entries inside the restart block are zero.
    beta: Vec<f64>,
    spike: Vec<f64>,
    next: Option<(Vec<f64>, Vec<f64>)>,
}

impl LanczosState {
    /// Start from `v` (M-normalized here).
    pub fn new(
        sigma: f64,
        mut v: Vec<f64>,
        m: &SymSparseMatrix,
        counters: &mut CostCounters,
    ) -> Result<Self> {
        let mut mv = mass_matvec(m, &v, counters)?;
        let norm = norm_from_square(dot(&v, &mv))?;
        if norm == 0.0 {
            return Err(Error::InvalidRequest("zero starting vector".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        mv.iter_mut().for_each(|x| *x /= norm);
        Ok(Self {
            sigma,
            basis: Vec::new(),
            mbasis: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            spike: Vec::new(),
            next: Some((v, mv)),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Couplings of the retained Ritz vectors to the first new vector.
    pub fn spike(&self) -> &[f64] {
        &self.spike
    }

    /// No direction M-orthogonal to the basis and the locked sets remains.
    pub fn is_exhausted(&self) -> bool {
        self.next.is_none()
    }

    /// `β` coupling the basis to the next vector.
    pub fn residual_norm(&self) -> f64 {
        self.beta.last().copied().unwrap_or(0.0)
    }

    fn t_scale(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.beta)
            .chain(&self.spike)
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Grow the basis to `target` vectors.
    ///
    /// `apply` computes `H v`. Every new vector is M-orthogonalized twice
    /// against the whole basis and all `locked` sets.
    pub fn extend<F, R>(
        &mut self,
        target: usize,
        mut apply: F,
        m: &SymSparseMatrix,
        locked: &[&LockedSet],
        rng: &mut R,
        counters: &mut CostCounters,
    ) -> Result<()>
    where
        F: FnMut(&[f64], &mut CostCounters) -> Result<Vec<f64>>,
        R: Rng,
    {
        while self.basis.len() < target {
            let Some((v, mv)) = self.next.take() else {
                break;
            };
            let mut w = apply(&v, counters)?;
            self.basis.push(v);
            self.mbasis.push(mv);
            let j = self.basis.len() - 1;
            let mut alpha = 0.0;
            for _ in 0..2 {
                alpha += project_out(&mut w, &self.basis, &self.mbasis)[j];
                for set in locked {
                    project_out(&mut w, &set.vecs, &set.mvecs);
                }
            }
            self.alpha.push(alpha);
            let mw = mass_matvec(m, &w, counters)?;
            let beta = norm_from_square(dot(&w, &mw))?;
            if beta > BREAKDOWN * self.t_scale() {
                self.beta.push(beta);
                let scale = |x: Vec<f64>| x.into_iter().map(|v| v / beta).collect::<Vec<_>>();
                self.next = Some((scale(w), scale(mw)));
            } else {
                self.beta.push(0.0);
                self.next = self.fresh_direction(m, locked, rng, counters)?;
            }
        }
        Ok(())
    }

    /// Random unit vector M-orthogonal to the basis and the locked sets, or
    /// `None` when they already span the space.
    fn fresh_direction<R: Rng>(
        &self,
        m: &SymSparseMatrix,
        locked: &[&LockedSet],
        rng: &mut R,
        counters: &mut CostCounters,
    ) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let n = m.dim();
        let mut r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let before = dot(&r, &r).sqrt();
        for _ in 0..2 {
            project_out(&mut r, &self.basis, &self.mbasis);
            for set in locked {
                project_out(&mut r, &set.vecs, &set.mvecs);
            }
        }
        if dot(&r, &r).sqrt() <= 1e-8 * before {
            return Ok(None);
        }
        let mut mr = mass_matvec(m, &r, counters)?;
        let norm = norm_from_square(dot(&r, &mr))?;
        r.iter_mut().for_each(|x| *x /= norm);
        mr.iter_mut().for_each(|x| *x /= norm);
        Ok(Some((r, mr)))
    }

    /// The projected matrix `T = Vᵀ M H V`, row-major.
    pub fn projected_matrix(&self) -> Vec<f64> {
        let n = self.basis.len();
        let k = self.spike.len();
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            t[i * n + i] = self.alpha[i];
        }
        for (i, &s) in self.spike.iter().enumerate() {
            if k < n {
                t[i * n + k] = s;
                t[k * n + i] = s;
            }
        }
        for i in k..n.saturating_sub(1) {
            t[i * n + i + 1] = self.beta[i];
            t[(i + 1) * n + i] = self.beta[i];
        }
        t
    }

    fn projected_eig(&self) -> SymEigen {
        let n = self.basis.len();
        if self.spike.is_empty() {
            tridiag_eig(&self.alpha, &self.beta[..n.saturating_sub(1)])
        } else {
            symmetric_eig(n, &self.projected_matrix())
        }
    }

    /// Ritz values of `T` in ascending order of `θ`, with convergence flagged
    /// when `|β_m w[last]| ≤ tol·|θ|`. Zero `θ` (an infinite `λ`) is skipped.
    pub fn rayleigh_ritz(&self, tol: f64) -> Vec<RitzValue> {
        let n = self.basis.len();
        if n == 0 {
            return Vec::new();
        }
        let eig = self.projected_eig();
        let beta_m = self.residual_norm();
        (0..n)
            .filter(|&k| eig.values[k] != 0.0)
            .map(|k| {
                let theta = eig.values[k];
                let bound = (beta_m * eig.component(n - 1, k)).abs();
                RitzValue {
                    theta,
                    lambda: self.sigma + 1.0 / theta,
                    bound,
                    converged: bound <= tol * theta.abs(),
                    weights: eig.vector(k),
                }
            })
            .collect()
    }

    /// `x = V w` and `M x`, the latter from the cached products.
    pub fn ritz_vector(&self, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.basis.first().map_or(0, Vec::len);
        let mut x = vec![0.0; n];
        let mut mx = vec![0.0; n];
        for ((v, mv), &w) in self.basis.iter().zip(&self.mbasis).zip(weights) {
            for i in 0..n {
                x[i] += w * v[i];
                mx[i] += w * mv[i];
            }
        }
        (x, mx)
    }

    /// Restart from the given Ritz values plus the current residual direction.
    pub fn thick_restart(&mut self, keep: &[&RitzValue]) {
        let beta_m = self.residual_norm();
        let last = self.basis.len().saturating_sub(1);
        let mut basis = Vec::with_capacity(keep.len());
        let mut mbasis = Vec::with_capacity(keep.len());
        let mut spike = Vec::with_capacity(keep.len());
        for r in keep {
            let (x, mx) = self.ritz_vector(&r.weights);
            basis.push(x);
            mbasis.push(mx);
            spike.push(beta_m * r.weights[last]);
        }
        self.alpha = keep.iter().map(|r| r.theta).collect();
        self.beta = vec![0.0; keep.len()];
        self.basis = basis;
        self.mbasis = mbasis;
        self.spike = spike;
    }

    /// Largest off-diagonal entry of `VᵀMV` over the basis and the next vector.
    pub fn orthogonality_loss(&self) -> f64 {
        let mut vecs: Vec<&Vec<f64>> = self.basis.iter().collect();
        let mut mvecs: Vec<&Vec<f64>> = self.mbasis.iter().collect();
        if let Some((v, mv)) = &self.next {
            vecs.push(v);
            mvecs.push(mv);
        }
        let mut worst = 0.0f64;
        for i in 0..vecs.len() {
            for mv in &mvecs[..i] {
                worst = worst.max(dot(vecs[i], mv).abs());
            }
        }
        worst
    }
}
