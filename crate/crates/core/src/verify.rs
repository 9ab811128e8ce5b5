//! Exact Dirichlet–Laplace eigenpairs on `[0,1]^d` and discretization errors.
//!
//! Exact modes are `λ* = π² Σ iₖ²` with `u* = ∏ √2 sin(iₖπxₖ)`, normalized in
//! `L²`. Discrete pairs are matched to them by sorted position and measured
//! by the eigenvalue error `EV`, the squared `L²` eigenfunction error `EFL`
//! and the energy error `EFE = EV + EFL`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteSystem;
use crate::bspline::BasisEval;
use crate::eigensolver::RitzPair;
use crate::quadrature::gauss_legendre_on;
use crate::{Error, Result};

/// Relative gap below which exact eigenvalues form one cluster.
pub const CLUSTER_TOL: f64 = 1e-9;

/// An exact eigenpair, identified by its index tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMode {
    pub indices: Vec<usize>,
    pub lambda: f64,
    /// Position inside its cluster of equal eigenvalues.
    pub rank: usize,
}

impl ExactMode {
    /// All indices equal (always true in 1D).
    pub fn is_diagonal(&self) -> bool {
        self.indices.windows(2).all(|w| w[0] == w[1])
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(x)
            .map(|(&i, &xk)| SQRT_2 * (i as f64 * PI * xk).sin())
            .product()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.indices.len();
        let s: Vec<f64> = (0..d)
            .map(|k| SQRT_2 * (self.indices[k] as f64 * PI * x[k]).sin())
            .collect();
        (0..d)
            .map(|k| {
                let w = self.indices[k] as f64 * PI;
                let dk = SQRT_2 * w * (w * x[k]).cos();
                (0..d).map(|j| if j == k { dk } else { s[j] }).product()
            })
            .collect()
    }
}

/// Which exact modes to list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactRequest {
    Count(usize),
    Interval(f64, f64),
}

/// Exact modes sorted by eigenvalue, ties broken lexicographically.
pub fn exact_spectrum(d: u32, request: ExactRequest) -> Vec<ExactMode> {
    let d = d as usize;
    // Bound on Σ i²: for a count n, the m^d tuples with all indices ≤ m have
    // Σ i² ≤ d·m², so the n smallest never exceed that sum.
    let max_sum = match request {
        ExactRequest::Count(0) => return Vec::new(),
        ExactRequest::Count(n) => {
            let m = (n as f64).powf(1.0 / d as f64).ceil() as usize;
            let m = (m.saturating_sub(1)..=m + 1)
                .find(|&m| m.pow(d as u32) >= n)
                .unwrap_or(m);
            d * m * m
        }
        ExactRequest::Interval(_, b) => (b / (PI * PI) * (1.0 + 1e-12)).max(0.0).floor() as usize,
    };
    let max_index = (max_sum as f64).sqrt().floor() as usize;
    let mut modes = Vec::new();
    let mut idx = vec![1usize; d];
    if max_index >= 1 {
        'outer: loop {
            let sum: usize = idx.iter().map(|i| i * i).sum();
            if sum <= max_sum {
                modes.push((sum, idx.clone()));
            }
            for k in (0..d).rev() {
                if idx[k] < max_index {
                    idx[k] += 1;
                    continue 'outer;
                }
                idx[k] = 1;
            }
            break;
        }
    }
    modes.sort();
    let mut out: Vec<ExactMode> = modes
        .into_iter()
        .map(|(sum, indices)| ExactMode {
            indices,
            lambda: PI * PI * sum as f64,
            rank: 0,
        })
        .collect();
    match request {
        ExactRequest::Count(n) => out.truncate(n),
        ExactRequest::Interval(a, b) => {
            let (lo, hi) = (a * (1.0 - 1e-12), b * (1.0 + 1e-12));
            out.retain(|m| lo <= m.lambda && m.lambda <= hi)
        }
    }
    for i in 1..out.len() {
        if is_cluster(out[i - 1].lambda, out[i].lambda) {
            out[i].rank = out[i - 1].rank + 1;
        }
    }
    out
}

fn is_cluster(a: f64, b: f64) -> bool {
    (b - a).abs() < CLUSTER_TOL * a.abs()
}

/// Per-direction basis evaluations at a point.
fn point_bases(system: &DiscreteSystem, x: &[f64]) -> Result<Vec<BasisEval>> {
    system.spaces.iter().zip(x).map(|(s, &xk)| s.eval(xk)).collect()
}

/// `u^h` and `∇u^h` from per-direction basis evaluations. Boundary bases
/// carry zero coefficients.
fn field(system: &DiscreteSystem, coeffs: &[f64], bases: &[&BasisEval]) -> (f64, Vec<f64>) {
    let shape = system.shape();
    let d = shape.len();
    let p = system.degree();
    let mut value = 0.0;
    let mut grad = vec![0.0; d];
    let mut local = vec![0usize; d];
    'outer: loop {
        let mut index = 0;
        let mut stride = 1;
        let mut inside = true;
        for k in 0..d {
            let full = bases[k].first_index + local[k];
            if full == 0 || full > shape[k] {
                inside = false;
                break;
            }
            index += (full - 1) * stride;
            stride *= shape[k];
        }
        if inside {
            let c = coeffs[index];
            if c != 0.0 {
                let vals: Vec<f64> = (0..d).map(|k| bases[k].values[local[k]]).collect();
                value += c * vals.iter().product::<f64>();
                for (g, gk) in grad.iter_mut().enumerate() {
                    let prod: f64 = (0..d)
                        .map(|k| if k == g { bases[k].derivs[local[k]] } else { vals[k] })
                        .product();
                    *gk += c * prod;
                }
            }
        }
        for k in 0..d {
            if local[k] < p {
                local[k] += 1;
                continue 'outer;
            }
            local[k] = 0;
        }
        break;
    }
    (value, grad)
}

/// Evaluate `u^h = Σ U_{ij…} B_i(x) B_j(y) …` at each point.
pub fn evaluate_eigenfunction(
    system: &DiscreteSystem,
    coeffs: &[f64],
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = system.dof_count();
    if coeffs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: coeffs.len(),
        });
    }
    points
        .iter()
        .map(|x| {
            if x.len() != system.dim() {
                return Err(Error::DimensionMismatch {
                    expected: system.dim(),
                    got: x.len(),
                });
            }
            let bases = point_bases(system, x)?;
            let refs: Vec<&BasisEval> = bases.iter().collect();
            Ok(field(system, coeffs, &refs).0)
        })
        .collect()
}

/// Tensor Gauss rule over the mesh with basis tables per direction.
struct QuadratureGrid {
    /// Per direction: (node, weight, bases at node).
    dirs: Vec<Vec<(f64, f64, BasisEval)>>,
}

impl QuadratureGrid {
    fn new(system: &DiscreteSystem, points: usize) -> Self {
        let dirs = system
            .spaces
            .iter()
            .map(|s| {
                let bp = s.knots().breakpoints();
                let mut table = Vec::with_capacity(s.elements() * points);
                for e in 0..s.elements() {
                    let (xs, ws) = gauss_legendre_on(points, bp[e], bp[e + 1]);
                    for (x, w) in xs.into_iter().zip(ws) {
                        table.push((x, w, s.eval_in_element(e, x)));
                    }
                }
                table
            })
            .collect();
        Self { dirs }
    }

    /// Sum `f(x, w, u^h, ∇u^h)` over all tensor nodes.
    fn integrate<F>(&self, system: &DiscreteSystem, coeffs: &[f64], mut f: F) -> f64
    where
        F: FnMut(&[f64], f64, f64, &[f64]) -> f64,
    {
        let d = self.dirs.len();
        let mut q = vec![0usize; d];
        let mut x = vec![0.0; d];
        let mut total = 0.0;
        'outer: loop {
            let mut w = 1.0;
            let mut bases = Vec::with_capacity(d);
            for k in 0..d {
                let (xk, wk, b) = &self.dirs[k][q[k]];
                x[k] = *xk;
                w *= wk;
                bases.push(b);
            }
            let (u, g) = field(system, coeffs, &bases);
            total += f(&x, w, u, &g);
            for k in 0..d {
                if q[k] + 1 < self.dirs[k].len() {
                    q[k] += 1;
                    continue 'outer;
                }
                q[k] = 0;
            }
            break;
        }
        total
    }
}

/// A discrete eigenpair aligned with an exact mode.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    /// 1-based position in the sorted spectrum.
    pub mode: usize,
    pub exact: ExactMode,
    pub lambda_h: f64,
    /// Coefficients scaled to unit `L²` norm with `∫u^h u* ≥ 0`; empty when
    /// the eigenfunction is not compared.
    pub coeffs: Vec<f64>,
    /// Whether eigenfunction errors are reported for this mode.
    pub compare_function: bool,
    /// The exact eigenvalue belongs to a cluster of equal values.
    pub in_cluster: bool,
}

/// Pair discrete and exact eigenpairs by sorted position.
///
/// Eigenfunctions are compared only for diagonal modes. When a diagonal mode
/// lies in a cluster of equal exact eigenvalues, it takes the discrete
/// vector of that cluster that correlates best with it, since the discrete
/// ordering inside the cluster is arbitrary.
pub fn match_and_normalize(
    system: &DiscreteSystem,
    pairs: &[RitzPair],
    exact: &[ExactMode],
) -> Result<Vec<AlignedPair>> {
    let count = pairs.len().min(exact.len());
    let grid = QuadratureGrid::new(system, system.degree() + 2);
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=count {
        if i == count || !is_cluster(exact[i - 1].lambda, exact[i].lambda) {
            clusters.push((start, i));
            start = i;
        }
    }
    let mut out = Vec::with_capacity(count);
    for (lo, hi) in clusters {
        let in_cluster = hi - lo > 1 || (hi < exact.len() && hi == count && is_cluster(exact[hi - 1].lambda, exact[hi].lambda));
        let mut taken = vec![false; hi - lo];
        for i in lo..hi {
            let mode = &exact[i];
            let compare = mode.is_diagonal() && !pairs[i].vector.is_empty();
            let mut coeffs = Vec::new();
            if compare {
                let candidates: Vec<usize> = if hi - lo > 1 {
                    (lo..hi).filter(|&j| !taken[j - lo]).collect()
                } else {
                    vec![i]
                };
                let mut best = (f64::NEG_INFINITY, i, Vec::new());
                for j in candidates {
                    let c = normalized(system, &pairs[j].vector)?;
                    let corr = grid.integrate(system, &c, |x, w, u, _| w * u * mode.value(x));
                    if corr.abs() > best.0 {
                        best = (corr.abs(), j, if corr < 0.0 { c.iter().map(|v| -v).collect() } else { c });
                    }
                }
                taken[best.1 - lo] = true;
                coeffs = best.2;
            }
            out.push(AlignedPair {
                mode: i + 1,
                exact: mode.clone(),
                lambda_h: pairs[i].lambda,
                coeffs,
                compare_function: compare,
                in_cluster,
            });
        }
    }
    Ok(out)
}

/// Scale to unit `L²` norm (`xᵀMx = 1`, exact since `M` is integrated exactly).
fn normalized(system: &DiscreteSystem, x: &[f64]) -> Result<Vec<f64>> {
    let mx = system.m.matvec(x)?;
    let norm = crate::sparsela::norm_from_square(crate::sparsela::dot(x, &mx))?;
    if norm == 0.0 {
        return Err(Error::InvalidRequest("zero eigenvector".into()));
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

/// Errors of one aligned pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub mode: usize,
    pub i_over_n: f64,
    /// `(λ^h − λ*) / λ*`.
    pub ev: f64,
    /// `‖u^h − u*‖²_{L²}`; `None` when the eigenfunction is not compared.
    pub efl: Option<f64>,
    /// `EV + EFL`.
    pub efe: Option<f64>,
    pub diagonal: bool,
}

/// `EV`, and `EFL` by Gauss quadrature with `p + 2` points per element.
/// `normalizer` is the `N` in the `i/N` abscissa.
pub fn error_metrics(system: &DiscreteSystem, aligned: &AlignedPair, normalizer: usize) -> ErrorRecord {
    let exact = &aligned.exact;
    let ev = (aligned.lambda_h - exact.lambda) / exact.lambda;
    let efl = aligned.compare_function.then(|| {
        let grid = QuadratureGrid::new(system, system.degree() + 2);
        l2_error_squared(&grid, system, aligned)
    });
    ErrorRecord {
        mode: aligned.mode,
        i_over_n: aligned.mode as f64 / normalizer as f64,
        ev,
        efl,
        efe: efl.map(|e| ev + e),
        diagonal: exact.is_diagonal(),
    }
}

/// Errors for every aligned pair, sharing one quadrature table.
pub fn error_table(system: &DiscreteSystem, aligned: &[AlignedPair], normalizer: usize) -> Vec<ErrorRecord> {
    let grid = QuadratureGrid::new(system, system.degree() + 2);
    aligned
        .iter()
        .map(|a| {
            let ev = (a.lambda_h - a.exact.lambda) / a.exact.lambda;
            let efl = a.compare_function.then(|| l2_error_squared(&grid, system, a));
            ErrorRecord {
                mode: a.mode,
                i_over_n: a.mode as f64 / normalizer as f64,
                ev,
                efl,
                efe: efl.map(|e| ev + e),
                diagonal: a.exact.is_diagonal(),
            }
        })
        .collect()
}

fn l2_error_squared(grid: &QuadratureGrid, system: &DiscreteSystem, aligned: &AlignedPair) -> f64 {
    let exact = &aligned.exact;
    grid.integrate(system, &aligned.coeffs, |x, w, u, _| {
        let e = u - exact.value(x);
        w * e * e
    })
}

/// `‖∇(u^h − u*)‖²_{L²}` with `points` Gauss points per element, independent
/// of the `EFL` quadrature.
pub fn energy_error_squared(system: &DiscreteSystem, aligned: &AlignedPair, points: usize) -> f64 {
    let grid = QuadratureGrid::new(system, points);
    let exact = &aligned.exact;
    grid.integrate(system, &aligned.coeffs, |x, w, _, g| {
        let ge = exact.gradient(x);
        w * g.iter().zip(&ge).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    })
}

/// `|(λ^h − λ*) + λ*·EFL − ‖u^h − u*‖²_E| / λ*`.
pub fn pythagorean_defect(system: &DiscreteSystem, aligned: &AlignedPair, record: &ErrorRecord, points: usize) -> Option<f64> {
    let efl = record.efl?;
    let lambda = aligned.exact.lambda;
    let energy = energy_error_squared(system, aligned, points);
    Some(((aligned.lambda_h - lambda) + lambda * efl - energy).abs() / lambda)
}
