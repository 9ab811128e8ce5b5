//! Inertia-validated spectrum slicing around shift-and-invert thick-restart
//! Lanczos.
//!
//! Each slice `(σ_k, σ_{k+1})` is bracketed by two `LDLᵀ` factorizations whose
//! inertias fix how many eigenvalues it holds. Lanczos runs on
//! `(K − σ_k M)⁻¹M` until exactly that many pairs inside the slice have
//! converged, and the upper factorization becomes the next slice's operator.

mod lanczos;
mod tridiag;

pub use lanczos::{LanczosState, LockedSet, RitzValue};
pub use tridiag::{symmetric_eig, tridiag_eig, SymEigen};

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteSystem;
use crate::counters::CostCounters;
use crate::sparse::SymSparseMatrix;
use crate::sparsela::{
    dot, mass_matvec, solve_fb, LdlFactorization, OrderingStrategy, ShiftFactorizer,
};
use crate::{Error, Result};

/// `H v = (K − σM)⁻¹ M v`; one mass mat–vec and one f/b elimination.
pub fn operator_apply(
    fact: &LdlFactorization,
    m: &SymSparseMatrix,
    v: &[f64],
    counters: &mut CostCounters,
) -> Result<Vec<f64>> {
    let mv = mass_matvec(m, v, counters)?;
    solve_fb(fact, &mv, counters)
}

/// Pivot growth above which shifted solves are iteratively refined.
pub const GROWTH_LIMIT: f64 = 1e3;
const REFINEMENT_STEPS: usize = 3;

/// [`operator_apply`] with iterative refinement against `K − σM` when the
/// factorization shows pivot growth. Each correction is one more f/b
/// elimination plus a stiffness and a mass mat–vec.
pub fn refined_apply(
    shift: (f64, &LdlFactorization),
    k: &SymSparseMatrix,
    m: &SymSparseMatrix,
    v: &[f64],
    counters: &mut CostCounters,
) -> Result<Vec<f64>> {
    let (sigma, fact) = shift;
    let b = mass_matvec(m, v, counters)?;
    let mut x = solve_fb(fact, &b, counters)?;
    if fact.growth() <= GROWTH_LIMIT {
        return Ok(x);
    }
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for _ in 0..REFINEMENT_STEPS {
        let kx = mass_matvec(k, &x, counters)?;
        let mx = mass_matvec(m, &x, counters)?;
        let r: Vec<f64> = b.iter().zip(kx.iter().zip(&mx)).map(|(b, (k, m))| b - k + sigma * m).collect();
        let dx = solve_fb(fact, &r, counters)?;
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        if amax(&dx) <= 1e-15 * amax(&x) {
            break;
        }
    }
    Ok(x)
}

/// Solver knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Basis size at which Lanczos restarts.
    pub lanczos_m: usize,
    /// Unconverged Ritz vectors kept at a restart on top of the converged count.
    pub keep: usize,
    pub tol: f64,
    pub seed: u64,
    pub ordering: OrderingStrategy,
    /// Restart cycles allowed per Lanczos run.
    pub max_cycles: usize,
    /// Keep eigenvectors in the result (otherwise only eigenvalues).
    pub retain_vectors: bool,
    /// Measure the orthogonality and spectral-transform invariants.
    pub check_invariants: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lanczos_m: 60,
            keep: 8,
            tol: 1e-10,
            seed: 0,
            ordering: OrderingStrategy::Separator,
            max_cycles: 100,
            retain_vectors: true,
            check_invariants: cfg!(debug_assertions),
        }
    }
}

/// What part of the spectrum to compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpectrumRequest {
    Lowest(usize),
    Interval(f64, f64),
}

/// A converged eigenpair.
#[derive(Debug, Clone)]
pub struct RitzPair {
    /// Transformed eigenvalue `1/(λ − σ)`.
    pub theta: f64,
    pub lambda: f64,
    /// Shift of the operator the pair was extracted from.
    pub sigma: f64,
    /// Coefficient vector, M-normalized; empty when vectors are not retained.
    pub vector: Vec<f64>,
    /// `‖Kx − λMx‖₂ / ‖Kx‖₂`.
    pub residual: f64,
    pub slice: usize,
}

/// Eigenpairs of one slice.
#[derive(Debug, Clone)]
pub struct SliceResult {
    pub slice: usize,
    pub lower: f64,
    pub upper: f64,
    /// `ν(upper) − ν(lower)`.
    pub expected_count: usize,
    pub pairs: Vec<RitzPair>,
    /// Shifts Lanczos ran at.
    pub shifts: Vec<f64>,
    pub counters: CostCounters,
}

/// Slice bookkeeping kept in the final result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slice: usize,
    pub lower: f64,
    pub upper: f64,
    pub expected_count: usize,
    pub shifts: Vec<f64>,
}

/// All eigenpairs of a request, sorted by `λ`.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub pairs: Vec<RitzPair>,
    pub slices: Vec<SliceSummary>,
    pub counters: CostCounters,
    /// Largest off-diagonal `|VᵀMV|` seen at a restart boundary.
    pub max_orthogonality_loss: f64,
    /// Largest `|θ(λ − σ) − 1|` over converged pairs.
    pub max_transform_defect: f64,
}

impl EigenResult {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }
}

/// A factorized shift with its inertia count `ν(σ)`.
#[derive(Debug, Clone)]
pub struct Shift {
    pub sigma: f64,
    pub nu: usize,
    pub fact: LdlFactorization,
}

const ZERO_PIVOT_RETRIES: usize = 8;
const WIDTH_ADJUSTMENTS: usize = 40;
const BARREN_RUNS: usize = 2;

/// Spectrum-slicing eigensolver bound to one discrete system.
#[derive(Debug)]
pub struct Eigensolver<'a> {
    system: &'a DiscreteSystem,
    factorizer: ShiftFactorizer,
    options: SolverOptions,
    orthogonality_loss: f64,
    transform_defect: f64,
}

impl<'a> Eigensolver<'a> {
    pub fn new(system: &'a DiscreteSystem, options: SolverOptions) -> Result<Self> {
        if options.lanczos_m < 4 {
            return Err(Error::InvalidRequest(format!(
                "Lanczos basis size {} below 4",
                options.lanczos_m
            )));
        }
        if !(options.tol > 0.0 && options.tol < 1.0) {
            return Err(Error::InvalidRequest(format!("tolerance {} not in (0,1)", options.tol)));
        }
        let factorizer = ShiftFactorizer::new(system, options.ordering);
        Ok(Self {
            system,
            factorizer,
            options,
            orthogonality_loss: 0.0,
            transform_defect: 0.0,
        })
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn factorizer(&self) -> &ShiftFactorizer {
        &self.factorizer
    }

    /// Factor `K − σM`, nudging `σ` upward by `1e-8·width` on a zero pivot.
    /// The caller decides whether the shift counts as accepted.
    pub fn factor_shift(&self, sigma: f64, width: f64, counters: &mut CostCounters) -> Result<Shift> {
        let step = 1e-8 * if width > 0.0 { width } else { sigma.abs().max(1.0) };
        let mut sigma = sigma;
        let mut attempt = 0;
        loop {
            match self.factorizer.factor(sigma, counters) {
                Ok(fact) => {
                    let nu = fact.inertia().negative;
                    return Ok(Shift { sigma, nu, fact });
                }
                Err(Error::ZeroPivot { .. }) if attempt < ZERO_PIVOT_RETRIES => {
                    attempt += 1;
                    sigma += step;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn rng_for(&self, slice: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.options
                .seed
                .wrapping_add((slice as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )
    }

        /// Eigenpairs for a request, slicing the spectrum from the bottom of the
    /// request upward.
    ///
    /// Lowest-`N₀` requests start at `σ = 0`, where `K` is positive definite.
    /// Each next shift is placed so that the slice holds about `m/2`
    /// eigenvalues by the density seen so far; shifts whose inertia count is
    /// too large or too small are rejected and retried.
    pub fn solve_spectrum(&mut self, request: SpectrumRequest) -> Result<EigenResult> {
        let n = self.system.dof_count();
        let (start, end, wanted) = match request {
            SpectrumRequest::Lowest(n0) => {
                if n0 > n {
                    return Err(Error::InvalidRequest(format!("{n0} eigenpairs requested, N = {n}")));
                }
                (0.0, f64::INFINITY, n0)
            }
            SpectrumRequest::Interval(a, b) => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidRequest(format!("interval [{a}, {b}]")));
                }
                (a, b, n)
            }
        };
        let mut counters = CostCounters::default();
        let mut pairs: Vec<RitzPair> = Vec::new();
        let mut slices = Vec::new();
        self.orthogonality_loss = 0.0;
        self.transform_defect = 0.0;
        if wanted == 0 {
            return Ok(self.finish(pairs, slices, counters, request));
        }

        let m = self.options.lanczos_m;
        let target_size = (m / 2).max(1);
        let cap = m - m / 4;
        let (kd, md) = (self.system.k.diagonal(), self.system.m.diagonal());
        let top = kd.iter().zip(&md).map(|(k, m)| k / m).fold(0.0f64, f64::max);
        let mut density = n as f64 / top;

        let mut lower = self.factor_shift(start, top * 1e-3, &mut counters)?;
        counters.n_sh += 1;
        let first_nu = lower.nu;
        let mut neighbours: VecDeque<LockedSet> = VecDeque::new();
        let mut slice = 0;
        loop {
            let done = match request {
                SpectrumRequest::Lowest(n0) => lower.nu >= n0 || lower.nu >= n,
                SpectrumRequest::Interval(..) => lower.sigma >= end || lower.nu >= n,
            };
            if done {
                break;
            }
            let remaining = match request {
                SpectrumRequest::Lowest(n0) => n0 - lower.nu,
                SpectrumRequest::Interval(..) => n - lower.nu,
            };
            let target = target_size.min(remaining).max(1);
            let mut width = target as f64 / density;
            let mut adjustments = 0;
            let upper = loop {
                let sigma = (lower.sigma + width).min(end);
                let shift = self.factor_shift(sigma, width, &mut counters)?;
                let count = shift.nu - lower.nu;
                let last = shift.sigma >= end
                    || shift.nu >= n
                    || matches!(request, SpectrumRequest::Lowest(n0) if shift.nu >= n0);
                adjustments += 1;
                if adjustments < WIDTH_ADJUSTMENTS {
                    if count > cap {
                        width *= (target as f64 / count as f64).clamp(0.1, 0.7);
                        continue;
                    }
                    if 4 * count < target && !last {
                        width *= if count == 0 { 4.0 } else { (target as f64 / count as f64).min(4.0) };
                        continue;
                    }
                }
                break shift;
            };
            counters.n_sh += 1;
            let width = upper.sigma - lower.sigma;
            let count = upper.nu - lower.nu;
            if count > 0 {
                density = count as f64 / width;
            }

            let mut deflate = LockedSet::new();
            for set in &neighbours {
                deflate.extend(set);
            }
            let (result, locked) = self.solve_slice_locked(slice, &lower, &upper, &deflate)?;
            counters += result.counters;
            neighbours.push_back(locked);
            if neighbours.len() > 2 {
                neighbours.pop_front();
            }
            slices.push(SliceSummary {
                slice,
                lower: result.lower,
                upper: result.upper,
                expected_count: result.expected_count,
                shifts: result.shifts,
            });
            pairs.extend(result.pairs);
            slice += 1;
            lower = upper;
        }
        debug_assert!(first_nu == 0 || matches!(request, SpectrumRequest::Interval(..)));
        Ok(self.finish(pairs, slices, counters, request))
    }

    fn finish(
        &self,
        mut pairs: Vec<RitzPair>,
        slices: Vec<SliceSummary>,
        counters: CostCounters,
        request: SpectrumRequest,
    ) -> EigenResult {
        pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let mut pairs = dedup_by_angle(pairs, &self.system.m);
        match request {
            SpectrumRequest::Lowest(n0) => pairs.truncate(n0),
            SpectrumRequest::Interval(a, b) => pairs.retain(|p| a < p.lambda && p.lambda < b),
        }
        if !self.options.retain_vectors {
            for p in &mut pairs {
                p.vector = Vec::new();
            }
        }
        EigenResult {
            pairs,
            slices,
            counters,
            max_orthogonality_loss: self.orthogonality_loss,
            max_transform_defect: self.transform_defect,
        }
    }

    /// All eigenpairs strictly between the two factorized shifts.
    ///
    /// `neighbours` holds eigenvectors already found in adjacent slices;
    /// Lanczos is deflated against them.
    pub fn solve_slice(
        &mut self,
        slice: usize,
        lower: &Shift,
        upper: &Shift,
        neighbours: &LockedSet,
    ) -> Result<SliceResult> {
        self.solve_slice_locked(slice, lower, upper, neighbours)
            .map(|(result, _)| result)
    }

    fn solve_slice_locked(
        &mut self,
        slice: usize,
        lower: &Shift,
        upper: &Shift,
        neighbours: &LockedSet,
    ) -> Result<(SliceResult, LockedSet)> {
        let (lo, hi) = (lower.sigma, upper.sigma);
        let expected = upper.nu.saturating_sub(lower.nu);
        let mut counters = CostCounters::default();
        let mut found = Vec::with_capacity(expected);
        let mut locked = LockedSet::new();
        let mut shifts = Vec::new();
        let mut rng = self.rng_for(slice);
        if expected > 0 {
            shifts.push(lo);
            self.lanczos_runs(
                lo,
                &lower.fact, lo, hi, expected, neighbours, &mut found, &mut locked, slice, &mut rng,
                &mut counters,
            )?;
            if found.len() < expected {
                let mid = 0.5 * (lo + hi);
                let shift = self.factor_shift(mid, hi - lo, &mut counters)?;
                counters.n_sh += 1;
                shifts.push(shift.sigma);
                self.lanczos_runs(
                    shift.sigma,
                    &shift.fact, lo, hi, expected, neighbours, &mut found, &mut locked, slice,
                    &mut rng, &mut counters,
                )?;
            }
        }
        if found.len() != expected {
            return Err(Error::CountMismatch {
                slice,
                lower: lo,
                upper: hi,
                expected,
                found: found.len(),
            });
        }
        found.sort_by(|a: &RitzPair, b| a.lambda.total_cmp(&b.lambda));
        Ok((
            SliceResult {
                slice,
                lower: lo,
                upper: hi,
                expected_count: expected,
                pairs: found,
                shifts,
                counters,
            },
            locked,
        ))
    }

    /// Fresh Lanczos runs at one shift until `need` pairs inside `(lo, hi)`
    /// are found or runs stop producing new pairs.
    #[allow(clippy::too_many_arguments)]
    fn lanczos_runs(
        &mut self,
        sigma: f64,
        fact: &LdlFactorization,
        lo: f64,
        hi: f64,
        need: usize,
        neighbours: &LockedSet,
        found: &mut Vec<RitzPair>,
        locked: &mut LockedSet,
        slice: usize,
        rng: &mut ChaCha8Rng,
        counters: &mut CostCounters,
    ) -> Result<()> {
        let opts = self.options.clone();
        let system = self.system;
        let (k, m) = (&system.k, &system.m);
        let n = k.dim();
        let inside = |lambda: f64| lo < lambda && lambda < hi;
        let mut barren = 0;
        while found.len() < need && barren < BARREN_RUNS {
            let before = found.len();
            // Converged pairs outside the slice, deflated for this run only.
            let mut outside = LockedSet::new();
            let Some(start) = random_start(n, &[neighbours, locked], rng) else {
                break;
            };
            let mut state = LanczosState::new(sigma, start, m, counters)?;
            for cycle in 0..opts.max_cycles {
                counters.n_it += 1;
                state.extend(
                    opts.lanczos_m,
                    |v, c| refined_apply((sigma, fact), k, m, v, c),
                    m,
                    &[neighbours, locked, &outside],
                    rng,
                    counters,
                )?;
                let ritz = state.rayleigh_ritz(opts.tol);
                let mut newly = 0;
                for r in ritz.iter().filter(|r| r.converged) {
                    let (x, mx) = state.ritz_vector(&r.weights);
                    if inside(r.lambda) {
                        if found.len() >= need {
                            continue;
                        }
                        let residual = pair_residual(k, &x, &mx, r.lambda)?;
                        let defect = (r.theta * (r.lambda - sigma) - 1.0).abs();
                        self.transform_defect = self.transform_defect.max(defect);
                        if opts.check_invariants {
                            debug_assert!(defect < 1e-8, "spectral transform defect {defect}");
                        }
                        found.push(RitzPair {
                            theta: r.theta,
                            lambda: r.lambda,
                            sigma,
                            vector: x.clone(),
                            residual,
                            slice,
                        });
                        locked.push(x, mx);
                        newly += 1;
                    } else {
                        outside.push(x, mx);
                    }
                }
                if found.len() >= need || state.is_exhausted() {
                    break;
                }
                let pending: Vec<&RitzValue> = ritz.iter().filter(|r| !r.converged).collect();
                let pending_inside = pending.iter().filter(|r| inside(r.lambda)).count();
                if newly == 0 && pending_inside == 0 && cycle > 0 {
                    break;
                }
                let keep = (found.len() + opts.keep).min(opts.lanczos_m / 2);
                let chosen = restart_choice(pending, lo, hi, keep);
                state.thick_restart(&chosen);
                if opts.check_invariants {
                    let loss = state.orthogonality_loss();
                    self.orthogonality_loss = self.orthogonality_loss.max(loss);
                    debug_assert!(loss < 1e-8, "VᵀMV off-diagonal {loss} at restart");
                }
            }
            if found.len() == before {
                barren += 1;
            } else {
                barren = 0;
            }
        }
        Ok(())
    }
}

/// Convenience wrapper: build a solver and run one request.
pub fn solve_spectrum(
    system: &DiscreteSystem,
    request: SpectrumRequest,
    options: SolverOptions,
) -> Result<EigenResult> {
    Eigensolver::new(system, options)?.solve_spectrum(request)
}

/// Drop pairs whose vector is within an M-angle of `1e-6` of an earlier
/// pair with a nearby eigenvalue.
fn dedup_by_angle(pairs: Vec<RitzPair>, m: &SymSparseMatrix) -> Vec<RitzPair> {
    let mut kept: Vec<RitzPair> = Vec::with_capacity(pairs.len());
    let mut products: Vec<Vec<f64>> = Vec::new();
    for p in pairs {
        let duplicate = kept.iter().zip(&products).rev().take_while(|(q, _)| {
            (p.lambda - q.lambda).abs() <= 1e-8 * p.lambda.abs().max(1.0)
        });
        let mut is_dup = false;
        for (_, mq) in duplicate {
            let c = dot(&p.vector, mq).abs().min(1.0);
            if c.acos() <= 1e-6 {
                is_dup = true;
                break;
            }
        }
        if !is_dup {
            products.push(m.matvec(&p.vector).expect("vector length matches M"));
            kept.push(p);
        }
    }
    kept
}

/// Random vector M-orthogonal to the locked sets, `None` if they span the space.
fn random_start(n: usize, locked: &[&LockedSet], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let before = dot(&v, &v).sqrt();
    for _ in 0..2 {
        for set in locked {
            set.project(&mut v);
        }
    }
    (dot(&v, &v).sqrt() > 1e-8 * before).then_some(v)
}

/// Retained Ritz vectors: inside the slice first, then by distance of `λ` to
/// the slice, then by `|θ|`.
fn restart_choice(mut pending: Vec<&RitzValue>, lo: f64, hi: f64, keep: usize) -> Vec<&RitzValue> {
    let key = |r: &RitzValue| {
        let dist = if r.lambda <= lo {
            lo - r.lambda
        } else if r.lambda >= hi {
            r.lambda - hi
        } else {
            0.0
        };
        (dist, -r.theta.abs())
    };
    pending.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    pending.truncate(keep);
    pending
}

fn pair_residual(k: &SymSparseMatrix, x: &[f64], mx: &[f64], lambda: f64) -> Result<f64> {
    let kx = k.matvec(x)?;
    let r: f64 = kx
        .iter()
        .zip(mx)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let denom = dot(&kx, &kx).sqrt();
    Ok(if denom > 0.0 { r / denom } else { r })
}
