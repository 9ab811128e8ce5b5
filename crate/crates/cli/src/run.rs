//! Sweep orchestration: every `(p, ℓ)` point is assembled, analysed, solved
//! and verified independently on the worker pool, then written serially.

use rayon::prelude::*;
use riga_core::assembly::{dof_count, DiscreteSystem};
use riga_core::costmodel::{
    improvement_report, predict_factor_flops, predict_fb_flops, RunConfig, RunReport,
};
use riga_core::eigensolver::{Eigensolver, SliceSummary, SpectrumRequest};
use riga_core::verify::{error_table, exact_spectrum, match_and_normalize, ErrorRecord, ExactRequest};
use riga_core::Error;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{write_bundle, OutputBundle};

/// Symbolic cost of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopRow {
    pub d: u32,
    pub ne: usize,
    pub p: usize,
    pub level: u32,
    pub blocksize: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub nnz_m: usize,
    pub fill_nnz: u64,
    pub factor_flops: u64,
    pub fb_flops: u64,
    pub matvec_flops: u64,
    pub model_factor_flops: f64,
    pub model_fb_flops: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub index: usize,
    pub lambda: f64,
    pub residual: f64,
    pub slice: usize,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub spectrum: Vec<SpectrumRow>,
    pub errors: Vec<ErrorRecord>,
    pub report: RunReport,
    pub slices: Vec<SliceSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    CountMismatch,
    Solver,
}

/// A sweep point whose solve did not complete.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub p: usize,
    pub level: u32,
    pub kind: FailureKind,
    pub slice: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub p: usize,
    pub level: u32,
    pub seed: u64,
    pub flops: FlopRow,
    pub solve: Option<Result<Solved, PointFailure>>,
    /// Matrix Market text of `K` and `M` when exported.
    pub matrices: Option<(Vec<u8>, Vec<u8>)>,
}

/// Validate, run every sweep point and write the output bundle.
pub fn run_experiment(config: &ExperimentConfig) -> Result<OutputBundle, CliError> {
    config.validate()?;
    let mut results: Vec<PointResult> = config
        .points()
        .into_par_iter()
        .map(|(p, level)| run_point(config, p, level))
        .collect::<Result<_, _>>()?;
    attach_baselines(&mut results);
    write_bundle(config, &results)
}

fn run_point(config: &ExperimentConfig, p: usize, level: u32) -> Result<PointResult, CliError> {
    let seed = config.point_seed(p, level);
    let system = DiscreteSystem::new(config.d, config.ne, p, level)
        .map_err(|e| CliError::Config(format!("p = {p}, level = {level}: {e}")))?;
    let matrices = if config.export_matrices {
        let mut k = Vec::new();
        let mut m = Vec::new();
        system.k.write_matrix_market(&mut k).expect("writing to memory");
        system.m.write_matrix_market(&mut m).expect("writing to memory");
        Some((k, m))
    } else {
        None
    };
    let mut solver = Eigensolver::new(&system, config.solver_options(seed))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let n = system.dof_count();
    let symbolic = solver.factorizer().symbolic().clone();
    let flops = FlopRow {
        d: config.d,
        ne: config.ne,
        p,
        level,
        blocksize: config.ne >> level,
        n,
        nnz_m: system.m.nnz(),
        fill_nnz: symbolic.fill_nnz(),
        factor_flops: symbolic.factor_flops(),
        fb_flops: symbolic.solve_flops(),
        matvec_flops: 2 * system.m.nnz() as u64,
        model_factor_flops: predict_factor_flops(n as f64, p, level, config.d),
        model_fb_flops: predict_fb_flops(n as f64, p, level, config.d),
    };
    let solve = config.solve.then(|| solve_point(config, &system, &mut solver, p, level));
    Ok(PointResult {
        p,
        level,
        seed,
        flops,
        solve,
        matrices,
    })
}

fn solve_point(
    config: &ExperimentConfig,
    system: &DiscreteSystem,
    solver: &mut Eigensolver,
    p: usize,
    level: u32,
) -> Result<Solved, PointFailure> {
    let request = config.spectrum_request(p);
    let result = solver.solve_spectrum(request).map_err(|e| {
        let (kind, slice) = match &e {
            Error::CountMismatch { slice, .. } => (FailureKind::CountMismatch, Some(*slice)),
            _ => (FailureKind::Solver, None),
        };
        PointFailure {
            p,
            level,
            kind,
            slice,
            message: e.to_string(),
        }
    })?;
    let exact = match request {
        SpectrumRequest::Lowest(n) => exact_spectrum(config.d, ExactRequest::Count(n)),
        SpectrumRequest::Interval(a, b) => exact_spectrum(config.d, ExactRequest::Interval(a, b)),
    };
    let normalizer = dof_count(config.ne, p, 0, config.d);
    let errors = match_and_normalize(system, &result.pairs, &exact)
        .map(|aligned| error_table(system, &aligned, normalizer))
        .map_err(|e| PointFailure {
            p,
            level,
            kind: FailureKind::Solver,
            slice: None,
            message: e.to_string(),
        })?;
    let spectrum = result
        .pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| SpectrumRow {
            index: i + 1,
            lambda: pair.lambda,
            residual: pair.residual,
            slice: pair.slice,
        })
        .collect();
    let n0 = match request {
        SpectrumRequest::Lowest(n) => n,
        SpectrumRequest::Interval(..) => result.pairs.len(),
    };
    let run_config = RunConfig {
        d: config.d,
        ne: config.ne,
        p,
        level,
        n: system.dof_count(),
        n0,
    };
    Ok(Solved {
        spectrum,
        errors,
        report: RunReport::new(run_config, &result.counters),
        slices: result.slices,
    })
}

/// Compare each rIGA point against the IGA point of the same degree.
fn attach_baselines(results: &mut [PointResult]) {
    let baselines: Vec<(usize, RunReport)> = results
        .iter()
        .filter(|r| r.level == 0)
        .filter_map(|r| match &r.solve {
            Some(Ok(s)) => Some((r.p, s.report.clone())),
            _ => None,
        })
        .collect();
    for r in results.iter_mut().filter(|r| r.level > 0) {
        if let Some(Ok(solved)) = &mut r.solve {
            if let Some((_, base)) = baselines.iter().find(|(p, _)| *p == r.p) {
                solved.report.ratios_vs_baseline = improvement_report(&solved.report, base).ok();
            }
        }
    }
}
