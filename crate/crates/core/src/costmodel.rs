//! Order-of-magnitude cost model and IGA-vs-rIGA run comparisons.
//!
//! FLOP predictions use unit leading constants, so only ratios and slopes are
//! meaningful. Time predictions follow `t ≈ A·N^a·p^b` with `A` calibrated
//! from one measured run.

use serde::{Deserialize, Serialize};

use crate::assembly::nnz_mass_formula;
use crate::counters::CostCounters;
use crate::{Error, Result};

/// Anchor-to-target size ratio beyond which time predictions are refused.
pub const MAX_EXTRAPOLATION: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Factorization,
    Elimination,
    MatVec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    Iga,
    Riga,
}

impl Discretization {
    pub fn of_level(level: u32) -> Self {
        if level == 0 {
            Self::Iga
        } else {
            Self::Riga
        }
    }
}

/// `IGA: N^{(d+1)/2} p³`, `rIGA: 2^{dℓ}(2^{-dℓ}N)^{(d+1)/2} p³ + N^{(d+1)/2}`.
pub fn predict_factor_flops(n: f64, p: usize, level: u32, d: u32) -> f64 {
    block_model(n, p as f64, level, d, (d as f64 + 1.0) / 2.0, 3)
}

/// `IGA: N^{(d+1)/3} p²`, `rIGA: 2^{dℓ}(2^{-dℓ}N)^{(d+1)/3} p² + N^{(d+1)/3}`.
pub fn predict_fb_flops(n: f64, p: usize, level: u32, d: u32) -> f64 {
    block_model(n, p as f64, level, d, (d as f64 + 1.0) / 3.0, 2)
}

fn block_model(n: f64, p: f64, level: u32, d: u32, exponent: f64, p_power: i32) -> f64 {
    if level == 0 {
        n.powf(exponent) * p.powi(p_power)
    } else {
        let blocks = 2f64.powi((d * level) as i32);
        blocks * (n / blocks).powf(exponent) * p.powi(p_power) + n.powf(exponent)
    }
}

/// One mass mat–vec: `2·nnz(M)` from the closed-form count.
pub fn predict_matvec_flops(ne: usize, p: usize, level: u32, d: u32) -> f64 {
    2.0 * nnz_mass_formula(ne, p, level, d) as f64
}

/// Exponents `(a, b)` of `t ≈ A·N^a·p^b`.
pub fn time_exponents(op: Operation, disc: Discretization, d: u32) -> (f64, f64) {
    let df = d as f64;
    match (op, disc) {
        (Operation::Factorization, Discretization::Iga) => ((df + 1.0) / 2.0, 3.0),
        (Operation::Factorization, Discretization::Riga) => ((df + 1.0) / 2.0, 1.0),
        (Operation::Elimination, Discretization::Iga) => ((df + 1.0) / 3.0, 2.0),
        (Operation::Elimination, Discretization::Riga) => ((df + 1.0) / 3.0, 1.0),
        (Operation::MatVec, _) => (1.0, df),
    }
}

/// Predicted FLOPs and the time-model constants for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPrediction {
    pub fact_flops: f64,
    pub fb_flops: f64,
    pub matvec_flops: f64,
    /// `(a, b)` per operation: factorization, elimination, mat–vec.
    pub exponents: [(f64, f64); 3],
}

pub fn predict(ne: usize, p: usize, level: u32, d: u32) -> CostPrediction {
    let n = crate::assembly::dof_count(ne, p, level, d) as f64;
    let disc = Discretization::of_level(level);
    CostPrediction {
        fact_flops: predict_factor_flops(n, p, level, d),
        fb_flops: predict_fb_flops(n, p, level, d),
        matvec_flops: predict_matvec_flops(ne, p, level, d),
        exponents: [
            time_exponents(Operation::Factorization, disc, d),
            time_exponents(Operation::Elimination, disc, d),
            time_exponents(Operation::MatVec, disc, d),
        ],
    }
}

/// `t ≈ A·N^a·p^b` calibrated on one anchor run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeModel {
    pub a: f64,
    pub b: f64,
    /// `A`, seconds.
    pub scale: f64,
    pub anchor_n: f64,
}

impl TimeModel {
    pub fn calibrate(
        op: Operation,
        disc: Discretization,
        d: u32,
        anchor_n: f64,
        p: usize,
        seconds: f64,
    ) -> Result<Self> {
        if !(anchor_n > 0.0 && seconds > 0.0 && p > 0) {
            return Err(Error::InvalidRequest(format!(
                "anchor N = {anchor_n}, t = {seconds}, p = {p}"
            )));
        }
        let (a, b) = time_exponents(op, disc, d);
        // log A = log t − a log N − b log p
        let log_scale = seconds.ln() - a * anchor_n.ln() - b * (p as f64).ln();
        Ok(Self {
            a,
            b,
            scale: log_scale.exp(),
            anchor_n,
        })
    }

    /// Predicted seconds; refuses targets more than 64× the anchor size.
    pub fn predict(&self, n: f64, p: usize) -> Result<f64> {
        if n > MAX_EXTRAPOLATION * self.anchor_n {
            return Err(Error::InvalidRequest(format!(
                "N = {n} is more than {MAX_EXTRAPOLATION}× the anchor N = {}",
                self.anchor_n
            )));
        }
        Ok((self.scale.ln() + self.a * n.ln() + self.b * (p as f64).ln()).exp())
    }
}

/// Convenience form of [`TimeModel::predict`] with an already calibrated `A`.
pub fn predict_time(model: &TimeModel, n: f64, p: usize) -> Result<f64> {
    model.predict(n, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: u32,
    pub ne: usize,
    pub p: usize,
    pub level: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N0")]
    pub n0: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CounterSummary {
    #[serde(rename = "Nsh")]
    pub nsh: u64,
    #[serde(rename = "Nfa")]
    pub nfa: u64,
    #[serde(rename = "Nfb")]
    pub nfb: u64,
    #[serde(rename = "Nmv")]
    pub nmv: u64,
    #[serde(rename = "Nit")]
    pub nit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlopSummary {
    pub fact: u64,
    pub fb: u64,
    pub matvec: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSummary {
    pub fact: f64,
    pub fb: f64,
    pub matvec: f64,
    pub total: f64,
}

/// Baseline-over-run ratios; values above 1 are improvements of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub fact: f64,
    pub fb: f64,
    pub matvec: f64,
    pub total: f64,
    pub time_total: f64,
    /// The run needs more mat–vec FLOPs than the baseline.
    pub matvec_degraded: bool,
}

/// Counters, FLOPs and times of one solve, in the report JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub counters: CounterSummary,
    pub flops: FlopSummary,
    pub time_s: TimeSummary,
    pub ratios_vs_baseline: Option<Ratios>,
}

impl RunReport {
    pub fn new(config: RunConfig, c: &CostCounters) -> Self {
        Self {
            config,
            counters: CounterSummary {
                nsh: c.n_sh,
                nfa: c.n_fa,
                nfb: c.n_fb,
                nmv: c.n_mv,
                nit: c.n_it,
            },
            flops: FlopSummary {
                fact: c.factorization.flops,
                fb: c.elimination.flops,
                matvec: c.matvec.flops,
            },
            time_s: TimeSummary {
                fact: c.factorization.wall_time,
                fb: c.elimination.wall_time,
                matvec: c.matvec.wall_time,
                total: c.factorization.wall_time + c.elimination.wall_time + c.matvec.wall_time,
            },
            ratios_vs_baseline: None,
        }
    }

    pub fn total_flops(&self) -> u64 {
        self.flops.fact + self.flops.fb + self.flops.matvec
    }

    /// Factorizations beyond one per accepted shift.
    pub fn retries(&self) -> u64 {
        self.counters.nfa.saturating_sub(self.counters.nsh)
    }
}

/// Ratios `baseline / run` per operation. Both runs must share `(d, ne, p, N₀)`.
pub fn improvement_report(run: &RunReport, baseline: &RunReport) -> Result<Ratios> {
    let (a, b) = (&run.config, &baseline.config);
    if (a.d, a.ne, a.p, a.n0) != (b.d, b.ne, b.p, b.n0) {
        return Err(Error::ConfigMismatch(format!(
            "(d, ne, p, N0) = ({}, {}, {}, {}) vs ({}, {}, {}, {})",
            a.d, a.ne, a.p, a.n0, b.d, b.ne, b.p, b.n0
        )));
    }
    let ratio = |base: f64, new: f64| if new > 0.0 { base / new } else if base > 0.0 { f64::INFINITY } else { 1.0 };
    let matvec = ratio(baseline.flops.matvec as f64, run.flops.matvec as f64);
    Ok(Ratios {
        fact: ratio(baseline.flops.fact as f64, run.flops.fact as f64),
        fb: ratio(baseline.flops.fb as f64, run.flops.fb as f64),
        matvec,
        total: ratio(baseline.total_flops() as f64, run.total_flops() as f64),
        time_total: ratio(baseline.time_s.total, run.time_s.total),
        matvec_degraded: matvec < 1.0,
    })
}
