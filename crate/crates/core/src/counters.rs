//! Operation counters for the eigensolution pipeline.

use std::ops::AddAssign;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// FLOPs, call count and accumulated wall time of one kind of kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounter {
    pub flops: u64,
    pub calls: u64,
    pub wall_time: f64,
}

impl OpCounter {
    pub fn record(&mut self, flops: u64, started: Instant) {
        self.flops += flops;
        self.calls += 1;
        self.wall_time += started.elapsed().as_secs_f64();
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.flops += rhs.flops;
        self.calls += rhs.calls;
        self.wall_time += rhs.wall_time;
    }
}

/// Counters of a whole eigensolution: shifts, factorizations, f/b
/// eliminations, mass mat–vecs and restart cycles, plus per-kernel totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostCounters {
    pub n_sh: u64,
    pub n_fa: u64,
    pub n_fb: u64,
    pub n_mv: u64,
    pub n_it: u64,
    pub factorization: OpCounter,
    pub elimination: OpCounter,
    pub matvec: OpCounter,
}

impl CostCounters {
    /// Factorizations beyond one per accepted shift.
    pub fn retries(&self) -> u64 {
        self.n_fa.saturating_sub(self.n_sh)
    }
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.n_sh += rhs.n_sh;
        self.n_fa += rhs.n_fa;
        self.n_fb += rhs.n_fb;
        self.n_mv += rhs.n_mv;
        self.n_it += rhs.n_it;
        self.factorization += rhs.factorization;
        self.elimination += rhs.elimination;
        self.matvec += rhs.matvec;
    }
}
