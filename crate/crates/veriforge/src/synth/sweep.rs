//! Clock-period sweep: find the fastest feasible clock.
//!
//! Binary search over the period grid. Valid because feasibility is
//! monotone in the period: mock timing is monotone by construction,
//! and the external adapter documents the same assumption.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PortDecl, PpaReport, VerilogSource};

use super::{synthesize, SynthBackendConfig, SynthError};

/// Sweep range and budget. The grid is `lo, lo+res, …` up to and
/// including `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_lo_ps")]
    pub lo_ps: f64,
    #[serde(default = "default_hi_ps")]
    pub hi_ps: f64,
    #[serde(default = "default_resolution_ps")]
    pub resolution_ps: f64,
    #[serde(default = "default_max_synth_calls")]
    pub max_synth_calls: u32,
}

fn default_lo_ps() -> f64 {
    10.0
}
fn default_hi_ps() -> f64 {
    1000.0
}
fn default_resolution_ps() -> f64 {
    1.0
}
fn default_max_synth_calls() -> u32 {
    32
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lo_ps: default_lo_ps(),
            hi_ps: default_hi_ps(),
            resolution_ps: default_resolution_ps(),
            max_synth_calls: default_max_synth_calls(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lo_ps > 0.0 && self.lo_ps < self.hi_ps) {
            return Err(format!(
                "sweep range invalid: lo {} >= hi {}",
                self.lo_ps, self.hi_ps
            ));
        }
        if self.resolution_ps <= 0.0 {
            return Err(format!(
                "sweep resolution must be positive, got {}",
                self.resolution_ps
            ));
        }
        Ok(())
    }

    /// Number of grid points, `hi` included.
    pub fn grid_len(&self) -> usize {
        let steps = ((self.hi_ps - self.lo_ps) / self.resolution_ps).floor() as usize;
        let last = self.lo_ps + steps as f64 * self.resolution_ps;
        if last < self.hi_ps {
            steps + 2
        } else {
            steps + 1
        }
    }

    /// Period at grid index `i`; the final index is exactly `hi`.
    pub fn grid_period(&self, i: usize) -> f64 {
        if i == self.grid_len() - 1 {
            self.hi_ps
        } else {
            self.lo_ps + i as f64 * self.resolution_ps
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    /// Timing met nowhere in range; the report at `hi_ps` rides along.
    #[error("timing infeasible even at {hi_ps} ps")]
    Infeasible { hi_ps: f64, report: Box<PpaReport> },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("sweep config: {0}")]
    Config(String),
}

/// Result of one sweep: the minimum feasible period, its report, and
/// how many synthesis calls were spent.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub min_clock_ps: f64,
    pub report: PpaReport,
    pub synth_calls: u32,
}

/// Finds the smallest grid period at which timing is met, by binary
/// search, spending at most `max_synth_calls` synthesis runs. When the
/// budget runs out first, the best feasible period found so far is
/// returned (coarser than `resolution_ps`).
pub fn sweep_min_clock(
    source: &VerilogSource,
    ports: &[PortDecl],
    backend: &SynthBackendConfig,
    cfg: &SweepConfig,
    workdir: &Path,
) -> Result<SweepResult, SweepError> {
    cfg.validate().map_err(SweepError::Config)?;

    let mut calls: u32 = 0;
    let mut cache: BTreeMap<usize, PpaReport> = BTreeMap::new();
    let mut eval = |i: usize, calls: &mut u32| -> Result<bool, SweepError> {
        *calls += 1;
        let period = cfg.grid_period(i);
        let sweep_dir = workdir.join(format!("synth_{period:.0}"));
        let report = synthesize(source, period, backend, &sweep_dir, ports)?;
        let met = report.synthesizable && report.timing_met();
        cache.insert(i, report);
        Ok(met)
    };

    let last = cfg.grid_len() - 1;
    if !eval(last, &mut calls)? {
        return Err(SweepError::Infeasible {
            hi_ps: cfg.hi_ps,
            report: Box::new(cache.remove(&last).expect("hi evaluated")),
        });
    }

    // Lower-bound search: invariant is "hi_idx feasible, everything
    // below lo_idx infeasible".
    let mut lo_idx = 0usize;
    let mut hi_idx = last;
    while lo_idx < hi_idx {
        if calls >= cfg.max_synth_calls {
            break; // budget exhausted: settle for the current bound
        }
        let mid = lo_idx + (hi_idx - lo_idx) / 2;
        if eval(mid, &mut calls)? {
            hi_idx = mid;
        } else {
            lo_idx = mid + 1;
        }
    }

    let report = cache
        .get(&hi_idx)
        .expect("feasible bound was evaluated")
        .clone();
    Ok(SweepResult {
        min_clock_ps: cfg.grid_period(hi_idx),
        report,
        synth_calls: calls,
    })
}
