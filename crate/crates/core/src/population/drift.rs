//! Block skeleton of a trace and the per-block drift comparison.

use serde::{Deserialize, Serialize};

use super::trace::PopulationTrace;
use crate::error::{Error, Result};

pub const DEFAULT_KAPPA: f64 = 4.0;

/// Minimum number of complete blocks [`block_drift`] accepts.
pub const MIN_BLOCKS: usize = 10;

/// Blocks of length `B = t_mix_part + ceil(kappa * a_eff)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    block_length: u64,
    pub t_mix_part: u64,
    pub kappa: f64,
    pub a_eff: f64,
}

impl BlockPlan {
    pub fn new(t_mix_part: u64, kappa: f64, a_eff: f64) -> Result<Self> {
        if !(kappa >= 4.0 && kappa.is_finite()) {
            return Err(Error::param("blocks.kappa", format!("must be a finite value >= 4, got {kappa}")));
        }
        if !(a_eff >= 0.0 && a_eff.is_finite()) {
            return Err(Error::param("a_eff", format!("must be finite and nonnegative, got {a_eff}")));
        }
        let block_length = (t_mix_part + (kappa * a_eff).ceil() as u64).max(1);
        Ok(Self { block_length, t_mix_part, kappa, a_eff })
    }

    pub fn block_length(&self) -> u64 {
        self.block_length
    }

    /// Complete blocks of the trace. Requires the per-step series.
    pub fn blocks(&self, trace: &PopulationTrace) -> Vec<BlockSummary> {
        let b = self.block_length as usize;
        let z = trace.z_series();
        trace
            .steps()
            .chunks_exact(b)
            .enumerate()
            .map(|(k, chunk)| {
                let mut s = BlockSummary {
                    k: k as u64,
                    t_start: (k * b) as u64,
                    z_start: z[k * b],
                    z_end: z[(k + 1) * b],
                    s_fork: 0,
                    s_del: 0,
                    s_term: 0,
                    visits: 0,
                    high_steps: 0,
                };
                for st in chunk {
                    s.s_fork += st.forks;
                    s.s_del += st.trap_dels;
                    s.s_term += st.terms;
                    s.visits += st.visits;
                    s.high_steps += st.high as u64;
                }
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub k: u64,
    pub t_start: u64,
    pub z_start: u64,
    pub z_end: u64,
    pub s_fork: u64,
    pub s_del: u64,
    pub s_term: u64,
    pub visits: u64,
    pub high_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub k: u64,
    pub z: u64,
    pub z_next: u64,
    pub p_fork: f64,
    pub k_term: f64,
    /// `(Z_{k+1} - Z_k) / Z_k`.
    pub observed: f64,
    /// `B (p_fork - Lambda_del - K_term)` with within-block rates.
    pub predicted: f64,
    pub residual: f64,
    /// Per-token Bernstein scale `sqrt(B log z / z)`.
    pub bernstein: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub block_length: u64,
    pub lambda_del: f64,
    pub z_min: u64,
    pub rows: Vec<DriftRow>,
    /// Mean absolute per-token residual.
    pub c1_proxy: f64,
    /// Blocks with `z >= z_min` and `|predicted| > 2 c1_proxy`.
    pub sign_checked: usize,
    pub sign_agree: usize,
    /// Share of rows whose residual lies within the Bernstein scale.
    pub within_bernstein: f64,
}

impl DriftReport {
    pub fn agreement(&self) -> Option<f64> {
        (self.sign_checked > 0).then(|| self.sign_agree as f64 / self.sign_checked as f64)
    }

    /// Pools the rows of several reports over the same plan.
    pub fn combine(reports: &[DriftReport]) -> Result<DriftReport> {
        let first = reports.first().ok_or_else(|| Error::InsufficientData("no drift reports".into()))?;
        let rows = reports.iter().flat_map(|r| r.rows.iter().copied()).collect();
        Ok(finish(first.block_length, first.lambda_del, first.z_min, rows))
    }
}

fn finish(block_length: u64, lambda_del: f64, z_min: u64, rows: Vec<DriftRow>) -> DriftReport {
    let m = rows.len().max(1) as f64;
    let c1_proxy = rows.iter().map(|r| r.residual.abs()).sum::<f64>() / m;
    let within = rows.iter().filter(|r| r.residual.abs() <= r.bernstein).count() as f64 / m;
    let mut checked = 0;
    let mut agree = 0;
    for r in &rows {
        if r.z >= z_min && r.predicted.abs() > 2.0 * c1_proxy {
            checked += 1;
            if r.observed != 0.0 && r.observed.signum() == r.predicted.signum() {
                agree += 1;
            }
        }
    }
    DriftReport {
        block_length,
        lambda_del,
        z_min,
        rows,
        c1_proxy,
        sign_checked: checked,
        sign_agree: agree,
        within_bernstein: within,
    }
}

/// Compares each complete block's realised per-token change with the
/// prediction `B (p_fork - Lambda_del - K_term)`, where `p_fork` and `K_term`
/// are the block's forks and terminations per token-step.
pub fn block_drift(
    trace: &PopulationTrace,
    plan: &BlockPlan,
    lambda_del: f64,
    z_min: u64,
) -> Result<DriftReport> {
    if !trace.has_steps() {
        return Err(Error::InsufficientData("trace was recorded without per-step data".into()));
    }
    let blocks = plan.blocks(trace);
    if blocks.len() < MIN_BLOCKS {
        return Err(Error::InsufficientData(format!(
            "{} complete blocks of length {}, need at least {MIN_BLOCKS}",
            blocks.len(),
            plan.block_length()
        )));
    }
    let b = plan.block_length() as f64;
    let rows = blocks
        .iter()
        .filter(|s| s.z_start > 0 && s.visits > 0)
        .map(|s| {
            let z = s.z_start as f64;
            let p_fork = s.s_fork as f64 / s.visits as f64;
            let k_term = s.s_term as f64 / s.visits as f64;
            let observed = (s.z_end as f64 - z) / z;
            let predicted = b * (p_fork - lambda_del - k_term);
            DriftRow {
                k: s.k,
                z: s.z_start,
                z_next: s.z_end,
                p_fork,
                k_term,
                observed,
                predicted,
                residual: observed - predicted,
                bernstein: (b * z.max(std::f64::consts::E).ln() / z).sqrt(),
            }
        })
        .collect();
    Ok(finish(plan.block_length(), lambda_del, z_min, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_length_formula() {
        assert_eq!(BlockPlan::new(7, 4.0, 2.3).unwrap().block_length(), 7 + 10);
        assert!(BlockPlan::new(7, 3.0, 1.0).is_err());
        assert!(BlockPlan::new(7, 4.0, f64::INFINITY).is_err());
    }

    #[test]
    fn constant_trace_has_zero_drift() {
        let tr = PopulationTrace::from_series(&vec![25; 201]);
        let plan = BlockPlan::new(2, 4.0, 1.0).unwrap();
        let rep = block_drift(&tr, &plan, 0.0, 20).unwrap();
        assert_eq!(rep.rows.len(), 33);
        assert!(rep.rows.iter().all(|r| r.observed == 0.0 && r.predicted == 0.0));
    }

    #[test]
    fn too_few_blocks() {
        let tr = PopulationTrace::from_series(&vec![5; 30]);
        let plan = BlockPlan::new(2, 4.0, 1.0).unwrap();
        assert!(matches!(block_drift(&tr, &plan, 0.0, 1), Err(Error::InsufficientData(_))));
    }
}
