//! Viability / safety feasibility checks and corridor statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::envelopes::{laplace, AEffInterval, EnvelopeModel, EnvelopeSign};
use crate::error::{Error, Result};
use crate::population::{BlockPlan, PopulationTrace};

/// Laplace envelope values at both ends of an effective-age interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointValues {
    pub a: f64,
    pub l_plus: f64,
    pub l_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub q: f64,
    pub lambda_del: f64,
    pub k_term: f64,
    pub a_eff: AEffInterval,
    pub at_lo: EndpointValues,
    pub at_hi: EndpointValues,
    /// `q L_plus(A_hi)`, the smallest viability value over the interval.
    pub viability_lhs: f64,
    /// `q L_minus(A_lo) - Lambda_del - K_term`, the largest safety value.
    pub safety_lhs: f64,
    pub viable: bool,
    pub safe: bool,
}

impl FeasibilityReport {
    /// `q L_plus - Lambda_del`; positive when births can outpace deletions.
    pub fn viability_margin(&self) -> f64 {
        self.viability_lhs - self.lambda_del
    }

    /// `-(safety_lhs)`; positive when removals dominate births.
    pub fn safety_margin(&self) -> f64 {
        -self.safety_lhs
    }
}

fn envelope_at(model: &EnvelopeModel, a: f64) -> EndpointValues {
    if a.is_infinite() {
        return EndpointValues { a, l_plus: 0.0, l_minus: 0.0 };
    }
    EndpointValues { a, l_plus: laplace(model, EnvelopeSign::Plus, a), l_minus: laplace(model, EnvelopeSign::Minus, a) }
}

/// Evaluates viability `q L_plus(A) >= Lambda_del` at the end of the interval
/// where `L_plus` is smallest and safety `q L_minus(A) - Lambda_del - K_term
/// <= 0` at the end where `L_minus` is largest. An infinite interval (no
/// forks) evaluates both envelopes as 0.
pub fn check_feasibility(
    model: &EnvelopeModel,
    q: f64,
    a_eff: &AEffInterval,
    lambda_del: f64,
    k_term: f64,
) -> Result<FeasibilityReport> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", format!("must lie in (0, 1], got {q}")));
    }
    if a_eff.minus_root.is_nan() || a_eff.plus_root.is_nan() || a_eff.lo() < 0.0 {
        return Err(Error::Infeasible("empty effective-age interval".into()));
    }
    if !(0.0..=1.0).contains(&lambda_del) || !(k_term >= 0.0) {
        return Err(Error::param("lambda_del", "Lambda_del must lie in [0, 1] and K_term must be nonnegative"));
    }
    let at_lo = envelope_at(model, a_eff.lo());
    let at_hi = envelope_at(model, a_eff.hi());
    let viability_lhs = q * at_hi.l_plus;
    let safety_lhs = q * at_lo.l_minus - lambda_del - k_term;
    Ok(FeasibilityReport {
        q,
        lambda_del,
        k_term,
        a_eff: *a_eff,
        at_lo,
        at_hi,
        viability_lhs,
        safety_lhs,
        viable: viability_lhs >= lambda_del,
        safe: safety_lhs <= 0.0,
    })
}

/// Corridor-wise conditions: viability of the low-population spec with
/// margin `eta_in` and safety of the high-population spec with margin
/// `eta_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorFeasibility {
    pub low: FeasibilityReport,
    pub high: FeasibilityReport,
    pub eta_in: f64,
    pub eta_out: f64,
}

impl CorridorFeasibility {
    pub fn new(low: FeasibilityReport, high: FeasibilityReport) -> Self {
        let eta_in = low.viability_margin();
        let eta_out = high.safety_margin();
        Self { low, high, eta_in, eta_out }
    }

    pub fn holds(&self) -> bool {
        self.eta_in >= 0.0 && self.eta_out >= 0.0
    }
}

/// Distance to the corridor: `max(z_low - z, 0) + max(z - z_high, 0)`.
pub fn lyapunov_value(z: u64, z_low: u64, z_high: u64) -> u64 {
    z_low.saturating_sub(z) + z.saturating_sub(z_high)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    /// First block outside the corridor.
    pub start_block: u64,
    /// First block back inside, or the last block when `returned` is false.
    pub end_block: u64,
    pub side: Side,
    pub returned: bool,
    /// Still open when the run reached its horizon without halting.
    pub censored: bool,
    pub peak_v: u64,
}

impl Excursion {
    /// Blocks from leaving to returning.
    pub fn length(&self) -> u64 {
        self.end_block - self.start_block
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorStats {
    pub z_low: u64,
    pub z_high: u64,
    pub block_length: u64,
    pub blocks: usize,
    pub entered: bool,
    /// Share of recorded times `0..=final_t` with `z_low <= Z_t <= z_high`.
    pub inside_fraction: f64,
    pub excursions: Vec<Excursion>,
    /// Mean and standard error of returned excursion lengths, in blocks.
    pub mean_return_blocks: Option<f64>,
    pub return_se: Option<f64>,
    pub lyapunov: Vec<u64>,
    pub extinct: bool,
    pub capped: bool,
    /// No excursion failed to return, the mean return time is resolved to a
    /// relative standard error below 25%, and the run did not halt.
    pub recurrence_evidence: bool,
    /// The run halted at extinction or the cap while outside the corridor.
    pub escaped: bool,
}

impl CorridorStats {
    /// No excursion failed to return; one cut off by the horizon is
    /// censored rather than failed.
    pub fn all_returned(&self) -> bool {
        self.excursions.iter().all(|e| e.returned || e.censored)
    }

    /// CSV `start_block,end_block,length,side,returned,censored,peak_v`.
    pub fn excursions_csv(&self) -> String {
        let mut out = String::from("start_block,end_block,length,side,returned,censored,peak_v\n");
        for e in &self.excursions {
            let side = match e.side {
                Side::Below => "below",
                Side::Above => "above",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.start_block,
                e.end_block,
                e.length(),
                side,
                e.returned,
                e.censored,
                e.peak_v
            )
                .expect("writing to a String");
        }
        out
    }
}

/// Block-skeleton values `Z_{kB}` for every `kB <= final_t`.
fn skeleton(z: &[u64], b: u64) -> Vec<u64> {
    z.iter().step_by(b as usize).copied().collect()
}

pub fn corridor_stats(trace: &PopulationTrace, z_low: u64, z_high: u64, plan: &BlockPlan) -> Result<CorridorStats> {
    if z_low >= z_high {
        return Err(Error::param("corridor", format!("Z_low = {z_low} must be below Z_high = {z_high}")));
    }
    if !trace.has_steps() {
        return Err(Error::InsufficientData("trace was recorded without per-step data".into()));
    }
    let inside = |z: u64| (z_low..=z_high).contains(&z);
    let z = trace.z_series();
    let inside_fraction = z.iter().filter(|&&v| inside(v)).count() as f64 / z.len() as f64;
    let sk = skeleton(&z, plan.block_length());
    let lyapunov: Vec<u64> = sk.iter().map(|&v| lyapunov_value(v, z_low, z_high)).collect();

    let mut excursions = Vec::new();
    let first = sk.iter().position(|&v| inside(v));
    if let Some(first) = first {
        let mut open: Option<Excursion> = None;
        for (k, &v) in sk.iter().enumerate().skip(first) {
            let k = k as u64;
            match (&mut open, inside(v)) {
                (None, false) => {
                    let side = if v < z_low { Side::Below } else { Side::Above };
                    open = Some(Excursion { start_block: k, end_block: k, side, returned: false, censored: false, peak_v: lyapunov[k as usize] });
                }
                (Some(e), false) => {
                    e.end_block = k;
                    e.peak_v = e.peak_v.max(lyapunov[k as usize]);
                }
                (Some(e), true) => {
                    e.end_block = k;
                    e.returned = true;
                    excursions.push(*e);
                    open = None;
                }
                (None, true) => {}
            }
        }
        if let Some(mut e) = open {
            e.censored = !(trace.extinct || trace.capped);
            excursions.push(e);
        }
    }

    let returned: Vec<f64> = excursions.iter().filter(|e| e.returned).map(|e| e.length() as f64).collect();
    let (mean_return_blocks, return_se) = if returned.len() >= 2 {
        let m = returned.iter().sum::<f64>() / returned.len() as f64;
        let var = returned.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (returned.len() - 1) as f64;
        (Some(m), Some((var / returned.len() as f64).sqrt()))
    } else if returned.len() == 1 {
        (Some(returned[0]), None)
    } else {
        (None, None)
    };
    let all_returned = excursions.iter().all(|e| e.returned || e.censored);
    let resolved = match (mean_return_blocks, return_se) {
        (None, _) => true,
        (Some(m), Some(se)) => se / m < 0.25,
        (Some(_), None) => false,
    };
    let halted = trace.extinct || trace.capped;
    Ok(CorridorStats {
        z_low,
        z_high,
        block_length: plan.block_length(),
        blocks: sk.len(),
        entered: first.is_some(),
        inside_fraction,
        excursions,
        mean_return_blocks,
        return_se,
        lyapunov,
        extinct: trace.extinct,
        capped: trace.capped,
        recurrence_evidence: first.is_some() && all_returned && resolved && !halted,
        escaped: halted && !inside(trace.final_z),
    })
}

/// Minimum block count per region for a drift estimate to be reported
/// without the undersampled flag.
pub const MIN_REGION_BLOCKS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionDrift {
    pub blocks: usize,
    /// Mean of `V(Z_{k+1}) - V(Z_k)` over blocks starting in the region.
    pub mean_dv: Option<f64>,
    pub se: Option<f64>,
    pub undersampled: bool,
}

impl RegionDrift {
    fn from_samples(dv: &[f64]) -> Self {
        let n = dv.len();
        let mean = (n > 0).then(|| dv.iter().sum::<f64>() / n as f64);
        let se = (n > 1).then(|| {
            let m = mean.expect("nonempty");
            (dv.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
        });
        Self { blocks: n, mean_dv: mean, se, undersampled: n < MIN_REGION_BLOCKS }
    }

    /// Mean drift below `-2 SE` on an adequately sampled region.
    pub fn negative(&self) -> bool {
        match (self.mean_dv, self.se) {
            (Some(m), Some(se)) => !self.undersampled && m < -2.0 * se,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovDrift {
    pub below: RegionDrift,
    pub inside: RegionDrift,
    pub above: RegionDrift,
}

pub fn lyapunov_drift(trace: &PopulationTrace, z_low: u64, z_high: u64, plan: &BlockPlan) -> Result<LyapunovDrift> {
    if z_low >= z_high {
        return Err(Error::param("corridor", format!("Z_low = {z_low} must be below Z_high = {z_high}")));
    }
    let sk = skeleton(&trace.z_series(), plan.block_length());
    let (mut below, mut inside, mut above) = (Vec::new(), Vec::new(), Vec::new());
    for w in sk.windows(2) {
        let dv = lyapunov_value(w[1], z_low, z_high) as f64 - lyapunov_value(w[0], z_low, z_high) as f64;
        if w[0] < z_low {
            below.push(dv);
        } else if w[0] > z_high {
            above.push(dv);
        } else {
            inside.push(dv);
        }
    }
    Ok(LyapunovDrift {
        below: RegionDrift::from_samples(&below),
        inside: RegionDrift::from_samples(&inside),
        above: RegionDrift::from_samples(&above),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::StationaryDistribution;

    fn model() -> EnvelopeModel {
        let pi = StationaryDistribution::from_probs(vec![0.25; 4]).unwrap();
        EnvelopeModel::new(crate::envelopes::EnvelopeSource::EmpiricalFit, &pi, vec![1.0; 4], vec![1.5; 4]).unwrap()
    }

    #[test]
    fn zero_age_is_always_viable() {
        let r = check_feasibility(&model(), 0.3, &AEffInterval::point(0.0), 0.3, 0.0).unwrap();
        assert!(r.viable);
        assert_eq!(r.viability_lhs, 0.3);
    }

    #[test]
    fn full_deletion_is_never_viable() {
        let r = check_feasibility(&model(), 1.0, &AEffInterval::point(2.0), 1.0, 0.0).unwrap();
        assert!(!r.viable);
        assert!(r.viability_lhs < 1.0);
    }

    #[test]
    fn worst_case_endpoints() {
        let iv = AEffInterval { minus_root: 6.0, plus_root: 4.0, infinite: false };
        let r = check_feasibility(&model(), 0.5, &iv, 0.1, 0.05).unwrap();
        assert_eq!(r.at_hi.a, 6.0);
        assert!((r.viability_lhs - 0.5 * laplace(&model(), EnvelopeSign::Plus, 6.0)).abs() < 1e-15);
        assert!((r.safety_lhs - (0.5 * laplace(&model(), EnvelopeSign::Minus, 4.0) - 0.15)).abs() < 1e-15);
        let bad = AEffInterval { minus_root: f64::NAN, plus_root: 1.0, infinite: false };
        assert!(matches!(check_feasibility(&model(), 0.5, &bad, 0.1, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn lyapunov_shape() {
        assert_eq!(lyapunov_value(5, 10, 20), 5);
        assert_eq!(lyapunov_value(10, 10, 20), 0);
        assert_eq!(lyapunov_value(20, 10, 20), 0);
        assert_eq!(lyapunov_value(23, 10, 20), 3);
    }

    #[test]
    fn constant_inside_trace() {
        let tr = PopulationTrace::from_series(&vec![15; 1001]);
        let plan = BlockPlan::new(5, 4.0, 0.0).unwrap();
        let s = corridor_stats(&tr, 10, 20, &plan).unwrap();
        assert_eq!(s.inside_fraction, 1.0);
        assert!(s.excursions.is_empty());
        assert!(s.recurrence_evidence);
    }

    #[test]
    fn extinction_trace() {
        let mut z: Vec<u64> = vec![15; 50];
        z.extend((0..15).rev());
        let tr = PopulationTrace::from_series(&z);
        let plan = BlockPlan::new(5, 4.0, 0.0).unwrap();
        let s = corridor_stats(&tr, 10, 20, &plan).unwrap();
        assert!(!s.recurrence_evidence);
        assert!(s.escaped);
        assert!((s.inside_fraction - 55.0 / 65.0).abs() < 1e-12);
        assert!(!s.all_returned());
    }
}
