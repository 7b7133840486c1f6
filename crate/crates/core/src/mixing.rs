//! Exact total-variation mixing curves and spectral gaps of lazy kernels.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{TransitionKernel, DEFAULT_DENSE_CAP};

/// Once the worst-case distance drops below this the curve is truncated;
/// later entries are indistinguishable from rounding noise.
pub const TV_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingProfile {
    /// Absolute spectral gap `1 - max_{i >= 2} |lambda_i|` of the lazy kernel.
    pub spectral_gap: f64,
    /// Second largest eigenvalue of the lazy kernel.
    pub lambda2: f64,
    /// `tv_curve[t] = max_x || P^t(x, .) - pi ||_TV`, starting at `t = 0`.
    pub tv_curve: Vec<f64>,
    pub pi_min: f64,
    /// Whether the curve was cut at [`TV_FLOOR`] rather than at `max_t`.
    pub reached_floor: bool,
}

impl MixingProfile {
    /// Worst-case TV distance at time `t`. Past the end of a floored curve the
    /// distance is reported as the last value.
    pub fn tv(&self, t: usize) -> Option<f64> {
        match self.tv_curve.get(t) {
            Some(&d) => Some(d),
            None if self.reached_floor => self.tv_curve.last().copied(),
            None => None,
        }
    }

    /// Least `t` with worst-case TV distance at most `tolerance`.
    pub fn t_mix(&self, tolerance: f64) -> Result<usize> {
        self.tv_curve
            .iter()
            .position(|&d| d <= tolerance)
            .ok_or(Error::MixingUnreached { tolerance, max_t: self.tv_curve.len() - 1 })
    }

    /// `ceil(log(1 / (tolerance * pi_min)) / gap)`.
    pub fn spectral_bound(&self, tolerance: f64) -> usize {
        ((1.0 / (tolerance * self.pi_min)).ln() / self.spectral_gap).ceil().max(0.0) as usize
    }

    /// Sum of the curve over `s = 1..=t`.
    pub fn tv_sum(&self, t: usize) -> f64 {
        (1..=t).map(|s| self.tv(s).unwrap_or(0.0)).sum()
    }
}

/// Eigenvalues of a reversible kernel, sorted descending, via the symmetric
/// similarity transform `D^{1/2} P D^{-1/2}` with `D = diag(pi)`.
pub fn kernel_eigenvalues(k: &TransitionKernel) -> Result<Vec<f64>> {
    let n = k.node_count();
    if n > DEFAULT_DENSE_CAP {
        return Err(Error::TooLargeForDense { n, cap: DEFAULT_DENSE_CAP });
    }
    let pi = k.stationary();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for (v, p) in k.row(u) {
            s[(u, v)] += p * (pi.get(u) / pi.get(v)).sqrt();
        }
    }
    // Symmetrise away the O(1e-17) asymmetry from floating point.
    let s = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(eig)
}

/// Computes the exact worst-case TV curve up to `max_t` by dense matrix
/// powers, plus the spectral gap.
pub fn mixing_profile(k: &TransitionKernel, max_t: usize) -> Result<MixingProfile> {
    let pi = k.stationary().probs();
    let mut curve = Vec::with_capacity(max_t + 1);
    // t = 0: the worst start is the node with the smallest pi.
    curve.push(1.0 - k.stationary().min());
    let mut reached_floor = curve[0] <= TV_FLOOR;
    if !reached_floor {
        for (t, power) in k.powers(DEFAULT_DENSE_CAP)?.enumerate() {
            if t + 1 > max_t {
                break;
            }
            let worst = (0..power.size())
                .map(|x| {
                    0.5 * power.row(x).iter().zip(pi).map(|(p, q)| (p - q).abs()).sum::<f64>()
                })
                .fold(0.0, f64::max);
            curve.push(worst);
            if worst <= TV_FLOOR {
                reached_floor = true;
                break;
            }
        }
    }
    let eig = kernel_eigenvalues(k)?;
    let lambda2 = eig.get(1).copied().unwrap_or(0.0);
    let lambda_star = eig.iter().skip(1).map(|l| l.abs()).fold(0.0, f64::max);
    Ok(MixingProfile {
        spectral_gap: 1.0 - lambda_star,
        lambda2,
        tv_curve: curve,
        pi_min: k.stationary().min(),
        reached_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators;

    #[test]
    fn two_node_chain_mixes_in_one_step() {
        let k = TransitionKernel::lazy(generators::path(2).unwrap(), 0.5).unwrap();
        let m = mixing_profile(&k, 10).unwrap();
        assert_eq!(m.tv_curve[0], 0.5);
        assert!(m.tv_curve[1].abs() < 1e-15);
        assert_eq!(m.t_mix(0.125).unwrap(), 1);
        assert!((m.spectral_gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_mix_is_monotone_in_tolerance() {
        let k = TransitionKernel::lazy(generators::cycle(7).unwrap(), 0.5).unwrap();
        let m = mixing_profile(&k, 500).unwrap();
        let tols = [0.5, 0.25, 0.125, 0.01, 1e-4, 1e-8];
        let times: Vec<usize> = tols.iter().map(|&e| m.t_mix(e).unwrap()).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        for w in m.tv_curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
    }

    #[test]
    fn unreached_tolerance_is_reported() {
        let k = TransitionKernel::lazy(generators::path(10).unwrap(), 0.5).unwrap();
        let m = mixing_profile(&k, 3).unwrap();
        assert_eq!(m.tv_curve.len(), 4);
        assert!(matches!(m.t_mix(1e-6), Err(Error::MixingUnreached { max_t: 3, .. })));
    }

    #[test]
    fn cycle_gap_matches_closed_form() {
        // Lazy simple walk on C_n: eigenvalues eps + (1 - eps) cos(2 pi j / n).
        let n = 8;
        let eps = 0.5;
        let k = TransitionKernel::lazy(generators::cycle(n).unwrap(), eps).unwrap();
        let m = mixing_profile(&k, 1).unwrap();
        let expected = eps + (1.0 - eps) * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((m.lambda2 - expected).abs() < 1e-12);
    }
}
