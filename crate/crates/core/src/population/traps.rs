use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::StationaryDistribution;

/// Per-node deletion probabilities `zeta(u)`; nodes with `zeta = 0` are not
/// traps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapProfile {
    zeta: Vec<f64>,
}

impl TrapProfile {
    pub fn new(zeta: Vec<f64>) -> Result<Self> {
        for (u, &z) in zeta.iter().enumerate() {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::param(format!("traps.zeta[{u}]"), format!("{z} is not in [0, 1]")));
            }
        }
        Ok(Self { zeta })
    }

    pub fn none(n: usize) -> Self {
        Self { zeta: vec![0.0; n] }
    }

    pub fn uniform(n: usize, zeta: f64) -> Result<Self> {
        Self::new(vec![zeta; n])
    }

    /// Traps with a common `zeta` at the listed nodes only.
    pub fn at_nodes(n: usize, nodes: &[usize], zeta: f64) -> Result<Self> {
        let mut z = vec![0.0; n];
        for &u in nodes {
            *z.get_mut(u).ok_or_else(|| Error::param("traps.nodes", format!("{u} is not a node")))? = zeta;
        }
        Self::new(z)
    }

    pub fn node_count(&self) -> usize {
        self.zeta.len()
    }

    pub fn zeta(&self, u: usize) -> f64 {
        self.zeta[u]
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zeta
    }

    pub fn trap_nodes(&self) -> Vec<usize> {
        (0..self.zeta.len()).filter(|&u| self.zeta[u] > 0.0).collect()
    }

    /// Every `zeta` multiplied by `factor`, clamped to 1.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(Error::param("zeta_scale", "must be nonnegative"));
        }
        Self::new(self.zeta.iter().map(|z| (z * factor).min(1.0)).collect())
    }

    /// `Lambda_del = sum_u zeta(u) pi(u)`.
    pub fn absorption_pressure(&self, pi: &StationaryDistribution) -> f64 {
        pi.expect(|u| self.zeta[u])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pressure_and_validation() {
        let pi = StationaryDistribution::from_probs(vec![0.25, 0.5, 0.25]).unwrap();
        let t = TrapProfile::at_nodes(3, &[1], 0.4).unwrap();
        assert!((t.absorption_pressure(&pi) - 0.2).abs() < 1e-15);
        assert_eq!(t.trap_nodes(), vec![1]);
        assert!(TrapProfile::uniform(3, 1.2).is_err());
        assert!(TrapProfile::at_nodes(3, &[5], 0.1).is_err());
        assert_eq!(TrapProfile::uniform(3, 0.6).unwrap().scaled(2.0).unwrap().zeta(0), 1.0);
    }
}
