//! Galton–Watson comparison processes.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::replica_rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum OffspringLaw {
    Poisson { mean: f64 },
    Binomial { n: u64, p: f64 },
}

impl OffspringLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => mean,
            OffspringLaw::Binomial { n, p } => n as f64 * p,
        }
    }

    /// Probability generating function `E[s^X]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => (mean * (s - 1.0)).exp(),
            OffspringLaw::Binomial { n, p } => (1.0 - p + p * s).powf(n as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OffspringLaw::Poisson { mean } if !(mean > 0.0 && mean.is_finite()) => {
                Err(Error::param("mean_offspring", "must be positive and finite"))
            }
            OffspringLaw::Binomial { n, p } if n == 0 || !(0.0..=1.0).contains(&p) => {
                Err(Error::param("offspring", "binomial needs n >= 1 and p in [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Total offspring of `z` independent parents.
    fn sample_total<R: Rng + ?Sized>(&self, z: u64, rng: &mut R) -> u64 {
        if z == 0 {
            return 0;
        }
        match *self {
            OffspringLaw::Poisson { mean } => {
                Poisson::new(mean * z as f64).expect("validated mean").sample(rng) as u64
            }
            OffspringLaw::Binomial { n, p } => Binomial::new(n * z, p).expect("validated law").sample(rng),
        }
    }
}

/// Smallest fixed point of the pgf on `[0, 1]`, by iteration from 0.
pub fn extinction_probability(law: &OffspringLaw) -> f64 {
    let mut s = 0.0;
    for _ in 0..1_000_000 {
        let next = law.pgf(s);
        if (next - s).abs() < 1e-15 {
            return next;
        }
        s = next;
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwStats {
    pub law: OffspringLaw,
    pub generations: u64,
    pub replicas: u64,
    pub extinct: u64,
    /// Replicas that reached `cap`; they are counted as surviving.
    pub capped: u64,
    pub max_population: Vec<u64>,
}

impl GwStats {
    pub fn extinction_fraction(&self) -> f64 {
        self.extinct as f64 / self.replicas as f64
    }

    pub fn survival_fraction(&self) -> f64 {
        1.0 - self.extinction_fraction()
    }

    /// Binomial standard error of either fraction.
    pub fn standard_error(&self) -> f64 {
        let p = self.extinction_fraction();
        (p * (1.0 - p) / self.replicas as f64).sqrt()
    }
}

/// Simulates `replicas` chains from one ancestor for `generations`
/// generations; a chain reaching `cap` individuals is stopped.
pub fn gw_baseline(
    law: OffspringLaw,
    generations: u64,
    replicas: u64,
    seed: u64,
    cap: u64,
) -> Result<GwStats> {
    law.validate()?;
    if replicas == 0 {
        return Err(Error::param("replicas", "must be at least 1"));
    }
    let runs: Vec<(bool, bool, u64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let mut z = 1u64;
            let mut max = 1u64;
            for _ in 0..generations {
                z = law.sample_total(z, &mut rng);
                max = max.max(z);
                if z == 0 || z >= cap {
                    break;
                }
            }
            (z == 0, z >= cap, max)
        })
        .collect();
    Ok(GwStats {
        law,
        generations,
        replicas,
        extinct: runs.iter().filter(|r| r.0).count() as u64,
        capped: runs.iter().filter(|r| r.1).count() as u64,
        max_population: runs.iter().map(|r| r.2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgf_fixed_points() {
        assert!((extinction_probability(&OffspringLaw::Poisson { mean: 0.8 }) - 1.0).abs() < 1e-12);
        let q = extinction_probability(&OffspringLaw::Poisson { mean: 1.5 });
        assert!((q - (1.5 * (q - 1.0)).exp()).abs() < 1e-12);
        assert!(q > 0.41 && q < 0.42);
        // Binomial(2, 3/4): q = (1/4 + 3/4 q)^2 has root 1/9.
        let b = extinction_probability(&OffspringLaw::Binomial { n: 2, p: 0.75 });
        assert!((b - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn subcritical_dies_out() {
        let s = gw_baseline(OffspringLaw::Poisson { mean: 0.5 }, 100, 200, 1, 1_000_000).unwrap();
        assert_eq!(s.extinct, 200);
        assert!(gw_baseline(OffspringLaw::Poisson { mean: 0.5 }, 10, 0, 1, 10).is_err());
    }
}
