use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::policy::AgeHistogram;

/// Realised counts of one step; `z` is measured after all of the step's
/// events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub z: u64,
    pub forks: u64,
    pub trap_dels: u64,
    pub terms: u64,
    /// Tokens that arrived during the step (`Z_{t-1}`).
    pub visits: u64,
    /// Whether the high-population spec was in force.
    pub high: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventTotals {
    pub visits: u64,
    pub forks: u64,
    pub trap_dels: u64,
    pub terms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub seed: u64,
    pub replica: u64,
    pub z0: u64,
    pub initial_high: bool,
    steps: Vec<StepRecord>,
    keep_steps: bool,
    pub final_t: u64,
    pub final_z: u64,
    pub max_z: u64,
    pub totals: EventTotals,
    pub extinct: bool,
    pub capped: bool,
    #[serde(skip)]
    pub age_law: Option<Vec<AgeHistogram>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub seed: u64,
    pub replica: u64,
    pub z0: u64,
    pub final_t: u64,
    pub final_z: u64,
    pub max_z: u64,
    pub extinct: bool,
    pub capped: bool,
    pub totals: EventTotals,
}

impl PopulationTrace {
    pub(crate) fn start(seed: u64, replica: u64, z0: u64, initial_high: bool, keep_steps: bool) -> Self {
        Self {
            seed,
            replica,
            z0,
            initial_high,
            steps: Vec::new(),
            keep_steps,
            final_t: 0,
            final_z: z0,
            max_z: z0,
            totals: EventTotals::default(),
            extinct: false,
            capped: false,
            age_law: None,
        }
    }

    /// Builds a trace from a population series alone (events are inferred
    /// as net forks or terminations). Used for externally produced series.
    pub fn from_series(z: &[u64]) -> Self {
        let mut tr = Self::start(0, 0, z[0], false, true);
        for (i, w) in z.windows(2).enumerate() {
            let (forks, terms) = if w[1] >= w[0] { (w[1] - w[0], 0) } else { (0, w[0] - w[1]) };
            tr.push(StepRecord { t: i as u64 + 1, z: w[1], forks, trap_dels: 0, terms, visits: w[0], high: false });
        }
        tr.extinct = tr.final_z == 0;
        tr
    }

    pub(crate) fn push(&mut self, rec: StepRecord) {
        self.final_t = rec.t;
        self.final_z = rec.z;
        self.max_z = self.max_z.max(rec.z);
        self.totals.visits += rec.visits;
        self.totals.forks += rec.forks;
        self.totals.trap_dels += rec.trap_dels;
        self.totals.terms += rec.terms;
        if self.keep_steps {
            self.steps.push(rec);
        }
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn has_steps(&self) -> bool {
        self.keep_steps
    }

    /// `Z_0, Z_1, ..., Z_final`.
    pub fn z_series(&self) -> Vec<u64> {
        std::iter::once(self.z0).chain(self.steps.iter().map(|s| s.z)).collect()
    }

    /// Whether the series ended before the requested horizon.
    pub fn halted(&self) -> bool {
        self.extinct || self.capped
    }

    /// `Z_{t+1} = Z_t + forks - trap_dels - terms` for every recorded step.
    pub fn conservation_holds(&self) -> bool {
        let mut prev = self.z0;
        for s in &self.steps {
            if s.visits != prev || prev + s.forks != s.z + s.trap_dels + s.terms {
                return false;
            }
            prev = s.z;
        }
        true
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            seed: self.seed,
            replica: self.replica,
            z0: self.z0,
            final_t: self.final_t,
            final_z: self.final_z,
            max_z: self.max_z,
            extinct: self.extinct,
            capped: self.capped,
            totals: self.totals,
        }
    }

    /// CSV body `t,Z,forks,trap_dels,terms` starting with the `t = 0` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,Z,forks,trap_dels,terms\n");
        writeln!(out, "0,{},0,0,0", self.z0).expect("writing to a String");
        for s in &self.steps {
            writeln!(out, "{},{},{},{},{}", s.t, s.z, s.forks, s.trap_dels, s.terms)
                .expect("writing to a String");
        }
        out
    }
}

/// Pooled per-step survival `sum Z_{t+1} / sum Z_t` over `t >= from`, with
/// the binomial standard error `sqrt(s (1 - s) / sum Z_t)`. Meaningful for
/// mechanisms that only remove tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalFit {
    pub rate: f64,
    pub se: f64,
    pub exposures: u64,
}

pub fn survival_fit(traces: &[PopulationTrace], from: u64) -> Option<SurvivalFit> {
    let (mut exposed, mut survived) = (0u64, 0u64);
    for tr in traces {
        for s in tr.steps.iter().filter(|s| s.t > from) {
            exposed += s.visits;
            survived += s.z;
        }
    }
    if exposed == 0 {
        return None;
    }
    let rate = survived as f64 / exposed as f64;
    Some(SurvivalFit { rate, se: (rate * (1.0 - rate) / exposed as f64).sqrt(), exposures: exposed })
}
