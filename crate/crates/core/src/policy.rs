//! The per-visit fork / terminate / pass rule driven by a node's age clock.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::StationaryDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePolicy {
    /// Long trigger: forks are possible once the age reaches it.
    pub a_l: u64,
    /// Short trigger: terminations are possible while the age is at most it.
    pub a_s: u64,
    pub q_fork: f64,
    pub q_term: f64,
}

impl NodePolicy {
    fn validate(&self, u: usize) -> Result<()> {
        if self.a_s > self.a_l {
            return Err(Error::param(
                format!("policy.A_s[{u}]"),
                format!("A_s = {} exceeds A_l = {}", self.a_s, self.a_l),
            ));
        }
        for (name, q) in [("q_fork", self.q_fork), ("q_term", self.q_term)] {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::param(format!("policy.{name}[{u}]"), format!("{q} is not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// What wins when an age is both `>= A_l` and `<= A_s` (only possible when
/// `A_s = A_l = age`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPriority {
    #[default]
    Fork,
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitAction {
    Fork,
    Terminate,
    Pass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    nodes: Vec<NodePolicy>,
    pub priority: BoundaryPriority,
}

impl PolicySpec {
    pub fn new(nodes: Vec<NodePolicy>, priority: BoundaryPriority) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::param("policy", "no nodes"));
        }
        for (u, p) in nodes.iter().enumerate() {
            p.validate(u)?;
        }
        Ok(Self { nodes, priority })
    }

    pub fn uniform(n: usize, node: NodePolicy) -> Result<Self> {
        Self::new(vec![node; n], BoundaryPriority::default())
    }

    /// Never forks or terminates.
    pub fn passive(n: usize) -> Self {
        Self::uniform(n, NodePolicy { a_l: 0, a_s: 0, q_fork: 0.0, q_term: 0.0 })
            .expect("passive policy is valid")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, u: usize) -> &NodePolicy {
        &self.nodes[u]
    }

    pub fn nodes(&self) -> &[NodePolicy] {
        &self.nodes
    }

    /// Global per-visit fork cap `q = max_u q_fork(u)`.
    pub fn q_cap(&self) -> f64 {
        self.nodes.iter().map(|p| p.q_fork).fold(0.0, f64::max)
    }

    pub fn is_uniform(&self) -> bool {
        self.nodes.windows(2).all(|w| w[0] == w[1])
    }

    /// Which branch of the rule applies at this age, before randomisation.
    fn region(&self, u: usize, age: u64) -> VisitAction {
        let p = &self.nodes[u];
        let forkable = age >= p.a_l;
        let terminable = age <= p.a_s;
        match (forkable, terminable) {
            (true, true) => match self.priority {
                BoundaryPriority::Fork => VisitAction::Fork,
                BoundaryPriority::Terminate => VisitAction::Terminate,
            },
            (true, false) => VisitAction::Fork,
            (false, true) => VisitAction::Terminate,
            (false, false) => VisitAction::Pass,
        }
    }

    /// Probability that a visit at this age forks.
    pub fn fork_probability(&self, u: usize, age: u64) -> f64 {
        match self.region(u, age) {
            VisitAction::Fork => self.nodes[u].q_fork,
            _ => 0.0,
        }
    }

    /// Probability that a visit at this age terminates.
    pub fn term_probability(&self, u: usize, age: u64) -> f64 {
        match self.region(u, age) {
            VisitAction::Terminate => self.nodes[u].q_term,
            _ => 0.0,
        }
    }
}

/// Applies the rule to one visit of node `u` at the given age.
pub fn decide<R: Rng + ?Sized>(spec: &PolicySpec, u: usize, age: u64, rng: &mut R) -> VisitAction {
    match spec.region(u, age) {
        VisitAction::Fork if rng.random_bool(spec.nodes[u].q_fork) => VisitAction::Fork,
        VisitAction::Terminate if rng.random_bool(spec.nodes[u].q_term) => VisitAction::Terminate,
        _ => VisitAction::Pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Low,
    High,
}

/// Population-dependent choice between two specs with hysteresis: the low
/// spec is used from the time `Z <= z_low` until `Z >= z_high`, and the high
/// spec from then until `Z <= z_low` again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePolicy {
    pub z_low: u64,
    pub z_high: u64,
    pub low: PolicySpec,
    pub high: PolicySpec,
}

impl RegimePolicy {
    pub fn new(z_low: u64, z_high: u64, low: PolicySpec, high: PolicySpec) -> Result<Self> {
        if z_low >= z_high {
            return Err(Error::param("policy.regime", format!("Z_low = {z_low} must be below Z_high = {z_high}")));
        }
        if low.node_count() != high.node_count() {
            return Err(Error::param("policy.regime", "low and high specs cover different node counts"));
        }
        Ok(Self { z_low, z_high, low, high })
    }

    pub fn initial(&self, z0: u64) -> Regime {
        if z0 < self.z_high {
            Regime::Low
        } else {
            Regime::High
        }
    }

    pub fn next(&self, current: Regime, z: u64) -> Regime {
        if z <= self.z_low {
            Regime::Low
        } else if z >= self.z_high {
            Regime::High
        } else {
            current
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Fixed(PolicySpec),
    Switching(RegimePolicy),
}

impl Controller {
    pub fn node_count(&self) -> usize {
        match self {
            Controller::Fixed(s) => s.node_count(),
            Controller::Switching(r) => r.low.node_count(),
        }
    }

    pub fn initial_regime(&self, z0: u64) -> Regime {
        match self {
            Controller::Fixed(_) => Regime::Low,
            Controller::Switching(r) => r.initial(z0),
        }
    }

    pub fn next_regime(&self, current: Regime, z: u64) -> Regime {
        match self {
            Controller::Fixed(_) => current,
            Controller::Switching(r) => r.next(current, z),
        }
    }

    pub fn spec(&self, regime: Regime) -> &PolicySpec {
        match (self, regime) {
            (Controller::Fixed(s), _) => s,
            (Controller::Switching(r), Regime::Low) => &r.low,
            (Controller::Switching(r), Regime::High) => &r.high,
        }
    }

    pub fn q_cap(&self) -> f64 {
        match self {
            Controller::Fixed(s) => s.q_cap(),
            Controller::Switching(r) => r.low.q_cap().max(r.high.q_cap()),
        }
    }
}

/// Counts of observed ages at one node; ages past the last bucket are pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeHistogram {
    counts: Vec<u64>,
    overflow: u64,
}

impl AgeHistogram {
    /// Tracks ages `0..=max_tracked` individually.
    pub fn new(max_tracked: u64) -> Self {
        Self { counts: vec![0; max_tracked as usize + 1], overflow: 0 }
    }

    pub fn record(&mut self, age: u64) {
        match self.counts.get_mut(age as usize) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    pub fn max_tracked(&self) -> u64 {
        self.counts.len() as u64 - 1
    }

    /// Empirical `Pr{age <= a}`, exact for `a <= max_tracked`.
    pub fn prob_at_most(&self, a: u64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let end = (a as usize + 1).min(self.counts.len());
        let below: u64 = self.counts[..end].iter().sum();
        let below = if a > self.max_tracked() { below + self.overflow } else { below };
        below as f64 / total as f64
    }

    pub fn merge(&mut self, other: &AgeHistogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.overflow += other.overflow;
    }
}

/// Plug-in `K_term = sum_u pi(u) q_term(u) Pr{age_u <= A_s(u)}` under the
/// supplied per-node age law.
pub fn mean_termination_rate(
    spec: &PolicySpec,
    pi: &StationaryDistribution,
    age_law: &[AgeHistogram],
) -> Result<f64> {
    let mut k = 0.0;
    for u in 0..spec.node_count() {
        let p = spec.node(u);
        if p.q_term == 0.0 {
            continue;
        }
        let h = age_law
            .get(u)
            .filter(|h| h.total() > 0)
            .ok_or_else(|| Error::InsufficientData(format!("no observed ages at node {u}")))?;
        // Ages that reach the termination branch; with fork priority a tie
        // at A_s = A_l belongs to the fork branch.
        let top = match spec.priority {
            BoundaryPriority::Terminate => Some(p.a_s),
            BoundaryPriority::Fork if p.a_l > p.a_s => Some(p.a_s),
            BoundaryPriority::Fork => p.a_l.checked_sub(1),
        };
        let Some(top) = top else { continue };
        if top > h.max_tracked() {
            return Err(Error::InsufficientData(format!(
                "age histogram at node {u} does not resolve A_s = {}",
                p.a_s
            )));
        }
        k += pi.get(u) * p.q_term * h.prob_at_most(top);
    }
    Ok(k)
}
