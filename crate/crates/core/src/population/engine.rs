use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trace::{PopulationTrace, StepRecord};
use super::traps::TrapProfile;
use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;
use crate::policy::{decide, AgeHistogram, Controller, Regime, VisitAction};
use crate::return_time::AgeClock;

pub const DEFAULT_Z_CAP: u64 = 1_000_000;

/// Ages up to this value are tracked individually in age histograms.
pub const DEFAULT_AGE_TRACK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOrder {
    /// Traps act on arriving tokens before the node's policy does.
    #[default]
    TrapFirst,
    PolicyFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "node")]
pub enum InitialPlacement {
    /// Independent draws from the stationary law.
    #[default]
    Stationary,
    /// Every token at one node.
    Node(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub z0: u64,
    pub horizon: u64,
    pub z_cap: u64,
    /// Unvisited nodes start with this age at time 0.
    pub initial_age: u64,
    pub event_order: EventOrder,
    pub init: InitialPlacement,
    /// Per-visit ages are recorded from this step on; `None` disables it.
    pub age_warmup: Option<u64>,
    pub age_track: u64,
    /// Keep only totals instead of the per-step series.
    pub summary_only: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            z0: 1,
            horizon: 1_000,
            z_cap: DEFAULT_Z_CAP,
            initial_age: 0,
            event_order: EventOrder::default(),
            init: InitialPlacement::default(),
            age_warmup: None,
            age_track: DEFAULT_AGE_TRACK,
            summary_only: false,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.z0 < 1 {
            return Err(Error::param("simulation.Z_0", "must be at least 1"));
        }
        if self.horizon < 1 {
            return Err(Error::param("simulation.horizon", "must be at least 1"));
        }
        if self.z_cap <= self.z0 {
            return Err(Error::param("simulation.Z_cap", "must exceed Z_0"));
        }
        if let InitialPlacement::Node(u) = self.init {
            if u >= n {
                return Err(Error::param("simulation.init", format!("{u} is not a node")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Token {
    node: usize,
    /// Set on fork copies whose next hop was already chosen.
    dispatched: bool,
}

/// Event counts of one step. `visits` is the number of tokens that arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepEvents {
    pub visits: u64,
    pub forks: u64,
    pub trap_dels: u64,
    pub terms: u64,
}

/// Tokens, age clock and regime of one replica.
#[derive(Debug, Clone)]
pub struct PopulationState {
    time: u64,
    tokens: Vec<Token>,
    clock: AgeClock,
    regime: Regime,
    touched_at: Vec<u64>,
    touched: Vec<usize>,
}

impl PopulationState {
    pub fn new<R: Rng + ?Sized>(
        k: &TransitionKernel,
        controller: &Controller,
        settings: &SimulationSettings,
        rng: &mut R,
    ) -> Result<Self> {
        let n = k.node_count();
        settings.validate(n)?;
        let tokens = match settings.init {
            InitialPlacement::Node(u) => vec![Token { node: u, dispatched: false }; settings.z0 as usize],
            InitialPlacement::Stationary => {
                let d = WeightedIndex::new(k.stationary().probs())
                    .map_err(|e| Error::InvalidWeights(e.to_string()))?;
                (0..settings.z0).map(|_| Token { node: d.sample(rng), dispatched: false }).collect()
            }
        };
        Ok(Self {
            time: 0,
            tokens,
            clock: AgeClock::new(n, settings.initial_age),
            regime: controller.initial_regime(settings.z0),
            touched_at: vec![0; n],
            touched: Vec::new(),
        })
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn alive(&self) -> u64 {
        self.tokens.len() as u64
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn clock(&self) -> &AgeClock {
        &self.clock
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.tokens.iter().map(|t| t.node)
    }

    /// `N_u(t)` for every node.
    pub fn occupancy(&self, n: usize) -> Vec<u64> {
        let mut counts = vec![0; n];
        for t in &self.tokens {
            counts[t.node] += 1;
        }
        counts
    }
}

/// Advances one step: every token moves (fork copies along their assigned
/// edge), then each arrival faces the trap and the node's rule with the age
/// the node had before this step's visits, and finally every visited node's
/// clock is reset once.
pub fn step<R: Rng + ?Sized>(
    state: &mut PopulationState,
    k: &TransitionKernel,
    traps: &TrapProfile,
    controller: &Controller,
    order: EventOrder,
    rng: &mut R,
    mut ages: Option<&mut [AgeHistogram]>,
) -> StepEvents {
    for tok in &mut state.tokens {
        if tok.dispatched {
            tok.dispatched = false;
        } else {
            tok.node = k.sample_next(tok.node, rng);
        }
    }
    state.time += 1;
    let t = state.time;
    let spec = controller.spec(state.regime);
    let mut ev = StepEvents { visits: state.tokens.len() as u64, ..Default::default() };
    let mut next = Vec::with_capacity(state.tokens.len() + state.tokens.len() / 8);
    state.touched.clear();

    for &tok in &state.tokens {
        let u = tok.node;
        let age = state.clock.age(u, t);
        if state.touched_at[u] != t {
            state.touched_at[u] = t;
            state.touched.push(u);
        }
        if let Some(h) = ages.as_deref_mut() {
            h[u].record(age);
        }
        let zeta = traps.zeta(u);
        let trapped = |rng: &mut R| zeta > 0.0 && rng.random_bool(zeta);
        match order {
            EventOrder::TrapFirst => {
                if trapped(rng) {
                    ev.trap_dels += 1;
                    continue;
                }
                match decide(spec, u, age, rng) {
                    VisitAction::Fork => {
                        ev.forks += 1;
                        let (a, b) = k.sample_fork_targets(u, rng);
                        next.push(Token { node: a, dispatched: true });
                        next.push(Token { node: b, dispatched: true });
                    }
                    VisitAction::Terminate => ev.terms += 1,
                    VisitAction::Pass => next.push(tok),
                }
            }
            EventOrder::PolicyFirst => match decide(spec, u, age, rng) {
                VisitAction::Terminate => ev.terms += 1,
                VisitAction::Fork => {
                    // The copy is created after the trap acts, so only the
                    // parent is exposed.
                    ev.forks += 1;
                    let (a, b) = k.sample_fork_targets(u, rng);
                    next.push(Token { node: b, dispatched: true });
                    if trapped(rng) {
                        ev.trap_dels += 1;
                    } else {
                        next.push(Token { node: a, dispatched: true });
                    }
                }
                VisitAction::Pass => {
                    if trapped(rng) {
                        ev.trap_dels += 1;
                    } else {
                        next.push(tok);
                    }
                }
            },
        }
    }
    for &u in &state.touched {
        state.clock.record_visit(u, t);
    }
    state.tokens = next;
    state.regime = controller.next_regime(state.regime, state.tokens.len() as u64);
    ev
}

/// Deterministic per-replica generator: `seed` selects the family and the
/// replica index selects an independent stream.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Simulates one replica until the horizon, extinction or the population cap.
pub fn run(
    k: &TransitionKernel,
    traps: &TrapProfile,
    controller: &Controller,
    settings: &SimulationSettings,
    seed: u64,
    replica: u64,
) -> Result<PopulationTrace> {
    let n = k.node_count();
    if traps.node_count() != n || controller.node_count() != n {
        return Err(Error::param("policy", "traps and policy must cover every node of the graph"));
    }
    let mut rng = replica_rng(seed, replica);
    let mut state = PopulationState::new(k, controller, settings, &mut rng)?;
    let mut trace = PopulationTrace::start(seed, replica, settings.z0, state.regime == Regime::High, !settings.summary_only);
    let mut ages = settings.age_warmup.map(|_| vec![AgeHistogram::new(settings.age_track); n]);
    while state.time < settings.horizon {
        let regime = state.regime;
        let record_ages = settings.age_warmup.is_some_and(|w| state.time + 1 >= w);
        let hist = if record_ages { ages.as_deref_mut() } else { None };
        let ev = step(&mut state, k, traps, controller, settings.event_order, &mut rng, hist);
        let z = state.alive();
        trace.push(StepRecord {
            t: state.time,
            z,
            forks: ev.forks,
            trap_dels: ev.trap_dels,
            terms: ev.terms,
            visits: ev.visits,
            high: regime == Regime::High,
        });
        if z == 0 {
            trace.extinct = true;
            break;
        }
        if z >= settings.z_cap {
            trace.capped = true;
            break;
        }
    }
    trace.age_law = ages;
    Ok(trace)
}

/// Runs `replicas` independent replicas in parallel; results are in replica
/// order and identical to sequential execution.
pub fn run_replicas(
    k: &TransitionKernel,
    traps: &TrapProfile,
    controller: &Controller,
    settings: &SimulationSettings,
    seed: u64,
    replicas: u64,
) -> Result<Vec<PopulationTrace>> {
    (0..replicas).into_par_iter().map(|r| run(k, traps, controller, settings, seed, r)).collect()
}
