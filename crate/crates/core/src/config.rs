//! Experiment configuration: JSON schema, validation and resolution into
//! library objects.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{generators, Graph, GraphDoc};
use crate::kernel::{TransitionKernel, DEFAULT_LAZINESS};
use crate::policy::{BoundaryPriority, Controller, NodePolicy, PolicySpec, RegimePolicy};
use crate::population::{EventOrder, InitialPlacement, SimulationSettings, TrapProfile, DEFAULT_Z_CAP};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub graph: GraphSource,
    #[serde(default = "default_laziness")]
    pub laziness: f64,
    #[serde(default)]
    pub traps: TrapsConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub blocks: BlocksConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corridor: Option<CorridorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_laziness() -> f64 {
    DEFAULT_LAZINESS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Generator(GeneratorSpec),
    /// Inline edge-list text.
    EdgeList(String),
    /// Path to an edge-list (`.txt`, `.edges`) or JSON (`.json`) file,
    /// relative to the config file.
    File(PathBuf),
    Json(GraphDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    Star { n: usize },
    ErdosRenyi { n: usize, p: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSelection {
    All(AllNodes),
    List(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllNodes {
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaSpec {
    Scalar(f64),
    /// Node id (as a string key) to zeta; overrides the node selection.
    PerNode(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapsConfig {
    pub nodes: NodeSelection,
    pub zeta: ZetaSpec,
}

impl Default for TrapsConfig {
    fn default() -> Self {
        Self { nodes: NodeSelection::List(Vec::new()), zeta: ZetaSpec::Scalar(0.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalars<T> {
    Uniform(T),
    PerNode(Vec<T>),
}

impl<T: Copy> Scalars<T> {
    fn resolve(&self, n: usize, field: &str) -> Result<Vec<T>> {
        match self {
            Scalars::Uniform(v) => Ok(vec![*v; n]),
            Scalars::PerNode(v) if v.len() == n => Ok(v.clone()),
            Scalars::PerNode(v) => Err(Error::param(field, format!("has {} entries for {n} nodes", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    #[serde(rename = "A_l")]
    pub a_l: Scalars<u64>,
    #[serde(rename = "A_s", default = "zero_u64")]
    pub a_s: Scalars<u64>,
    #[serde(default = "zero_f64")]
    pub q_fork: Scalars<f64>,
    #[serde(default = "zero_f64")]
    pub q_term: Scalars<f64>,
    #[serde(default)]
    pub boundary_priority: BoundaryPriority,
}

fn zero_u64() -> Scalars<u64> {
    Scalars::Uniform(0)
}

fn zero_f64() -> Scalars<f64> {
    Scalars::Uniform(0.0)
}

impl SpecConfig {
    pub fn passive() -> Self {
        Self {
            a_l: Scalars::Uniform(0),
            a_s: zero_u64(),
            q_fork: zero_f64(),
            q_term: zero_f64(),
            boundary_priority: BoundaryPriority::Fork,
        }
    }

    fn resolve(&self, n: usize, prefix: &str) -> Result<PolicySpec> {
        let a_l = self.a_l.resolve(n, &format!("{prefix}.A_l"))?;
        let a_s = self.a_s.resolve(n, &format!("{prefix}.A_s"))?;
        let q_fork = self.q_fork.resolve(n, &format!("{prefix}.q_fork"))?;
        let q_term = self.q_term.resolve(n, &format!("{prefix}.q_term"))?;
        let nodes = (0..n)
            .map(|u| NodePolicy { a_l: a_l[u], a_s: a_s[u], q_fork: q_fork[u], q_term: q_term[u] })
            .collect();
        PolicySpec::new(nodes, self.boundary_priority).map_err(|e| prefix_error(e, prefix))
    }
}

fn prefix_error(e: Error, prefix: &str) -> Error {
    match e {
        Error::Parameter { field, reason } => {
            let field = field.strip_prefix("policy").unwrap_or(&field).to_string();
            Error::Parameter { field: format!("{prefix}{field}"), reason }
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    #[serde(rename = "Z_low")]
    pub z_low: u64,
    #[serde(rename = "Z_high")]
    pub z_high: u64,
    pub low: SpecConfig,
    pub high: SpecConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyConfig {
    Regime { regime: RegimeConfig },
    Uniform(SpecConfig),
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Uniform(SpecConfig::passive())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    Doeblin,
    #[default]
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    #[serde(default)]
    pub mode: EnvelopeMode,
    #[serde(default = "default_samples")]
    pub samples_per_node: usize,
    #[serde(default = "default_delta")]
    pub delta_fit: f64,
    #[serde(default = "default_env_seed")]
    pub seed: u64,
}

fn default_samples() -> usize {
    20_000
}

fn default_delta() -> f64 {
    crate::envelopes::DEFAULT_DELTA_FIT
}

fn default_env_seed() -> u64 {
    1
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            mode: EnvelopeMode::default(),
            samples_per_node: default_samples(),
            delta_fit: default_delta(),
            seed: default_env_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum InitConfig {
    Named(InitName),
    Node { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(rename = "Z_0", default = "default_z0")]
    pub z0: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "Z_cap", default = "default_cap")]
    pub z_cap: u64,
    #[serde(default)]
    pub initial_age: u64,
    #[serde(default)]
    pub event_order: EventOrder,
    #[serde(default = "default_init")]
    pub init: InitConfig,
}

fn default_z0() -> u64 {
    10
}

fn default_horizon() -> u64 {
    1_000
}

fn default_replicas() -> u64 {
    1
}

fn default_cap() -> u64 {
    DEFAULT_Z_CAP
}

fn default_init() -> InitConfig {
    InitConfig::Named(InitName::Stationary)
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            z0: default_z0(),
            horizon: default_horizon(),
            replicas: default_replicas(),
            seed: 0,
            z_cap: default_cap(),
            initial_age: 0,
            event_order: EventOrder::default(),
            init: default_init(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksConfig {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_eps_mix")]
    pub eps_mix: f64,
}

fn default_kappa() -> f64 {
    crate::population::drift::DEFAULT_KAPPA
}

fn default_eps_mix() -> f64 {
    0.125
}

impl Default for BlocksConfig {
    fn default() -> Self {
        Self { kappa: default_kappa(), eps_mix: default_eps_mix() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    #[serde(rename = "Z_low")]
    pub z_low: u64,
    #[serde(rename = "Z_high")]
    pub z_high: u64,
}

/// Grid axes; an omitted axis keeps the base config's value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
    #[serde(rename = "A_l", default, skip_serializing_if = "Vec::is_empty")]
    pub a_l: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zeta_scale: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kappa: Vec<f64>,
}

/// Library objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kernel: TransitionKernel,
    pub traps: TrapProfile,
    pub controller: Controller,
    pub settings: SimulationSettings,
}

impl ExperimentConfig {
    /// Parses JSON text; errors carry the field path and line.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::param(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    /// Reads a config file; a relative `graph.file` is resolved against the
    /// config's directory and stored inline so the resolved config is
    /// self-contained.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let GraphSource::File(p) = &cfg.graph {
            let full = if p.is_absolute() { p.clone() } else { path.parent().unwrap_or(Path::new(".")).join(p) };
            let body = std::fs::read_to_string(&full)
                .map_err(|e| Error::Config(format!("graph.file: cannot read {}: {e}", full.display())))?;
            let graph = if full.extension().is_some_and(|x| x == "json") {
                Graph::from_json(&body)?
            } else {
                Graph::from_edge_list(&body)?
            };
            cfg.graph = GraphSource::Json(GraphDoc::from(&graph));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn build_graph(&self) -> Result<Graph> {
        match &self.graph {
            GraphSource::Generator(g) => match *g {
                GeneratorSpec::Path { n } => generators::path(n),
                GeneratorSpec::Cycle { n } => generators::cycle(n),
                GeneratorSpec::Complete { n } => generators::complete(n),
                GeneratorSpec::Star { n } => generators::star(n),
                GeneratorSpec::ErdosRenyi { n, p, seed } => generators::erdos_renyi(n, p, seed),
            },
            GraphSource::EdgeList(text) => Graph::from_edge_list(text),
            GraphSource::Json(doc) => doc.clone().into_graph(),
            GraphSource::File(p) => Err(Error::Config(format!(
                "graph.file {} must be loaded through ExperimentConfig::load",
                p.display()
            ))),
        }
    }

    pub fn build_traps(&self, n: usize) -> Result<TrapProfile> {
        match &self.traps.zeta {
            ZetaSpec::PerNode(map) => {
                let mut z = vec![0.0; n];
                for (key, &v) in map {
                    let u: usize = key
                        .parse()
                        .map_err(|_| Error::param(format!("traps.zeta.{key}"), "keys must be node ids"))?;
                    *z.get_mut(u)
                        .ok_or_else(|| Error::param(format!("traps.zeta.{key}"), format!("{u} is not a node")))? = v;
                }
                TrapProfile::new(z)
            }
            ZetaSpec::Scalar(v) => match &self.traps.nodes {
                NodeSelection::All(_) => TrapProfile::uniform(n, *v),
                NodeSelection::List(list) => TrapProfile::at_nodes(n, list, *v),
            },
        }
    }

    pub fn build_controller(&self, n: usize) -> Result<Controller> {
        match &self.policy {
            PolicyConfig::Uniform(s) => Ok(Controller::Fixed(s.resolve(n, "policy")?)),
            PolicyConfig::Regime { regime } => Ok(Controller::Switching(RegimePolicy::new(
                regime.z_low,
                regime.z_high,
                regime.low.resolve(n, "policy.regime.low")?,
                regime.high.resolve(n, "policy.regime.high")?,
            )?)),
        }
    }

    pub fn build_settings(&self, n: usize) -> Result<SimulationSettings> {
        let s = &self.simulation;
        let init = match s.init {
            InitConfig::Named(InitName::Stationary) => InitialPlacement::Stationary,
            InitConfig::Node { node } => InitialPlacement::Node(node),
        };
        let settings = SimulationSettings {
            z0: s.z0,
            horizon: s.horizon,
            z_cap: s.z_cap,
            initial_age: s.initial_age,
            event_order: s.event_order,
            init,
            ..Default::default()
        };
        settings.validate(n)?;
        Ok(settings)
    }

    /// Validates every block and builds the simulation objects.
    pub fn resolve(&self) -> Result<Resolved> {
        if !(self.laziness > 0.0 && self.laziness < 1.0) {
            return Err(Error::param("laziness", format!("must lie in (0, 1), got {}", self.laziness)));
        }
        if self.envelope.samples_per_node < crate::envelopes::MIN_FIT_SAMPLES && self.envelope.mode == EnvelopeMode::Fit {
            return Err(Error::param(
                "envelope.samples_per_node",
                format!("fit mode needs at least {}", crate::envelopes::MIN_FIT_SAMPLES),
            ));
        }
        if !(0.0..1.0).contains(&self.envelope.delta_fit) {
            return Err(Error::param("envelope.delta_fit", "must lie in [0, 1)"));
        }
        if !(self.blocks.kappa >= 4.0) {
            return Err(Error::param("blocks.kappa", "must be at least 4"));
        }
        if !(self.blocks.eps_mix > 0.0 && self.blocks.eps_mix < 1.0) {
            return Err(Error::param("blocks.eps_mix", "must lie in (0, 1)"));
        }
        if self.simulation.replicas < 1 {
            return Err(Error::param("simulation.replicas", "must be at least 1"));
        }
        if let Some(c) = &self.corridor {
            if c.z_low >= c.z_high {
                return Err(Error::param("corridor", "Z_low must be below Z_high"));
            }
        }
        let graph = self.build_graph()?;
        let n = graph.node_count();
        let kernel = TransitionKernel::lazy(graph, self.laziness)?;
        Ok(Resolved {
            traps: self.build_traps(n)?,
            controller: self.build_controller(n)?,
            settings: self.build_settings(n)?,
            kernel,
        })
    }

    /// Sets every fork probability (in every regime) to `q`.
    pub fn with_q_fork(&self, q: f64) -> Self {
        let mut c = self.clone();
        for s in c.specs_mut() {
            s.q_fork = Scalars::Uniform(q);
        }
        c
    }

    /// Sets every long trigger (in every regime) to `a_l`.
    pub fn with_a_l(&self, a_l: u64) -> Self {
        let mut c = self.clone();
        for s in c.specs_mut() {
            s.a_l = Scalars::Uniform(a_l);
        }
        c
    }

    fn specs_mut(&mut self) -> Vec<&mut SpecConfig> {
        match &mut self.policy {
            PolicyConfig::Uniform(s) => vec![s],
            PolicyConfig::Regime { regime } => vec![&mut regime.low, &mut regime.high],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "graph": {"generator": {"kind": "path", "n": 3}}}"#;

    #[test]
    fn defaults_resolve() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.kernel.node_count(), 3);
        assert_eq!(r.kernel.laziness(), 0.5);
        assert_eq!(r.settings.z_cap, 1_000_000);
        assert_eq!(cfg.hash(), ExperimentConfig::from_json(MINIMAL).unwrap().hash());
    }

    #[test]
    fn unknown_fields_name_their_path() {
        let text = r#"{"schema_version": 1, "graph": {"generator": {"kind": "path", "n": 3}},
            "simulation": {"Z_0": 5, "horizn": 10}}"#;
        let err = ExperimentConfig::from_json(text).unwrap_err().to_string();
        assert!(err.contains("simulation"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn invalid_values_are_field_level() {
        let text = r#"{"schema_version": 1, "graph": {"generator": {"kind": "path", "n": 3}},
            "policy": {"A_l": 2, "A_s": 3, "q_fork": 0.5}}"#;
        let err = ExperimentConfig::from_json(text).unwrap().resolve().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("policy.A_s[0]"), "{err}");
        let text = r#"{"schema_version": 2, "graph": {"generator": {"kind": "path", "n": 3}}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn regime_and_traps() {
        let text = r#"{"schema_version": 1,
            "graph": {"edge_list": "0 1\n1 2\n2 0\n"},
            "traps": {"nodes": "all", "zeta": 0.1},
            "policy": {"regime": {"Z_low": 5, "Z_high": 50,
                "low": {"A_l": 0, "q_fork": 0.2},
                "high": {"A_l": 9, "A_s": 2, "q_fork": [0.1, 0.1, 0.1], "q_term": 0.2}}}}"#;
        let r = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        assert_eq!(r.traps.zetas(), &[0.1, 0.1, 0.1]);
        assert!(matches!(r.controller, Controller::Switching(_)));
        let text = r#"{"schema_version": 1, "graph": {"generator": {"kind": "path", "n": 3}},
            "traps": {"nodes": [], "zeta": {"1": 1.0}}}"#;
        let r = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        assert_eq!(r.traps.zetas(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn disconnected_draw_names_components() {
        let text = r#"{"schema_version": 1, "graph": {"generator": {"kind": "erdos_renyi", "n": 12, "p": 0.05, "seed": 3}}}"#;
        let err = ExperimentConfig::from_json(text).unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }), "{err}");
    }
}
