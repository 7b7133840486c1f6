//! Command implementations behind the `srrw` binary. Each command writes its
//! artifacts into a fresh run directory and returns its path.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_feasibility, corridor_stats, lyapunov_drift, CorridorFeasibility, CorridorStats, FeasibilityReport,
    LyapunovDrift,
};
use crate::config::{EnvelopeMode, ExperimentConfig, Resolved};
use crate::envelopes::{
    age_grid, decay_scale, doeblin_constants, envelope_curve_csv, fit_constants, solve_a_eff, AEffInterval,
    EnvelopeModel, EnvelopeSign,
};
use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;
use crate::mixing::{mixing_profile, MixingProfile};
use crate::policy::{mean_termination_rate, Controller, Regime};
use crate::population::{
    block_drift, run_replicas, BlockPlan, BlockSummary, DriftReport, PopulationTrace, TraceSummary,
};
use crate::return_time::{empirical_tail, sample_return_times, tails_to_csv, ReturnTimeSample};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerances tabulated by `stationary`.
pub const T_MIX_TOLERANCES: [f64; 6] = [0.5, 0.25, 0.125, 0.0625, 0.01, 0.001];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl ArtifactMeta {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self { config_hash: cfg.hash(), seed: cfg.simulation.seed, version: VERSION.to_string() }
    }

    fn csv_header(&self) -> String {
        format!("# config_hash={} seed={} version={}\n", self.config_hash, self.seed, self.version)
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    meta: &'a ArtifactMeta,
    #[serde(flatten)]
    body: T,
}

struct RunDir {
    path: PathBuf,
    meta: ArtifactMeta,
}

impl RunDir {
    /// `<out>/<hash prefix>-<unix seconds>`, suffixed when taken.
    fn create(out: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let meta = ArtifactMeta::new(cfg);
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let base = format!("{}-{secs}", &meta.config_hash[..8]);
        std::fs::create_dir_all(out)?;
        let mut path = out.join(&base);
        let mut i = 1;
        while path.exists() {
            path = out.join(format!("{base}-{i}"));
            i += 1;
        }
        std::fs::create_dir(&path)?;
        std::fs::write(path.join("config.resolved.json"), cfg.to_json())?;
        Ok(Self { path, meta })
    }

    fn json<T: Serialize>(&self, name: &str, body: T) -> Result<()> {
        let doc = Artifact { meta: &self.meta, body };
        std::fs::write(self.path.join(name), serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }

    fn csv(&self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.path.join(name), self.meta.csv_header() + body)?;
        Ok(())
    }
}

/// Mixing profile long enough to resolve tolerance `tightest`.
pub fn full_mixing_profile(k: &TransitionKernel, tightest: f64) -> Result<MixingProfile> {
    let probe = mixing_profile(k, 1)?;
    mixing_profile(k, probe.spectral_bound(tightest) + 1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingRow {
    pub tolerance: f64,
    pub t_mix: usize,
    pub spectral_bound: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryReport {
    pub nodes: usize,
    pub edges: usize,
    pub weighted: bool,
    pub laziness: f64,
    pub pi: Vec<f64>,
    pub pi_min: f64,
    pub spectral_gap: f64,
    pub lambda2: f64,
    pub t_mix: Vec<MixingRow>,
    pub leaves: Vec<usize>,
}

pub fn stationary_report(k: &TransitionKernel) -> Result<(StationaryReport, MixingProfile)> {
    let tightest = T_MIX_TOLERANCES.iter().copied().fold(1.0, f64::min);
    let m = full_mixing_profile(k, tightest)?;
    let t_mix = T_MIX_TOLERANCES
        .iter()
        .map(|&tol| Ok(MixingRow { tolerance: tol, t_mix: m.t_mix(tol)?, spectral_bound: m.spectral_bound(tol) }))
        .collect::<Result<_>>()?;
    let g = k.graph();
    let report = StationaryReport {
        nodes: g.node_count(),
        edges: g.edge_count(),
        weighted: g.is_weighted(),
        laziness: k.laziness(),
        pi: k.stationary().probs().to_vec(),
        pi_min: k.stationary().min(),
        spectral_gap: m.spectral_gap,
        lambda2: m.lambda2,
        t_mix,
        leaves: g.leaves(),
    };
    Ok((report, m))
}

pub fn cmd_stationary(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let r = cfg.resolve()?;
    let dir = RunDir::create(out, cfg)?;
    let (report, m) = stationary_report(&r.kernel)?;
    let mut pi_csv = String::from("node,pi,degree\n");
    for (u, p) in report.pi.iter().enumerate() {
        pi_csv += &format!("{u},{p},{}\n", r.kernel.graph().degree(u));
    }
    let mut tv_csv = String::from("t,tv\n");
    for (t, d) in m.tv_curve.iter().enumerate() {
        tv_csv += &format!("{t},{d}\n");
    }
    dir.json("stationary.json", &report)?;
    dir.csv("pi.csv", &pi_csv)?;
    dir.csv("tv_curve.csv", &tv_csv)?;
    Ok(dir.path)
}

/// Return-time samples for every node, one seeded stream per node.
pub fn node_samples(k: &TransitionKernel, per_node: usize, seed: u64) -> Result<Vec<ReturnTimeSample>> {
    (0..k.node_count())
        .into_par_iter()
        .map(|u| sample_return_times(k, u, per_node, seed.wrapping_add(u as u64)))
        .collect()
}

/// Envelope model selected by the config, with the samples behind it (empty
/// in Doeblin mode).
pub fn build_envelope(cfg: &ExperimentConfig, k: &TransitionKernel) -> Result<(EnvelopeModel, Vec<ReturnTimeSample>)> {
    match cfg.envelope.mode {
        EnvelopeMode::Doeblin => Ok((doeblin_constants(k)?, Vec::new())),
        EnvelopeMode::Fit => {
            let samples = node_samples(k, cfg.envelope.samples_per_node, cfg.envelope.seed)?;
            Ok((fit_constants(&samples, k.stationary(), cfg.envelope.delta_fit)?, samples))
        }
    }
}

pub fn cmd_envelopes(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let r = cfg.resolve()?;
    let (model, samples) = build_envelope(cfg, &r.kernel)?;
    let dir = RunDir::create(out, cfg)?;
    let a_big = 20.0 * decay_scale(&model, EnvelopeSign::Minus);
    let model_doc: serde_json::Value = serde_json::from_str(&model.to_json()?)?;
    dir.json("envelopes.json", model_doc)?;
    dir.csv("envelope_curve.csv", &envelope_curve_csv(&model, &age_grid(a_big, 100)))?;
    if !samples.is_empty() {
        let rows = samples
            .iter()
            .map(|s| {
                let mut ages: Vec<u64> = age_grid(s.max() as f64, 40).iter().skip(1).map(|a| a.round() as u64).collect();
                ages.dedup();
                Ok((s.node, empirical_tail(s, &ages)?))
            })
            .collect::<Result<Vec<_>>>()?;
        dir.csv("return_tails.csv", &tails_to_csv(&rows))?;
    }
    Ok(dir.path)
}

fn simulate_traces(r: &Resolved, cfg: &ExperimentConfig, warmup: Option<u64>) -> Result<Vec<PopulationTrace>> {
    let mut settings = r.settings.clone();
    settings.age_warmup = warmup;
    let max_a_s = match &r.controller {
        Controller::Fixed(s) => s.nodes().iter().map(|p| p.a_s).max().unwrap_or(0),
        Controller::Switching(rp) => {
            rp.low.nodes().iter().chain(rp.high.nodes()).map(|p| p.a_s).max().unwrap_or(0)
        }
    };
    settings.age_track = settings.age_track.max(max_a_s + 1);
    run_replicas(&r.kernel, &r.traps, &r.controller, &settings, cfg.simulation.seed, cfg.simulation.replicas)
}

#[derive(Serialize)]
struct ReplicaSummary<'a> {
    #[serde(flatten)]
    summary: TraceSummary,
    blocks: &'a [BlockSummary],
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let r = cfg.resolve()?;
    let t_mix = full_mixing_profile(&r.kernel, cfg.blocks.eps_mix)?.t_mix(cfg.blocks.eps_mix)? as u64;
    let plan = BlockPlan::new(t_mix, cfg.blocks.kappa, 0.0)?;
    let traces = simulate_traces(&r, cfg, None)?;
    let dir = RunDir::create(out, cfg)?;
    let blocks: Vec<Vec<BlockSummary>> = traces.iter().map(|t| plan.blocks(t)).collect();
    for tr in &traces {
        dir.csv(&format!("trace_r{}.csv", tr.replica), &tr.to_csv())?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        lambda_del: f64,
        block_length: u64,
        replicas: Vec<ReplicaSummary<'a>>,
        extinct_fraction: f64,
        capped_fraction: f64,
    }
    let n = traces.len() as f64;
    dir.json(
        "summary.json",
        Summary {
            lambda_del: r.traps.absorption_pressure(r.kernel.stationary()),
            block_length: plan.block_length(),
            replicas: traces
                .iter()
                .zip(&blocks)
                .map(|(t, b)| ReplicaSummary { summary: t.summary(), blocks: b })
                .collect(),
            extinct_fraction: traces.iter().filter(|t| t.extinct).count() as f64 / n,
            capped_fraction: traces.iter().filter(|t| t.capped).count() as f64 / n,
        },
    )?;
    Ok(dir.path)
}

/// Measured quantities and verdicts for one policy regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub regime: String,
    pub q: f64,
    pub token_steps: u64,
    /// Forks per token-step after the mixing warmup.
    pub p_fork: f64,
    /// Terminations per token-step after the mixing warmup.
    pub k_term_measured: f64,
    /// Plug-in rate from the empirical age law (fixed policies only).
    pub k_term_plugin: Option<f64>,
    pub a_eff: Option<AEffInterval>,
    pub with_measured: Option<FeasibilityReport>,
    pub with_plugin: Option<FeasibilityReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub envelope_source: crate::envelopes::EnvelopeSource,
    pub lambda_del: f64,
    pub t_mix: u64,
    pub block_length: u64,
    pub regimes: Vec<RegimeCheck>,
    pub corridor_feasibility: Option<CorridorFeasibility>,
    pub extinct_fraction: f64,
    pub capped_fraction: f64,
    pub drift: Option<DriftReport>,
    pub corridor: Vec<CorridorStats>,
    pub lyapunov: Vec<LyapunovDrift>,
}

impl CheckOutcome {
    /// Report whose viability verdict summarises the run: the fixed policy
    /// or the low regime.
    pub fn viability(&self) -> Option<&FeasibilityReport> {
        self.regimes.first().and_then(|r| r.with_measured.as_ref())
    }

    /// Report whose safety verdict summarises the run: the fixed policy or
    /// the high regime.
    pub fn safety(&self) -> Option<&FeasibilityReport> {
        self.regimes.last().and_then(|r| r.with_measured.as_ref())
    }

    pub fn mean_observed_drift(&self) -> Option<f64> {
        let d = self.drift.as_ref()?;
        (!d.rows.is_empty()).then(|| d.rows.iter().map(|r| r.observed).sum::<f64>() / d.rows.len() as f64)
    }
}

fn regime_rates(traces: &[PopulationTrace], warmup: u64, high: Option<bool>) -> (u64, u64, u64) {
    let (mut visits, mut forks, mut terms) = (0, 0, 0);
    for tr in traces {
        for s in tr.steps().iter().filter(|s| s.t > warmup && high.is_none_or(|h| s.high == h)) {
            visits += s.visits;
            forks += s.forks;
            terms += s.terms;
        }
    }
    (visits, forks, terms)
}

/// Runs the configured simulation and evaluates the feasibility conditions
/// against the measured rates. `zeta_scale` multiplies every trap.
pub fn evaluate(cfg: &ExperimentConfig, model: &EnvelopeModel, zeta_scale: f64) -> Result<CheckOutcome> {
    let mut r = cfg.resolve()?;
    r.traps = r.traps.scaled(zeta_scale)?;
    let pi = r.kernel.stationary().clone();
    let lambda_del = r.traps.absorption_pressure(&pi);
    let t_mix = full_mixing_profile(&r.kernel, cfg.blocks.eps_mix)?.t_mix(cfg.blocks.eps_mix)? as u64;
    let traces = simulate_traces(&r, cfg, Some(t_mix))?;

    let parts: Vec<(&str, Option<bool>, Regime)> = match &r.controller {
        Controller::Fixed(_) => vec![("fixed", None, Regime::Low)],
        Controller::Switching(_) => vec![("low", Some(false), Regime::Low), ("high", Some(true), Regime::High)],
    };
    let mut regimes = Vec::new();
    for (name, filter, regime) in parts {
        let spec = r.controller.spec(regime);
        let q = spec.q_cap();
        let (visits, forks, terms) = regime_rates(&traces, t_mix, filter);
        let (p_fork, k_meas) = if visits > 0 {
            (forks as f64 / visits as f64, terms as f64 / visits as f64)
        } else {
            (0.0, 0.0)
        };
        let k_plugin = match (&r.controller, filter) {
            (Controller::Fixed(_), _) => {
                let mut law: Option<Vec<crate::policy::AgeHistogram>> = None;
                for tr in &traces {
                    if let Some(h) = &tr.age_law {
                        match &mut law {
                            None => law = Some(h.clone()),
                            Some(acc) => acc.iter_mut().zip(h).for_each(|(a, b)| a.merge(b)),
                        }
                    }
                }
                law.and_then(|l| mean_termination_rate(spec, &pi, &l).ok())
            }
            _ => None,
        };
        let mut rc = RegimeCheck {
            regime: name.to_string(),
            q,
            token_steps: visits,
            p_fork,
            k_term_measured: k_meas,
            k_term_plugin: k_plugin,
            a_eff: None,
            with_measured: None,
            with_plugin: None,
        };
        if q > 0.0 && visits > 0 {
            let iv = solve_a_eff(model, q, p_fork.min(q))?;
            rc.with_measured = Some(check_feasibility(model, q, &iv, lambda_del, k_meas)?);
            rc.with_plugin = k_plugin.map(|k| check_feasibility(model, q, &iv, lambda_del, k)).transpose()?;
            rc.a_eff = Some(iv);
        }
        regimes.push(rc);
    }

    if regimes.iter().all(|r| r.token_steps == 0) {
        return Err(Error::InsufficientData(format!("no token visits after the mixing warmup t = {t_mix}")));
    }

    let corridor_feasibility = match (regimes.first(), regimes.get(1)) {
        (Some(lo), Some(hi)) => match (&lo.with_measured, &hi.with_measured) {
            (Some(a), Some(b)) => Some(CorridorFeasibility::new(a.clone(), b.clone())),
            _ => None,
        },
        _ => None,
    };

    let a_eff_plan = regimes
        .first()
        .and_then(|r| r.a_eff)
        .map(|iv| iv.hi())
        .filter(|a| a.is_finite())
        .unwrap_or(0.0);
    let plan = BlockPlan::new(t_mix, cfg.blocks.kappa, a_eff_plan)?;
    let drift_reports: Vec<DriftReport> =
        traces.iter().filter_map(|t| block_drift(t, &plan, lambda_del, 20).ok()).collect();
    let drift = if drift_reports.is_empty() { None } else { Some(DriftReport::combine(&drift_reports)?) };

    let (corridor, lyapunov) = match &cfg.corridor {
        Some(c) => {
            let stats = traces.iter().map(|t| corridor_stats(t, c.z_low, c.z_high, &plan)).collect::<Result<_>>()?;
            let ly = traces.iter().map(|t| lyapunov_drift(t, c.z_low, c.z_high, &plan)).collect::<Result<_>>()?;
            (stats, ly)
        }
        None => (Vec::new(), Vec::new()),
    };
    let n = traces.len() as f64;
    Ok(CheckOutcome {
        envelope_source: model.source,
        lambda_del,
        t_mix,
        block_length: plan.block_length(),
        regimes,
        corridor_feasibility,
        extinct_fraction: traces.iter().filter(|t| t.extinct).count() as f64 / n,
        capped_fraction: traces.iter().filter(|t| t.capped).count() as f64 / n,
        drift,
        corridor,
        lyapunov,
    })
}

pub fn cmd_check(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let r = cfg.resolve()?;
    let (model, _) = build_envelope(cfg, &r.kernel)?;
    let outcome = evaluate(cfg, &model, 1.0)?;
    let dir = RunDir::create(out, cfg)?;
    #[derive(Serialize)]
    struct Feasibility<'a> {
        envelope_source: crate::envelopes::EnvelopeSource,
        lambda_del: f64,
        t_mix: u64,
        block_length: u64,
        regimes: &'a [RegimeCheck],
        corridor_feasibility: &'a Option<CorridorFeasibility>,
        extinct_fraction: f64,
        capped_fraction: f64,
    }
    dir.json(
        "feasibility.json",
        Feasibility {
            envelope_source: outcome.envelope_source,
            lambda_del: outcome.lambda_del,
            t_mix: outcome.t_mix,
            block_length: outcome.block_length,
            regimes: &outcome.regimes,
            corridor_feasibility: &outcome.corridor_feasibility,
            extinct_fraction: outcome.extinct_fraction,
            capped_fraction: outcome.capped_fraction,
        },
    )?;
    if let Some(d) = &outcome.drift {
        dir.json("drift.json", d)?;
    }
    if !outcome.corridor.is_empty() {
        #[derive(Serialize)]
        struct Corridor<'a> {
            replicas: &'a [CorridorStats],
            lyapunov: &'a [LyapunovDrift],
        }
        dir.json("corridor.json", Corridor { replicas: &outcome.corridor, lyapunov: &outcome.lyapunov })?;
        for (i, s) in outcome.corridor.iter().enumerate() {
            dir.csv(&format!("excursions_r{i}.csv"), &s.excursions_csv())?;
        }
    }
    Ok(dir.path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: Option<f64>,
    pub a_l: Option<u64>,
    pub zeta_scale: f64,
    pub kappa: f64,
}

/// Cartesian product of the sweep axes, in `q, A_l, zeta_scale, kappa`
/// order; an empty axis contributes the base value.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let qs: Vec<Option<f64>> = if sweep.q.is_empty() { vec![None] } else { sweep.q.iter().map(|&q| Some(q)).collect() };
    let als: Vec<Option<u64>> =
        if sweep.a_l.is_empty() { vec![None] } else { sweep.a_l.iter().map(|&a| Some(a)).collect() };
    let zs = if sweep.zeta_scale.is_empty() { vec![1.0] } else { sweep.zeta_scale.clone() };
    let ks = if sweep.kappa.is_empty() { vec![cfg.blocks.kappa] } else { sweep.kappa.clone() };
    let mut out = Vec::new();
    for &q in &qs {
        for &a_l in &als {
            for &zeta_scale in &zs {
                for &kappa in &ks {
                    out.push(SweepPoint { q, a_l, zeta_scale, kappa });
                }
            }
        }
    }
    out
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(cfg: &ExperimentConfig, model: &EnvelopeModel) -> Result<String> {
    let mut csv = String::from(
        "point,q,A_l,zeta_scale,kappa,lambda_del,p_fork,k_term,a_lo,a_hi,viability_lhs,safety_lhs,viable,safe,\
         drift_agreement,mean_observed_drift,extinct_fraction,capped_fraction\n",
    );
    for (i, p) in sweep_points(cfg).iter().enumerate() {
        let mut c = cfg.clone();
        if let Some(q) = p.q {
            c = c.with_q_fork(q);
        }
        if let Some(a) = p.a_l {
            c = c.with_a_l(a);
        }
        c.blocks.kappa = p.kappa;
        let o = match evaluate(&c, model, p.zeta_scale) {
            Ok(o) => o,
            Err(Error::InsufficientData(_)) => {
                csv += &format!("{i},{},{},{},{}{}\n", opt(p.q), opt(p.a_l), p.zeta_scale, p.kappa, ",".repeat(13));
                continue;
            }
            Err(e) => return Err(e),
        };
        let v = o.viability();
        let s = o.safety();
        let iv = o.regimes.first().and_then(|r| r.a_eff);
        csv += &format!(
            "{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            opt(p.q),
            opt(p.a_l),
            p.zeta_scale,
            p.kappa,
            o.lambda_del,
            o.regimes.first().map(|r| r.p_fork).unwrap_or(0.0),
            o.regimes.last().map(|r| r.k_term_measured).unwrap_or(0.0),
            opt(iv.map(|iv| iv.lo())),
            opt(iv.map(|iv| iv.hi())),
            opt(v.map(|r| r.viability_lhs)),
            opt(s.map(|r| r.safety_lhs)),
            opt(v.map(|r| r.viable)),
            opt(s.map(|r| r.safe)),
            opt(o.drift.as_ref().and_then(|d| d.agreement())),
            opt(o.mean_observed_drift()),
            o.extinct_fraction,
            o.capped_fraction,
        );
    }
    Ok(csv)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    if cfg.sweep.is_none() {
        return Err(Error::param("sweep", "the sweep command needs a sweep block"));
    }
    let r = cfg.resolve()?;
    let (model, _) = build_envelope(cfg, &r.kernel)?;
    let csv = sweep_csv(cfg, &model)?;
    let dir = RunDir::create(out, cfg)?;
    dir.csv("sweep.csv", &csv)?;
    Ok(dir.path)
}

/// Resolves `cfg` and rejects a sweep grid that would violate a policy
/// invariant, before any work starts.
pub fn validate_sweep(cfg: &ExperimentConfig) -> Result<()> {
    for p in sweep_points(cfg) {
        let mut c = cfg.clone();
        if let Some(q) = p.q {
            c = c.with_q_fork(q);
        }
        if let Some(a) = p.a_l {
            c = c.with_a_l(a);
        }
        c.blocks.kappa = p.kappa;
        let r = c.resolve().map_err(|e| match e {
            Error::Parameter { field, reason } => Error::param(format!("sweep -> {field}"), reason),
            other => other,
        })?;
        r.traps.scaled(p.zeta_scale)?;
    }
    Ok(())
}
