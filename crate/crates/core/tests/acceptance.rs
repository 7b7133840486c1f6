//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Run with `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srrw::config::ExperimentConfig;
use srrw::envelopes::{
    age_grid, decay_scale, doeblin_constants, fit_constants, laplace, solve_a_eff, validate_sandwich, EnvelopeModel,
    EnvelopeSign,
};
use srrw::graph::generators;
use srrw::mixing::mixing_profile;
use srrw::policy::{Controller, PolicySpec};
use srrw::population::{
    extinction_probability, gw_baseline, occupancy_check, run_replicas, survival_fit, OffspringLaw, SimulationSettings,
    TrapProfile,
};
use srrw::return_time::{sample_return_times, ReturnTimeSample};
use srrw::runner::{build_envelope, evaluate};
use srrw::{Graph, TransitionKernel};

// Tolerances and sizes, one block per criterion.
const STATIONARY_GRAPHS: usize = 50;
const STATIONARY_POWER_TOL: f64 = 1e-8;
const DETAILED_BALANCE_TOL: f64 = 1e-12;
const STATIONARY_BUDGET: Duration = Duration::from_secs(10);

const KAC_SAMPLES: usize = 100_000;
const KAC_SE: f64 = 3.0;
const KAC_BUDGET: Duration = Duration::from_secs(60);

const SANDWICH_SLACK_SE: f64 = 3.0;
const FIT_DELTA: f64 = 0.1;

const LAPLACE_GRID: usize = 100;
const LAPLACE_TAIL: f64 = 1e-6;

const ROUND_TRIP_PAIRS: usize = 50;
const ROUND_TRIP_TOL: f64 = 1e-8;

const TRAP_ZETA: f64 = 0.1;
const TRAP_REPLICAS: u64 = 500;
const TRAP_SE: f64 = 3.0;
const TRAP_BUDGET: Duration = Duration::from_secs(60);

const NECESSITY_MARGIN: f64 = 0.05;
const NECESSITY_REPLICAS: u64 = 500;
const NECESSITY_HORIZON: u64 = 10_000;
const EXTINCT_FRACTION: f64 = 0.99;
const EXPLOSION_CAP: u64 = 100_000;
const EXPLOSION_FRACTION: f64 = 0.5;

const CORRIDOR_SEEDS: u64 = 10;
const CORRIDOR_HORIZON: u64 = 100_000;
const CORRIDOR_INSIDE: f64 = 0.5;
const CORRIDOR_RETURN_SPREAD: f64 = 0.2;
const CORRIDOR_BUDGET: Duration = Duration::from_secs(600);

const DRIFT_MIN_BLOCKS: usize = 100;
const DRIFT_AGREEMENT: f64 = 0.9;

const OCCUPANCY_TRIALS: u64 = 100;
const OCCUPANCY_TOKENS: u64 = 500;
const OCCUPANCY_ALPHA: f64 = 0.01;
const OCCUPANCY_PASS_RATE: f64 = 0.95;

const GW_REPLICAS: u64 = 2000;
const GW_GENERATIONS: u64 = 200;
const GW_CAP: u64 = 10_000;
const GW_SE: f64 = 3.0;

type Outcome = srrw::Result<(bool, String)>;

fn kac_graphs() -> srrw::Result<Vec<(&'static str, TransitionKernel)>> {
    let (er, _) = generators::connected_erdos_renyi(20, 0.3, 11, 100)?;
    Ok(vec![
        ("path-5", TransitionKernel::lazy(generators::path(5)?, 0.5)?),
        ("cycle-6", TransitionKernel::lazy(generators::cycle(6)?, 0.5)?),
        ("K4", TransitionKernel::lazy(generators::complete(4)?, 0.5)?),
        ("ER(20,0.3)", TransitionKernel::lazy(er, 0.5)?),
    ])
}

fn samples_for(k: &TransitionKernel, n: usize, seed: u64) -> srrw::Result<Vec<ReturnTimeSample>> {
    (0..k.node_count()).map(|u| sample_return_times(k, u, n, seed + u as u64)).collect()
}

struct Shared {
    graphs: Vec<(&'static str, TransitionKernel)>,
    samples: Vec<Vec<ReturnTimeSample>>,
    models: Vec<(&'static str, &'static str, EnvelopeModel)>,
}

fn random_graph(i: usize, rng: &mut ChaCha8Rng) -> srrw::Result<Graph> {
    let n = rng.random_range(3..=50);
    let p = rng.random_range(0.15..0.6);
    let (g, _) = generators::connected_erdos_renyi(n, p, rng.random(), 1000)?;
    if i.is_multiple_of(2) {
        return Ok(g);
    }
    let edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.u, e.v, rng.random_range(0.1..5.0))).collect();
    Graph::weighted(n, edges)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_power, mut worst_balance, mut weighted) = (0.0f64, 0.0f64, 0);
    for i in 0..STATIONARY_GRAPHS {
        let g = random_graph(i, &mut rng)?;
        weighted += g.is_weighted() as usize;
        let eps = rng.random_range(0.1..0.9);
        let k = TransitionKernel::lazy(g, eps)?;
        let n = k.node_count();
        let mut mu = vec![1.0 / n as f64; n];
        for _ in 0..1_000_000 {
            let next = k.step_distribution(&mu);
            let change = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            mu = next;
            if change < 1e-16 {
                break;
            }
        }
        let err = mu.iter().zip(k.stationary().probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_power = worst_power.max(err);
        worst_balance = worst_balance.max(k.max_detailed_balance_error());
    }
    let elapsed = start.elapsed();
    let ok = worst_power <= STATIONARY_POWER_TOL && worst_balance <= DETAILED_BALANCE_TOL && elapsed < STATIONARY_BUDGET;
    Ok((
        ok,
        format!(
            "{STATIONARY_GRAPHS} graphs ({weighted} weighted): max |pi - power iteration| = {worst_power:.2e} (tol {STATIONARY_POWER_TOL:.0e}), \
             detailed balance {worst_balance:.2e} (tol {DETAILED_BALANCE_TOL:.0e}), {elapsed:.2?}"
        ),
    ))
}

fn criterion_2(shared: &Shared) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut nodes = 0;
    for ((_, k), samples) in shared.graphs.iter().zip(&shared.samples) {
        for s in samples {
            let z = (s.mean() - 1.0 / k.stationary().get(s.node)).abs() / s.standard_error();
            worst = worst.max(z);
            nodes += 1;
        }
    }
    Ok((worst <= KAC_SE, format!("{nodes} nodes, {KAC_SAMPLES} samples each: worst |mean - 1/pi| = {worst:.2} SE (tol {KAC_SE})")))
}

fn criterion_3(shared: &Shared) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, k)) in shared.graphs.iter().enumerate() {
        let doeblin = &shared.models[2 * i].2;
        let fit = &shared.models[2 * i + 1].2;
        let d = validate_sandwich(doeblin, &shared.samples[i], None, SANDWICH_SLACK_SE);
        let held_out = samples_for(k, KAC_SAMPLES, 50_000 + 100 * i as u64)?;
        let f = validate_sandwich(fit, &held_out, None, SANDWICH_SLACK_SE);
        ok &= d.holds() && f.holds() && d.checked > 0 && f.checked > 0;
        parts.push(format!(
            "{name}: doeblin {}/{} fit(held-out) {}/{}",
            d.checked - d.violations.len(),
            d.checked,
            f.checked - f.violations.len(),
            f.checked
        ));
    }
    Ok((ok, format!("ages inside the sandwich, {}", parts.join("; "))))
}

fn criterion_4(shared: &Shared) -> Outcome {
    let mut ok = true;
    let mut worst_tail: f64 = 0.0;
    for (_, _, m) in &shared.models {
        for sign in [EnvelopeSign::Plus, EnvelopeSign::Minus] {
            let a_big = 20.0 * decay_scale(m, sign);
            let grid = age_grid(a_big, LAPLACE_GRID - 1);
            assert_eq!(grid.len(), LAPLACE_GRID);
            let values: Vec<f64> = grid.iter().map(|&a| laplace(m, sign, a)).collect();
            ok &= values[0] == 1.0;
            ok &= values.windows(2).all(|w| w[1] < w[0]);
            let tail = laplace(m, sign, a_big);
            worst_tail = worst_tail.max(tail);
            ok &= tail < LAPLACE_TAIL;
        }
    }
    Ok((
        ok,
        format!(
            "{} envelopes: L(0) = 1, strictly decreasing on {LAPLACE_GRID} points, max L(A_big) = {worst_tail:.2e} (tol {LAPLACE_TAIL:.0e})",
            2 * shared.models.len()
        ),
    ))
}

fn criterion_5(shared: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    let mut collapse = true;
    for (_, _, m) in &shared.models {
        for sign in [EnvelopeSign::Plus, EnvelopeSign::Minus] {
            let scale = decay_scale(m, sign);
            for _ in 0..ROUND_TRIP_PAIRS {
                let q = rng.random_range(0.01..=1.0);
                let a = rng.random_range(0.0..3.0 * scale);
                let p = q * laplace(m, sign, a);
                let iv = solve_a_eff(m, q, p)?;
                let root = match sign {
                    EnvelopeSign::Plus => iv.plus_root,
                    EnvelopeSign::Minus => iv.minus_root,
                };
                worst = worst.max((q * laplace(m, sign, root) - p).abs());
            }
        }
        let sym = EnvelopeModel::symmetric(&srrw::StationaryDistribution::from_probs(m.pi().to_vec())?, m.c_minus().to_vec())?;
        for _ in 0..ROUND_TRIP_PAIRS {
            let q = rng.random_range(0.01..=1.0);
            let a = rng.random_range(0.0..3.0 * decay_scale(&sym, EnvelopeSign::Minus));
            let iv = solve_a_eff(&sym, q, q * laplace(&sym, EnvelopeSign::Minus, a))?;
            collapse &= iv.lo() == iv.hi() && (iv.lo() - a).abs() <= 1e-6 * a.max(1.0);
        }
    }
    Ok((
        worst <= ROUND_TRIP_TOL && collapse,
        format!(
            "{ROUND_TRIP_PAIRS} pairs x {} models x 2 envelopes: max |q L(solve) - p| = {worst:.2e} (tol {ROUND_TRIP_TOL:.0e}); \
             symmetric collapse {}",
            shared.models.len(),
            if collapse { "exact" } else { "broken" }
        ),
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let k = TransitionKernel::lazy(generators::complete(4)?, 0.5)?;
    let t_mix = mixing_profile(&k, 100)?.t_mix(0.25)? as u64;
    let traps = TrapProfile::uniform(4, TRAP_ZETA)?;
    let controller = Controller::Fixed(PolicySpec::passive(4));
    let settings = SimulationSettings { z0: 50, horizon: 200, ..Default::default() };
    let traces = run_replicas(&k, &traps, &controller, &settings, 6, TRAP_REPLICAS)?;
    let fit = survival_fit(&traces, t_mix)
        .ok_or_else(|| srrw::Error::InsufficientData("no exposures after warmup".into()))?;
    let target = 1.0 - traps.absorption_pressure(k.stationary());
    let z = (fit.rate - target).abs() / fit.se;
    let elapsed = start.elapsed();
    Ok((
        z <= TRAP_SE && elapsed < TRAP_BUDGET,
        format!("survival {:.5} +/- {:.5} vs {target}: {z:.2} SE (tol {TRAP_SE}), {elapsed:.2?}", fit.rate, fit.se),
    ))
}

const NECESSITY_GRAPH: &str = r#""graph": {"generator": {"kind": "erdos_renyi", "n": 20, "p": 0.3, "seed": 11}},
    "envelope": {"mode": "fit", "samples_per_node": 20000, "seed": 1}"#;

fn necessity_config(policy: &str, zeta: f64, z0: u64) -> srrw::Result<ExperimentConfig> {
    ExperimentConfig::from_json(&format!(
        r#"{{"schema_version": 1, {NECESSITY_GRAPH},
            "traps": {{"nodes": "all", "zeta": {zeta}}},
            "policy": {policy},
            "simulation": {{"Z_0": {z0}, "horizon": {NECESSITY_HORIZON}, "replicas": {NECESSITY_REPLICAS},
                           "seed": 21, "Z_cap": {EXPLOSION_CAP}}}}}"#
    ))
}

fn criterion_7() -> Outcome {
    let cfg = necessity_config(r#"{"A_l": 8, "q_fork": 0.2, "q_term": 0.0}"#, 0.3, 20)?;
    let r = cfg.resolve()?;
    let (model, _) = build_envelope(&cfg, &r.kernel)?;
    let o = evaluate(&cfg, &model, 1.0)?;
    let rep = o.viability().ok_or_else(|| srrw::Error::InsufficientData("no visits after warmup".into()))?;
    let birth = rep.q * rep.at_lo.l_minus;
    let premise = birth <= rep.lambda_del - NECESSITY_MARGIN;
    let extinct = o.extinct_fraction;
    Ok((
        premise && extinct >= EXTINCT_FRACTION,
        format!(
            "q L-(A_eff lo) = {birth:.4} <= Lambda_del - {NECESSITY_MARGIN} = {:.4}: {premise}; extinct {extinct:.3} of {NECESSITY_REPLICAS} \
             within {NECESSITY_HORIZON} (tol {EXTINCT_FRACTION})",
            rep.lambda_del - NECESSITY_MARGIN
        ),
    ))
}

fn criterion_8() -> Outcome {
    let cfg = necessity_config(r#"{"A_l": 0, "q_fork": 0.5, "q_term": 0.0}"#, 0.05, 10)?;
    let r = cfg.resolve()?;
    let (model, _) = build_envelope(&cfg, &r.kernel)?;
    let o = evaluate(&cfg, &model, 1.0)?;
    let rep = o.safety().ok_or_else(|| srrw::Error::InsufficientData("no visits after warmup".into()))?;
    let excess = rep.q * rep.at_hi.l_plus - rep.lambda_del - rep.k_term;
    let premise = excess >= NECESSITY_MARGIN;
    let capped = o.capped_fraction;
    Ok((
        premise && capped >= EXPLOSION_FRACTION,
        format!(
            "q L+(A_eff hi) - Lambda_del - K_term = {excess:.4} >= {NECESSITY_MARGIN}: {premise}; hit Z_cap = {EXPLOSION_CAP} in \
             {capped:.3} of {NECESSITY_REPLICAS} (tol {EXPLOSION_FRACTION})"
        ),
    ))
}

fn corridor_outcome() -> srrw::Result<(srrw::runner::CheckOutcome, Duration)> {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::from_json(include_str!("../../../configs/corridor.json"))?;
    cfg.simulation.horizon = CORRIDOR_HORIZON;
    cfg.simulation.replicas = CORRIDOR_SEEDS;
    let r = cfg.resolve()?;
    let (model, _) = build_envelope(&cfg, &r.kernel)?;
    let o = evaluate(&cfg, &model, 1.0)?;
    Ok((o, start.elapsed()))
}

fn criterion_9(o: &srrw::runner::CheckOutcome, elapsed: Duration) -> Outcome {
    let cf = o
        .corridor_feasibility
        .as_ref()
        .ok_or_else(|| srrw::Error::InsufficientData("no corridor feasibility".into()))?;
    let premise = cf.low.viable && cf.high.safe;
    let min_inside = o.corridor.iter().map(|s| s.inside_fraction).fold(1.0, f64::min);
    let all_returned = o.corridor.iter().all(|s| s.all_returned());
    let means: Vec<f64> = o.corridor.iter().filter_map(|s| s.mean_return_blocks).collect();
    let centre = means.iter().sum::<f64>() / means.len().max(1) as f64;
    let spread = means.iter().map(|m| (m / centre - 1.0).abs()).fold(0.0, f64::max);
    let excursions: usize = o.corridor.iter().map(|s| s.excursions.len()).sum();
    let censored: usize = o.corridor.iter().map(|s| s.excursions.iter().filter(|e| e.censored).count()).sum();
    let ok = premise
        && o.corridor.len() as u64 == CORRIDOR_SEEDS
        && means.len() as u64 == CORRIDOR_SEEDS
        && min_inside >= CORRIDOR_INSIDE
        && all_returned
        && spread <= CORRIDOR_RETURN_SPREAD
        && elapsed < CORRIDOR_BUDGET;
    Ok((
        ok,
        format!(
            "(V) low margin {:+.4}, (S) high margin {:+.4}; min inside fraction {min_inside:.3} (tol {CORRIDOR_INSIDE}); \
             {excursions} excursions, all returned: {all_returned} ({censored} open at horizon); mean return {centre:.3} blocks, \
             max deviation {:.1}% (tol {:.0}%); {elapsed:.1?}",
            cf.eta_in,
            cf.eta_out,
            100.0 * spread,
            100.0 * CORRIDOR_RETURN_SPREAD
        ),
    ))
}

fn criterion_10(o: &srrw::runner::CheckOutcome) -> Outcome {
    let d = o.drift.as_ref().ok_or_else(|| srrw::Error::InsufficientData("no drift report".into()))?;
    let agreement = d.agreement().unwrap_or(0.0);
    Ok((
        d.sign_checked >= DRIFT_MIN_BLOCKS && agreement >= DRIFT_AGREEMENT,
        format!(
            "B = {}: {} blocks with Z >= {}, {} sign-checked (tol {DRIFT_MIN_BLOCKS}), agreement {agreement:.3} (tol {DRIFT_AGREEMENT}), \
             c1 proxy {:.3}",
            d.block_length,
            d.rows.len(),
            d.z_min,
            d.sign_checked,
            d.c1_proxy
        ),
    ))
}

fn criterion_11() -> Outcome {
    let (g, _) = generators::connected_erdos_renyi(20, 0.3, 11, 100)?;
    let k = TransitionKernel::lazy(g, 0.5)?;
    let t_mix = mixing_profile(&k, 200)?.t_mix(0.25)? as u64;
    let mut passed = 0;
    for trial in 0..OCCUPANCY_TRIALS {
        if occupancy_check(&k, OCCUPANCY_TOKENS, 10 * t_mix, 1, 1100 + trial, 0)?.p_value > OCCUPANCY_ALPHA {
            passed += 1;
        }
    }
    let rate = passed as f64 / OCCUPANCY_TRIALS as f64;
    let at_zero = occupancy_check(&k, OCCUPANCY_TOKENS, 0, 1, 9, 0)?.p_value;
    let rejects = at_zero <= OCCUPANCY_ALPHA;
    Ok((
        rate >= OCCUPANCY_PASS_RATE && rejects,
        format!(
            "t = 10 T_mix = {}: {passed}/{OCCUPANCY_TRIALS} trials with p > {OCCUPANCY_ALPHA} (tol {OCCUPANCY_PASS_RATE}); \
             t = 0 p = {at_zero:.2e}, rejected: {rejects}",
            10 * t_mix
        ),
    ))
}

fn criterion_12() -> Outcome {
    let sub = gw_baseline(OffspringLaw::Poisson { mean: 0.9 }, GW_GENERATIONS, GW_REPLICAS, 12, GW_CAP)?;
    let law = OffspringLaw::Poisson { mean: 1.5 };
    let sup = gw_baseline(law, GW_GENERATIONS, GW_REPLICAS, 13, GW_CAP)?;
    let oracle = 1.0 - extinction_probability(&law);
    let z = (sup.survival_fraction() - oracle).abs() / sup.standard_error();
    Ok((
        sub.extinction_fraction() >= EXTINCT_FRACTION && z <= GW_SE,
        format!(
            "mean 0.9: extinct {:.4} (tol {EXTINCT_FRACTION}); mean 1.5: survival {:.4} vs oracle {oracle:.4}, {z:.2} SE (tol {GW_SE})",
            sub.extinction_fraction(),
            sup.survival_fraction()
        ),
    ))
}

fn report(id: u32, name: &str, outcome: Outcome, failures: &mut Vec<u32>) {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("[{}] {id:2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        failures.push(id);
    }
}

fn main() {
    let mut failures = Vec::new();
    report(1, "stationary law", criterion_1(), &mut failures);

    let start = Instant::now();
    let shared = (|| -> srrw::Result<Shared> {
        let graphs = kac_graphs()?;
        let samples: Vec<_> = graphs.iter().enumerate().map(|(i, (_, k))| samples_for(k, KAC_SAMPLES, 100 * i as u64)).collect::<srrw::Result<_>>()?;
        let mut models = Vec::new();
        for ((name, k), s) in graphs.iter().zip(&samples) {
            models.push((*name, "doeblin", doeblin_constants(k)?));
            models.push((*name, "fit", fit_constants(s, k.stationary(), FIT_DELTA)?));
        }
        Ok(Shared { graphs, samples, models })
    })();
    let sampling = start.elapsed();
    match shared {
        Ok(shared) => {
            let kac = criterion_2(&shared).map(|(ok, d)| (ok && sampling < KAC_BUDGET, format!("{d}, {sampling:.2?}")));
            report(2, "Kac identity", kac, &mut failures);
            report(3, "envelope sandwich", criterion_3(&shared), &mut failures);
            report(4, "Laplace envelope shape", criterion_4(&shared), &mut failures);
            report(5, "A_eff round trip", criterion_5(&shared), &mut failures);
        }
        Err(e) => {
            for (id, name) in [(2, "Kac identity"), (3, "envelope sandwich"), (4, "Laplace envelope shape"), (5, "A_eff round trip")] {
                report(id, name, Err(srrw::Error::InsufficientData(e.to_string())), &mut failures);
            }
        }
    }

    report(6, "trap decay", criterion_6(), &mut failures);
    report(7, "extinction necessity", criterion_7(), &mut failures);
    report(8, "explosion necessity", criterion_8(), &mut failures);
    match corridor_outcome() {
        Ok((o, elapsed)) => {
            report(9, "corridor recurrence", criterion_9(&o, elapsed), &mut failures);
            report(10, "block drift agreement", criterion_10(&o), &mut failures);
        }
        Err(e) => {
            let msg = e.to_string();
            report(9, "corridor recurrence", Err(srrw::Error::InsufficientData(msg.clone())), &mut failures);
            report(10, "block drift agreement", Err(srrw::Error::InsufficientData(msg)), &mut failures);
        }
    }
    report(11, "multinomial occupancy", criterion_11(), &mut failures);
    report(12, "Galton-Watson baselines", criterion_12(), &mut failures);

    if failures.is_empty() {
        println!("acceptance: 12/12 criteria pass");
    } else {
        println!("acceptance: {} of 12 criteria failed: {failures:?}", failures.len());
        std::process::exit(1);
    }
}
