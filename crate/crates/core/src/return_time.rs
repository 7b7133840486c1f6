//! First-return times of a single walk, their empirical tails, and the
//! per-node age clock used by the controller.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;

/// Per-sample step cap guarding against pathological configurations.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// Two-sided 99% normal quantile used for tail confidence intervals.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Every sample is a fresh walk started at the node.
    #[default]
    Restart,
    /// Consecutive excursions of one long walk (i.i.d. by the strong Markov
    /// property, but consumes the RNG differently).
    LongTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeSample {
    pub node: usize,
    samples: Vec<u64>,
    #[serde(skip)]
    sorted: Vec<u64>,
}

impl ReturnTimeSample {
    pub fn new(node: usize, samples: Vec<u64>) -> Result<Self> {
        if samples.contains(&0) {
            return Err(Error::param("samples", "return times are at least 1"));
        }
        let mut sorted = samples.clone();
        sorted.sort_unstable();
        Ok(Self { node, samples, sorted })
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn max(&self) -> u64 {
        self.sorted.last().copied().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|&x| x as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        let n = self.samples.len() as f64;
        let m = self.mean();
        let var = self.samples.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    /// Empirical `Pr{T >= age}`.
    pub fn tail_at(&self, age: u64) -> f64 {
        let below = self.sorted.partition_point(|&x| x < age);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }
}

/// Draws `n_samples` return times to `u`. Deterministic given `seed`.
pub fn sample_return_times(
    k: &TransitionKernel,
    u: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ReturnTimeSample> {
    sample_return_times_with(k, u, n_samples, seed, SamplingMode::Restart, DEFAULT_STEP_CAP)
}

pub fn sample_return_times_with(
    k: &TransitionKernel,
    u: usize,
    n_samples: usize,
    seed: u64,
    mode: SamplingMode,
    step_cap: u64,
) -> Result<ReturnTimeSample> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    if u >= k.node_count() {
        return Err(Error::param("node", format!("{u} is not a node")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    match mode {
        SamplingMode::Restart => {
            for _ in 0..n_samples {
                samples.push(one_return(k, u, step_cap, &mut rng)?);
            }
        }
        SamplingMode::LongTrajectory => {
            // A single walk that never restarts; each return to u closes one
            // excursion and starts the next at u.
            let mut x = u;
            let mut steps = 0u64;
            while samples.len() < n_samples {
                x = k.sample_next(x, &mut rng);
                steps += 1;
                if x == u {
                    samples.push(steps);
                    steps = 0;
                } else if steps >= step_cap {
                    return Err(Error::StepCapExceeded { node: u, cap: step_cap });
                }
            }
        }
    }
    ReturnTimeSample::new(u, samples)
}

fn one_return(k: &TransitionKernel, u: usize, cap: u64, rng: &mut ChaCha8Rng) -> Result<u64> {
    let mut x = u;
    for t in 1..=cap {
        x = k.sample_next(x, rng);
        if x == u {
            return Ok(t);
        }
    }
    Err(Error::StepCapExceeded { node: u, cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub age: u64,
    pub tail: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Empirical tail `Pr{T >= A}` with Wilson 99% intervals at each requested
/// age. Ages must be ascending and at least 1.
pub fn empirical_tail(s: &ReturnTimeSample, ages: &[u64]) -> Result<Vec<TailPoint>> {
    if s.count() == 0 {
        return Err(Error::InsufficientData(format!("node {} has no samples", s.node)));
    }
    if ages.first().is_some_and(|&a| a < 1) {
        return Err(Error::param("ages", "ages start at 1"));
    }
    if ages.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("ages", "ages must be sorted ascending"));
    }
    let n = s.count() as f64;
    Ok(ages
        .iter()
        .map(|&age| {
            let tail = s.tail_at(age);
            let (ci_low, ci_high) = wilson_interval(tail, n, Z_99);
            TailPoint { age, tail, ci_low, ci_high }
        })
        .collect())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// CSV rows `node,A,tail,ci_low,ci_high` (with header).
pub fn tails_to_csv(rows: &[(usize, Vec<TailPoint>)]) -> String {
    let mut out = String::from("node,A,tail,ci_low,ci_high\n");
    for (node, points) in rows {
        for p in points {
            writeln!(out, "{},{},{},{},{}", node, p.age, p.tail, p.ci_low, p.ci_high)
                .expect("writing to a String");
        }
    }
    out
}

/// Exact `Pr_u{T_u^+ >= A}` for `A = 1..=max_age` via the walk killed at `u`.
/// This is the analytic counterpart of [`sample_return_times`].
pub fn exact_return_tail(k: &TransitionKernel, u: usize, max_age: u64) -> Vec<f64> {
    let n = k.node_count();
    // mass[x] = Pr{X_s = x, no return to u in 1..=s}, for x != u.
    let mut mass = vec![0.0; n];
    for (v, p) in k.row(u) {
        if v != u {
            mass[v] += p;
        }
    }
    let mut tails = Vec::with_capacity(max_age as usize);
    if max_age == 0 {
        return tails;
    }
    tails.push(1.0);
    for _ in 2..=max_age {
        tails.push(mass.iter().sum());
        let mut next = vec![0.0; n];
        for (x, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (y, p) in k.row(x) {
                if y != u {
                    next[y] += m * p;
                }
            }
        }
        mass = next;
    }
    tails
}

/// Last-visit bookkeeping: `A_u(t) = t - L_u(t)`.
///
/// Nodes that have never been visited behave as if last visited at time
/// `-initial_age`, so the age of an unvisited node at time `t` is
/// `t + initial_age`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeClock {
    last_visit: Vec<i64>,
    visited: Vec<bool>,
    now: u64,
}

impl AgeClock {
    pub fn new(node_count: usize, initial_age: u64) -> Self {
        Self {
            last_visit: vec![-(initial_age as i64); node_count],
            visited: vec![false; node_count],
            now: 0,
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn last_visit(&self, u: usize) -> Option<u64> {
        self.visited[u].then(|| self.last_visit[u] as u64)
    }

    /// Age of `u` at time `t` without recording a visit.
    pub fn age(&self, u: usize, t: u64) -> u64 {
        (t as i64 - self.last_visit[u]).max(0) as u64
    }

    /// Returns the age seen by a visit at time `t`, then records the visit.
    pub fn update_age(&mut self, u: usize, t: u64) -> Result<u64> {
        if t < self.now {
            return Err(Error::TimeRegression { now: self.now, requested: t });
        }
        let age = self.age(u, t);
        self.record_visit(u, t);
        Ok(age)
    }

    /// Records a visit at time `t >= now` (callers in the engine guarantee
    /// monotone time).
    pub(crate) fn record_visit(&mut self, u: usize, t: u64) {
        self.last_visit[u] = t as i64;
        self.visited[u] = true;
        self.now = self.now.max(t);
    }
}
