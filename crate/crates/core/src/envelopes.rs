//! Exponential return-tail envelopes and their stationary Laplace averages.
//!
//! For every node `u` an [`EnvelopeModel`] holds constants `c_minus(u)` and
//! `c_plus(u)` such that
//!
//! ```text
//! exp(-c_plus(u) A pi(u)) <= Pr_u{T_u^+ >= A} <= exp(-c_minus(u) A pi(u))
//! ```
//!
//! on the model's validity range, and the envelopes
//! `L(A) = sum_u pi(u) exp(-c(u) A pi(u))` built from either constant.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{StationaryDistribution, TransitionKernel, DEFAULT_DENSE_CAP};
use crate::mixing::mixing_profile;
use crate::return_time::{wilson_interval, ReturnTimeSample, Z_99};

/// Default multiplicative margin applied around fitted slopes.
pub const DEFAULT_DELTA_FIT: f64 = 0.1;

/// Minimum return-time samples per node accepted by [`fit_constants`].
pub const MIN_FIT_SAMPLES: usize = 1_000;

const BISECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSource {
    DoeblinTheoretical,
    EmpiricalFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSign {
    /// Built from `c_plus`: the smaller envelope.
    Plus,
    /// Built from `c_minus`: the larger envelope.
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeblinNode {
    pub t_u: usize,
    pub theta_u: f64,
}

/// Construction record of the theoretical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeblinRecord {
    pub t0: usize,
    pub eps0: f64,
    pub per_node: Vec<DoeblinNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitNode {
    /// Least-squares slope of `-ln tail` against `A pi(u)`.
    pub slope: f64,
    pub c_minus_raw: f64,
    pub c_plus_raw: f64,
    /// Largest observed return time; the sandwich is enforced on `2..=a_max`.
    pub a_max: u64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub delta: f64,
    pub per_node: Vec<FitNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeModel {
    pub source: EnvelopeSource,
    pi: Vec<f64>,
    c_minus: Vec<f64>,
    c_plus: Vec<f64>,
    pub doeblin: Option<DoeblinRecord>,
    pub fit: Option<FitRecord>,
}

impl EnvelopeModel {
    pub fn new(
        source: EnvelopeSource,
        pi: &StationaryDistribution,
        c_minus: Vec<f64>,
        c_plus: Vec<f64>,
    ) -> Result<Self> {
        let n = pi.len();
        if c_minus.len() != n || c_plus.len() != n {
            return Err(Error::param("c", format!("expected {n} constants per sign")));
        }
        for (u, (&a, &b)) in c_minus.iter().zip(&c_plus).enumerate() {
            if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                return Err(Error::param(
                    "c",
                    format!("node {u}: constants must be finite and positive (c_minus={a}, c_plus={b})"),
                ));
            }
        }
        Ok(Self { source, pi: pi.probs().to_vec(), c_minus, c_plus, doeblin: None, fit: None })
    }

    /// Model with `c_minus = c_plus = c`, so both envelopes coincide.
    pub fn symmetric(pi: &StationaryDistribution, c: Vec<f64>) -> Result<Self> {
        Self::new(EnvelopeSource::EmpiricalFit, pi, c.clone(), c)
    }

    pub fn node_count(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn c_minus(&self) -> &[f64] {
        &self.c_minus
    }

    pub fn c_plus(&self) -> &[f64] {
        &self.c_plus
    }

    pub fn constants(&self, sign: EnvelopeSign) -> &[f64] {
        match sign {
            EnvelopeSign::Plus => &self.c_plus,
            EnvelopeSign::Minus => &self.c_minus,
        }
    }

    /// `exp(-c_plus A pi)`, the lower bound on the tail of node `u`.
    pub fn tail_lower(&self, u: usize, age: f64) -> f64 {
        (-self.c_plus[u] * age * self.pi[u]).exp()
    }

    /// `exp(-c_minus A pi)`, the upper bound on the tail of node `u`.
    pub fn tail_upper(&self, u: usize, age: f64) -> f64 {
        (-self.c_minus[u] * age * self.pi[u]).exp()
    }

    /// Smallest ages from which the upper and lower tail bounds of `u` are
    /// claimed: `(2 t0, 2 t_u)` for Doeblin constants, `(2, 2)` for fits.
    pub fn validity_start(&self, u: usize) -> (u64, u64) {
        match &self.doeblin {
            Some(d) => (2 * d.t0 as u64, 2 * d.per_node[u].t_u as u64),
            None => (2, 2),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row {
            u: usize,
            pi: f64,
            c_minus: f64,
            c_plus: f64,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            source: EnvelopeSource,
            per_node: Vec<Row>,
            t0: Option<usize>,
            eps0: Option<f64>,
            doeblin: &'a Option<DoeblinRecord>,
            fit: &'a Option<FitRecord>,
        }
        let doc = Doc {
            source: self.source,
            per_node: (0..self.node_count())
                .map(|u| Row { u, pi: self.pi[u], c_minus: self.c_minus[u], c_plus: self.c_plus[u] })
                .collect(),
            t0: self.doeblin.as_ref().map(|d| d.t0),
            eps0: self.doeblin.as_ref().map(|d| d.eps0),
            doeblin: &self.doeblin,
            fit: &self.fit,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// `L(A) = sum_u pi(u) exp(-c(u) A pi(u))`.
pub fn laplace(model: &EnvelopeModel, sign: EnvelopeSign, age: f64) -> f64 {
    if age == 0.0 {
        return 1.0;
    }
    let c = model.constants(sign);
    model.pi.iter().zip(c).map(|(&p, &c)| p * (-c * age * p).exp()).sum()
}

/// `max_u 1 / (c(u) pi(u))`, the slowest exponential scale in the envelope.
/// `L(20 * decay_scale) < e^{-20}`.
pub fn decay_scale(model: &EnvelopeModel, sign: EnvelopeSign) -> f64 {
    let c = model.constants(sign);
    model.pi.iter().zip(c).map(|(&p, &c)| 1.0 / (c * p)).fold(0.0, f64::max)
}

/// Log-spaced age grid on `[1, a_max]` preceded by `A = 0`.
pub fn age_grid(a_max: f64, points: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    if points < 2 || a_max <= 1.0 {
        grid.push(a_max.max(1.0));
        return grid;
    }
    let top = a_max.ln();
    grid.extend((0..points).map(|i| (top * i as f64 / (points - 1) as f64).exp()));
    grid
}

/// CSV `A,L_plus,L_minus` over `ages`.
pub fn envelope_curve_csv(model: &EnvelopeModel, ages: &[f64]) -> String {
    let mut out = String::from("A,L_plus,L_minus\n");
    for &a in ages {
        let lp = laplace(model, EnvelopeSign::Plus, a);
        let lm = laplace(model, EnvelopeSign::Minus, a);
        writeln!(out, "{a},{lp},{lm}").expect("writing to a String");
    }
    out
}

/// Theoretical constants from the uniform minorization
/// `P^{t0}(x, y) >= eps0 pi(y)`:
/// `c_minus = eps0 / (2 t0)` for every node and `c_plus(u) = 2 theta_u / t_u`
/// with `t_u = t_mix(min(1/8, pi(u)/2))` and
/// `theta_u = t_u + sum_{s=1}^{t_u} tv(s) / pi(u)`.
pub fn doeblin_constants(k: &TransitionKernel) -> Result<EnvelopeModel> {
    doeblin_constants_with_cap(k, 50 * k.node_count())
}

pub fn doeblin_constants_with_cap(k: &TransitionKernel, t0_cap: usize) -> Result<EnvelopeModel> {
    let pi = k.stationary();
    let n = k.node_count();
    let mut found = None;
    for (i, power) in k.powers(DEFAULT_DENSE_CAP)?.enumerate() {
        let t = i + 1;
        if t > t0_cap {
            break;
        }
        let mut ratio = f64::INFINITY;
        for x in 0..n {
            for (y, &p) in power.row(x).iter().enumerate() {
                ratio = ratio.min(p / pi.get(y));
            }
        }
        if ratio > 0.0 {
            found = Some((t, ratio));
            break;
        }
    }
    let (t0, eps0) = found.ok_or(Error::MinorizationNotFound { cap: t0_cap })?;

    let probe = mixing_profile(k, 1)?;
    let tightest = (pi.min() / 2.0).min(0.125);
    let max_t = probe.spectral_bound(tightest) + 1;
    let profile = mixing_profile(k, max_t)?;

    let mut per_node = Vec::with_capacity(n);
    let mut c_plus = Vec::with_capacity(n);
    for u in 0..n {
        let t_u = profile.t_mix((pi.get(u) / 2.0).min(0.125))?.max(1);
        let theta_u = t_u as f64 + profile.tv_sum(t_u) / pi.get(u);
        c_plus.push(2.0 * theta_u / t_u as f64);
        per_node.push(DoeblinNode { t_u, theta_u });
    }
    let c_minus = vec![eps0 / (2.0 * t0 as f64); n];
    let mut model = EnvelopeModel::new(EnvelopeSource::DoeblinTheoretical, pi, c_minus, c_plus)?;
    model.doeblin = Some(DoeblinRecord { t0, eps0, per_node });
    Ok(model)
}

/// Least-squares slope (with intercept) of `-ln tail` against `A pi`, using
/// the points with positive tail.
pub fn fit_rate(pi_u: f64, tail: &[(u64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, t)| *t > 0.0)
        .map(|&(a, t)| (a as f64 * pi_u, -t.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Empirical constants: per node, regress `-ln tail(A)` on `A pi(u)` over the
/// ages whose tail is at least `10 / count`, take `slope (1 -+ delta)`, then
/// widen both until the sandwich holds at every observed age `A >= 2`, over
/// the 99% Wilson interval wherever the tail is at least `10 / count`.
///
/// `A = 1` is excluded because every tail equals 1 there, which no
/// exponential upper bound with positive rate can dominate.
pub fn fit_constants(
    tails: &[ReturnTimeSample],
    pi: &StationaryDistribution,
    delta: f64,
) -> Result<EnvelopeModel> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta_fit", "must lie in [0, 1)"));
    }
    let by_node: HashMap<usize, &ReturnTimeSample> = tails.iter().map(|s| (s.node, s)).collect();
    let n = pi.len();
    let mut c_minus = Vec::with_capacity(n);
    let mut c_plus = Vec::with_capacity(n);
    let mut per_node = Vec::with_capacity(n);
    for u in 0..n {
        let s = by_node
            .get(&u)
            .ok_or_else(|| Error::InsufficientData(format!("no return-time sample for node {u}")))?;
        if s.count() < MIN_FIT_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "node {u} has {} samples, need at least {MIN_FIT_SAMPLES}",
                s.count()
            )));
        }
        let threshold = 10.0 / s.count() as f64;
        let mut fit_points = Vec::new();
        for a in 1..=s.max() {
            let t = s.tail_at(a);
            if t < threshold {
                break;
            }
            fit_points.push((a, t));
        }
        let slope = fit_rate(pi.get(u), &fit_points)
            .filter(|b| b.is_finite() && *b > 0.0)
            .ok_or_else(|| Error::Fit { node: u, reason: "degenerate tail".into() })?;
        let (raw_lo, raw_hi) = (slope * (1.0 - delta), slope * (1.0 + delta));
        let (mut lo, mut hi) = (raw_lo, raw_hi);
        let n_s = s.count() as f64;
        for a in 2..=s.max() {
            let t = s.tail_at(a);
            // Where the tail is well resolved, cover its 99% interval so an
            // independent sample lands inside the sandwich too.
            let (t_lo, t_hi) = if t >= threshold { wilson_interval(t, n_s, Z_99) } else { (t, t) };
            let scale = a as f64 * pi.get(u);
            lo = lo.min(-t_hi.ln() / scale);
            hi = hi.max(-t_lo.ln() / scale);
        }
        if !(lo > 0.0) {
            return Err(Error::Fit { node: u, reason: "tail does not decay below 1".into() });
        }
        c_minus.push(lo);
        c_plus.push(hi);
        per_node.push(FitNode {
            slope,
            c_minus_raw: raw_lo,
            c_plus_raw: raw_hi,
            a_max: s.max(),
            points: fit_points.len(),
        });
    }
    let mut model = EnvelopeModel::new(EnvelopeSource::EmpiricalFit, pi, c_minus, c_plus)?;
    model.fit = Some(FitRecord { delta, per_node });
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichViolation {
    pub node: usize,
    pub age: u64,
    pub tail: f64,
    pub bound: f64,
    pub upper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: Vec<SandwichViolation>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `exp(-c_plus A pi) <= tail(A) <= exp(-c_minus A pi)` for every
/// sample at ages `2..=a_max` restricted to the model's validity range. Each
/// comparison allows `slack_se` binomial standard errors evaluated at the
/// bound.
///
/// Without an explicit `a_max` each node is checked up to the largest age of
/// its fit sample, or of the sample under test when the model is not a fit.
pub fn validate_sandwich(
    model: &EnvelopeModel,
    samples: &[ReturnTimeSample],
    a_max: Option<u64>,
    slack_se: f64,
) -> SandwichReport {
    let mut report = SandwichReport { checked: 0, violations: Vec::new() };
    for s in samples {
        let u = s.node;
        let n = s.count() as f64;
        let (upper_from, lower_from) = model.validity_start(u);
        let top = a_max.unwrap_or_else(|| match &model.fit {
            Some(f) => f.per_node[u].a_max,
            None => s.max(),
        });
        for a in 2..=top {
            let tail = s.tail_at(a);
            let af = a as f64;
            if a >= upper_from {
                let b = model.tail_upper(u, af);
                report.checked += 1;
                if tail > b + slack_se * (b * (1.0 - b) / n).sqrt() {
                    report.violations.push(SandwichViolation { node: u, age: a, tail, bound: b, upper: true });
                }
            }
            if a >= lower_from {
                let b = model.tail_lower(u, af);
                report.checked += 1;
                if tail < b - slack_se * (b * (1.0 - b) / n).sqrt() {
                    report.violations.push(SandwichViolation { node: u, age: a, tail, bound: b, upper: false });
                }
            }
        }
    }
    report
}

/// Interval of effective triggering ages matching a per-visit fork
/// probability `p`: `minus_root` solves `q L_minus(a) = p` and `plus_root`
/// solves `q L_plus(a) = p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AEffInterval {
    pub minus_root: f64,
    pub plus_root: f64,
    /// `p = 0`: no finite age matches; both roots are infinite.
    pub infinite: bool,
}

impl AEffInterval {
    pub fn point(a: f64) -> Self {
        Self { minus_root: a, plus_root: a, infinite: !a.is_finite() }
    }

    pub fn lo(&self) -> f64 {
        self.minus_root.min(self.plus_root)
    }

    pub fn hi(&self) -> f64 {
        self.minus_root.max(self.plus_root)
    }

    pub fn contains(&self, a: f64) -> bool {
        self.lo() <= a && a <= self.hi()
    }
}

/// Inverts `q L(a) = p` for both envelopes by bisection.
pub fn solve_a_eff(model: &EnvelopeModel, q: f64, p_fork: f64) -> Result<AEffInterval> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", format!("must lie in (0, 1], got {q}")));
    }
    if !(p_fork >= 0.0) {
        return Err(Error::param("p_fork", format!("must be nonnegative, got {p_fork}")));
    }
    if p_fork > q {
        return Err(Error::Infeasible(format!("p_fork = {p_fork} exceeds the cap q = {q}")));
    }
    if p_fork == 0.0 {
        return Ok(AEffInterval::point(f64::INFINITY));
    }
    Ok(AEffInterval {
        minus_root: invert(model, EnvelopeSign::Minus, q, p_fork),
        plus_root: invert(model, EnvelopeSign::Plus, q, p_fork),
        infinite: false,
    })
}

fn invert(model: &EnvelopeModel, sign: EnvelopeSign, q: f64, p: f64) -> f64 {
    let f = |a: f64| q * laplace(model, sign, a);
    if f(0.0) <= p {
        return 0.0;
    }
    let mut hi = 1.0;
    while f(hi) >= p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > BISECTION_TOL && hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Idealised mean fork intensity `q sum_u pi(u) Pr{T_u^+ >= A}` with its
/// standard error from the per-node binomial tail estimates.
pub fn fork_intensity(
    pi: &StationaryDistribution,
    tails: &[ReturnTimeSample],
    q: f64,
    age: u64,
) -> Result<(f64, f64)> {
    let by_node: HashMap<usize, &ReturnTimeSample> = tails.iter().map(|s| (s.node, s)).collect();
    let mut value = 0.0;
    let mut var = 0.0;
    for u in 0..pi.len() {
        let s = by_node
            .get(&u)
            .ok_or_else(|| Error::InsufficientData(format!("no tail for node {u}")))?;
        let t = s.tail_at(age);
        value += pi.get(u) * t;
        var += pi.get(u).powi(2) * t * (1.0 - t) / s.count() as f64;
    }
    Ok((q * value, q * var.sqrt()))
}
