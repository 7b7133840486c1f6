//! Stationary law and (lazy) transition kernels of simple and weighted walks.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Holding probability used when a configuration does not specify one.
pub const DEFAULT_LAZINESS: f64 = 0.5;

/// Largest graph for which dense `n x n` computations are allowed.
pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
}

impl StationaryDistribution {
    /// Wraps an explicit probability vector. Entries must be strictly
    /// positive and sum to one.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::param("pi", "entries must be finite and strictly positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("pi", format!("entries sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, u: usize) -> f64 {
        self.probs[u]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Stationary expectation `sum_u pi(u) f(u)`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(u, &p)| p * f(u)).sum()
    }
}

/// Closed-form stationary law: `deg(u) / 2|E|`, or `w_u / sum_x w_x` for
/// weighted graphs.
pub fn stationary_distribution(g: &Graph) -> StationaryDistribution {
    let strengths: Vec<f64> = (0..g.node_count()).map(|u| g.strength(u)).collect();
    let total: f64 = strengths.iter().sum();
    StationaryDistribution { probs: strengths.into_iter().map(|w| w / total).collect() }
}

/// Row-stochastic kernel `P = eps I + (1 - eps) P'` where `P'` is the simple
/// or weighted walk on the graph.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    graph: Arc<Graph>,
    laziness: f64,
    pi: StationaryDistribution,
    /// Cumulative `P'(u, .)` over `graph.neighbors(u)`, for sampling.
    cumulative: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn lazy(graph: impl Into<Arc<Graph>>, laziness: f64) -> Result<Self> {
        if !(laziness > 0.0 && laziness < 1.0) {
            return Err(Error::param("laziness", format!("{laziness} is outside (0, 1)")));
        }
        let graph = graph.into();
        let pi = stationary_distribution(&graph);
        let cumulative = (0..graph.node_count())
            .map(|u| {
                let total = graph.strength(u);
                let mut acc = 0.0;
                graph
                    .neighbors(u)
                    .iter()
                    .map(|&(_, w)| {
                        acc += w / total;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { graph, laziness, pi, cumulative })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<Graph> {
        Arc::clone(&self.graph)
    }

    pub fn laziness(&self) -> f64 {
        self.laziness
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn stationary(&self) -> &StationaryDistribution {
        &self.pi
    }

    /// Entry of the non-lazy walk `P'`.
    pub fn base_prob(&self, u: usize, v: usize) -> f64 {
        match self.graph.neighbors(u).binary_search_by_key(&v, |&(x, _)| x) {
            Ok(i) => self.graph.neighbors(u)[i].1 / self.graph.strength(u),
            Err(_) => 0.0,
        }
    }

    /// Entry of the lazy kernel `P`.
    pub fn prob(&self, u: usize, v: usize) -> f64 {
        let hold = if u == v { self.laziness } else { 0.0 };
        hold + (1.0 - self.laziness) * self.base_prob(u, v)
    }

    /// Non-zero entries of row `u` of `P` as `(column, probability)`.
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let total = self.graph.strength(u);
        let move_mass = 1.0 - self.laziness;
        std::iter::once((u, self.laziness))
            .chain(self.graph.neighbors(u).iter().map(move |&(v, w)| (v, move_mass * w / total)))
    }

    /// `alpha^T P` for a row vector `alpha`.
    pub fn step_distribution(&self, alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; alpha.len()];
        for (u, &a) in alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (v, p) in self.row(u) {
                out[v] += a * p;
            }
        }
        out
    }

    /// The lazy kernel as a dense matrix, refused above `cap` nodes.
    pub fn dense(&self, cap: usize) -> Result<DenseMatrix> {
        let n = self.node_count();
        if n > cap {
            return Err(Error::TooLargeForDense { n, cap });
        }
        let mut m = DenseMatrix::zeros(n);
        for u in 0..n {
            for (v, p) in self.row(u) {
                m[(u, v)] += p;
            }
        }
        Ok(m)
    }

    /// Successive powers `P^1, P^2, ...` (dense, refused above `cap`).
    pub fn powers(&self, cap: usize) -> Result<KernelPowers<'_>> {
        let n = self.node_count();
        if n > cap {
            return Err(Error::TooLargeForDense { n, cap });
        }
        Ok(KernelPowers { kernel: self, current: DenseMatrix::identity(n) })
    }

    /// Largest `|sum_v P(u, v) - 1|` over the rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.node_count())
            .map(|u| (self.row(u).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|pi(u) P(u, v) - pi(v) P(v, u)|` over the edges.
    pub fn max_detailed_balance_error(&self) -> f64 {
        self.graph
            .edges()
            .iter()
            .map(|e| {
                (self.pi.get(e.u) * self.prob(e.u, e.v) - self.pi.get(e.v) * self.prob(e.v, e.u))
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// One move of the lazy walk from `u`.
    pub fn sample_next<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.laziness {
            u
        } else {
            self.sample_neighbor(u, rng)
        }
    }

    /// One move of the non-lazy walk `P'` from `u`.
    pub fn sample_neighbor<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        let nbrs = self.graph.neighbors(u);
        if !self.graph.is_weighted() {
            return nbrs[rng.random_range(0..nbrs.len())].0;
        }
        let cum = &self.cumulative[u];
        let r = rng.random::<f64>();
        let i = cum.partition_point(|&c| c <= r).min(nbrs.len() - 1);
        nbrs[i].0
    }

    /// Destinations of a forked pair leaving `u`: two distinct neighbors drawn
    /// from `P'(u, .)` without replacement. A degree-one node sends both
    /// copies along its single edge.
    pub fn sample_fork_targets<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> (usize, usize) {
        let nbrs = self.graph.neighbors(u);
        if nbrs.len() == 1 {
            return (nbrs[0].0, nbrs[0].0);
        }
        if !self.graph.is_weighted() {
            let i = rng.random_range(0..nbrs.len());
            let mut j = rng.random_range(0..nbrs.len() - 1);
            if j >= i {
                j += 1;
            }
            return (nbrs[i].0, nbrs[j].0);
        }
        let first = self.sample_neighbor(u, rng);
        let excluded = nbrs.iter().find(|&&(v, _)| v == first).map(|&(_, w)| w).unwrap_or(0.0);
        let mut r = rng.random::<f64>() * (self.graph.strength(u) - excluded);
        let mut second = first;
        for &(v, w) in nbrs {
            if v == first {
                continue;
            }
            second = v;
            if r < w {
                break;
            }
            r -= w;
        }
        (first, second)
    }
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `self * P`, using the sparsity of `P`.
    pub fn mul_kernel(&self, k: &TransitionKernel) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for x in 0..n {
            let src = &self.data[x * n..(x + 1) * n];
            let dst = &mut out.data[x * n..(x + 1) * n];
            for (y, &m) in src.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for (z, p) in k.row(y) {
                    dst[z] += m * p;
                }
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Iterator over `P^t` for `t = 1, 2, ...`.
pub struct KernelPowers<'a> {
    kernel: &'a TransitionKernel,
    current: DenseMatrix,
}

impl Iterator for KernelPowers<'_> {
    type Item = DenseMatrix;
    fn next(&mut self) -> Option<DenseMatrix> {
        self.current = self.current.mul_kernel(self.kernel);
        Some(self.current.clone())
    }
}
