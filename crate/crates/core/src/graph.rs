//! Finite undirected graphs: construction, validation, text/JSON formats and
//! the standard generators.
//!
//! A [`Graph`] is always connected, loop-free and free of duplicate edges.
//! Laziness is a property of the walk, not of the graph, so self-loops are
//! rejected here and added later by [`crate::kernel::TransitionKernel`].

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected edge stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<Edge>,
    weighted: bool,
    /// `(neighbor, weight)` per node; weight is 1 for unweighted graphs.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    /// Builds an unweighted graph.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges = edges.into_iter().map(|(u, v)| Edge { u, v, weight: None }).collect();
        Self::build(node_count, edges, false)
    }

    /// Builds an edge-weighted graph. Every weight must be finite and strictly
    /// positive; zero-weight edges are rejected because they make connectivity
    /// ambiguous.
    pub fn weighted(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let edges = edges.into_iter().map(|(u, v, w)| Edge { u, v, weight: Some(w) }).collect();
        Self::build(node_count, edges, true)
    }

    fn build(node_count: usize, raw: Vec<Edge>, weighted: bool) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::Structure(format!(
                "a walk needs at least 2 nodes, got {node_count}"
            )));
        }
        let mut seen = HashSet::with_capacity(raw.len());
        let mut edges = Vec::with_capacity(raw.len());
        let mut adjacency = vec![Vec::new(); node_count];
        for e in raw {
            if e.u >= node_count || e.v >= node_count {
                return Err(Error::Structure(format!(
                    "edge ({}, {}) references a node outside 0..{node_count}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::Structure(format!("self-loop at node {}", e.u)));
            }
            let (u, v) = if e.u < e.v { (e.u, e.v) } else { (e.v, e.u) };
            if !seen.insert((u, v)) {
                return Err(Error::Structure(format!("duplicate edge ({u}, {v})")));
            }
            let w = match (weighted, e.weight) {
                (true, Some(w)) => {
                    if !w.is_finite() || w <= 0.0 {
                        return Err(Error::InvalidWeights(format!(
                            "edge ({u}, {v}) has weight {w}; weights must be finite and > 0"
                        )));
                    }
                    w
                }
                (true, None) => {
                    return Err(Error::InvalidWeights(format!("edge ({u}, {v}) has no weight")))
                }
                (false, _) => 1.0,
            };
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
            edges.push(Edge { u, v, weight: weighted.then_some(w) });
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        let graph = Graph { node_count, edges, weighted, adjacency };
        let components = graph.components();
        if components.len() > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Total incident weight `w_u` (the degree for unweighted graphs).
    pub fn strength(&self, u: usize) -> f64 {
        self.adjacency[u].iter().map(|&(_, w)| w).sum()
    }

    /// Nodes of degree one, where a fork cannot reach two distinct neighbors.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.node_count).filter(|&u| self.degree(u) == 1).collect()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.node_count];
        let mut out = Vec::new();
        for start in 0..self.node_count {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut i = 0;
            while i < members.len() {
                let x = members[i];
                i += 1;
                for &(y, _) in &self.adjacency[x] {
                    if label[y] == usize::MAX {
                        label[y] = id;
                        members.push(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Parses the plain-text edge list format: one `u v` or `u v w` per line,
    /// 0-indexed. Blank lines and `#` comments are ignored. An optional
    /// `# nodes: N` header fixes the node count (otherwise `max id + 1`).
    /// Lines must be uniformly weighted or uniformly unweighted.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut declared_nodes = None;
        let mut rows: Vec<(usize, usize, Option<f64>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("nodes:") {
                    let n = n.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: line_no,
                        reason: format!("bad node count: {e}"),
                    })?;
                    declared_nodes = Some(n);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("expected `u v [w]`, got {} fields", fields.len()),
                });
            }
            let node = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    reason: format!("bad node id `{s}`: {e}"),
                })
            };
            let u = node(fields[0])?;
            let v = node(fields[1])?;
            let w = match fields.get(2) {
                Some(s) => Some(s.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    reason: format!("bad weight `{s}`: {e}"),
                })?),
                None => None,
            };
            if let Some(&(_, _, first_w)) = rows.first() {
                if first_w.is_some() != w.is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: "mixed weighted and unweighted lines".into(),
                    });
                }
            }
            rows.push((u, v, w));
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 0, reason: "edge list contains no edges".into() });
        }
        let max_id = rows.iter().map(|&(u, v, _)| u.max(v)).max().unwrap_or(0);
        let n = declared_nodes.unwrap_or(max_id + 1);
        if rows[0].2.is_some() {
            Self::weighted(n, rows.into_iter().map(|(u, v, w)| (u, v, w.unwrap_or(0.0))))
        } else {
            Self::new(n, rows.into_iter().map(|(u, v, _)| (u, v)))
        }
    }

    /// Writes the edge-list format, with a `# nodes: N` header so isolated
    /// trailing nodes round-trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# nodes: {}\n", self.node_count);
        for e in &self.edges {
            match e.weight {
                Some(w) => writeln!(out, "{} {} {}", e.u, e.v, w),
                None => writeln!(out, "{} {}", e.u, e.v),
            }
            .expect("writing to a String");
        }
        out
    }

    /// Parses `{"nodes": N, "edges": [[u, v], [u, v, w], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        doc.into_graph()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphDoc::from(self)).expect("graph serialises")
    }
}

/// JSON document form of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: usize,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeDoc {
    Weighted(usize, usize, f64),
    Plain(usize, usize),
}

impl GraphDoc {
    pub fn into_graph(self) -> Result<Graph> {
        let weighted = self.edges.iter().filter(|e| matches!(e, EdgeDoc::Weighted(..))).count();
        if weighted == 0 {
            Graph::new(
                self.nodes,
                self.edges.into_iter().map(|e| match e {
                    EdgeDoc::Plain(u, v) | EdgeDoc::Weighted(u, v, _) => (u, v),
                }),
            )
        } else if weighted == self.edges.len() {
            Graph::weighted(
                self.nodes,
                self.edges.into_iter().map(|e| match e {
                    EdgeDoc::Weighted(u, v, w) => (u, v, w),
                    EdgeDoc::Plain(u, v) => (u, v, 0.0),
                }),
            )
        } else {
            Err(Error::InvalidWeights("mixed weighted and unweighted edges".into()))
        }
    }
}

impl From<&Graph> for GraphDoc {
    fn from(g: &Graph) -> Self {
        GraphDoc {
            nodes: g.node_count,
            edges: g
                .edges
                .iter()
                .map(|e| match e.weight {
                    Some(w) => EdgeDoc::Weighted(e.u, e.v, w),
                    None => EdgeDoc::Plain(e.u, e.v),
                })
                .collect(),
        }
    }
}

/// Standard graph families.
pub mod generators {
    use super::*;

    pub fn path(n: usize) -> Result<Graph> {
        Graph::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(Error::param("n", "a cycle needs at least 3 nodes"));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Graph> {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// Star with centre 0.
    pub fn star(n: usize) -> Result<Graph> {
        Graph::new(n, (1..n).map(|i| (0, i)))
    }

    /// Erdős–Rényi G(n, p). Pairs are visited in lexicographic order with a
    /// ChaCha8 stream, so a seed fixes the graph byte-for-byte. Disconnected
    /// draws are returned as [`Error::Disconnected`].
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("edge probability {p} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, edges)
    }

    /// First connected G(n, p) draw among seeds `seed, seed + 1, ...`.
    /// Returns the graph together with the seed that produced it.
    pub fn connected_erdos_renyi(
        n: usize,
        p: f64,
        seed: u64,
        max_attempts: u64,
    ) -> Result<(Graph, u64)> {
        let mut last = None;
        for k in 0..max_attempts {
            match erdos_renyi(n, p, seed.wrapping_add(k)) {
                Ok(g) => return Ok((g, seed.wrapping_add(k))),
                Err(e @ Error::Disconnected { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::param("max_attempts", "must be at least 1")))
    }
}
