//! Capacity graph over the relay network and source-to-sink max-flow.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkState, Scenario};
use crate::radio;

/// Largest node count accepted by the exhaustive cut enumerations.
pub const ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Consecutive nodes of the chain `s, u1, .., uK, d` only.
    Line,
    /// Every node pair.
    Mesh,
}

impl Topology {
    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Topology::Line => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Topology::Mesh => (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect(),
        }
    }
}

/// Symmetric capacity matrix in bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityGraph {
    pub a: DMatrix<f64>,
    pub source: usize,
    pub sink: usize,
}

impl CapacityGraph {
    pub fn new(a: DMatrix<f64>, source: usize, sink: usize) -> Self {
        assert!(a.is_square(), "capacity matrix must be square");
        Self { a, source, sink }
    }

    /// Builds a graph from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], source: usize, sink: usize) -> Self {
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, c) in edges {
            a[(i, j)] = c;
            a[(j, i)] = c;
        }
        Self::new(a, source, sink)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn max_capacity(&self) -> f64 {
        self.a.iter().cloned().fold(0.0, f64::max)
    }

    /// Total capacity leaving `set` (membership mask).
    pub fn cut_capacity(&self, set: &[bool]) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        for i in (0..n).filter(|&i| set[i]) {
            for j in (0..n).filter(|&j| !set[j]) {
                total += self.a[(i, j)];
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub value: f64,
    /// Antisymmetric: `flow[(i, j)] = -flow[(j, i)]`.
    pub flow: DMatrix<f64>,
    /// Source side of a minimum cut.
    pub cut_set: Vec<usize>,
}

impl FlowResult {
    /// Edges `(i, j)` crossing the certifying cut with positive capacity.
    pub fn cut_edges(&self, g: &CapacityGraph) -> Vec<(usize, usize)> {
        let mut inside = vec![false; g.n()];
        for &i in &self.cut_set {
            inside[i] = true;
        }
        let mut edges = Vec::new();
        for i in 0..g.n() {
            for j in 0..g.n() {
                if inside[i] && !inside[j] && g.a[(i, j)] > 0.0 {
                    edges.push((i.min(j), i.max(j)));
                }
            }
        }
        edges.sort_unstable();
        edges
    }
}

/// Average of the forward and backward rates between relay-network nodes.
pub fn edge_capacity(i: usize, j: usize, state: &NetworkState, scenario: &Scenario) -> Result<f64> {
    let sir_ij = radio::sir(i, j, state, scenario)?;
    let sir_ji = radio::sir(j, i, state, scenario)?;
    Ok(capacity_from_sirs(sir_ij, sir_ji, scenario.channel.bandwidth_hz))
}

pub fn capacity_from_sirs(sir_ij: f64, sir_ji: f64, bandwidth_hz: f64) -> f64 {
    0.5 * bandwidth_hz * ((1.0 + sir_ij).log2() + (1.0 + sir_ji).log2())
}

pub fn build_graph(state: &NetworkState, scenario: &Scenario) -> Result<CapacityGraph> {
    let n = scenario.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    for (i, j) in scenario.topology.edges(n) {
        let c = edge_capacity(i, j, state, scenario)?;
        a[(i, j)] = c;
        a[(j, i)] = c;
    }
    Ok(CapacityGraph::new(a, scenario.source(), scenario.sink()))
}

/// Generalized degree matrix `D` and Laplacian `L = D - A`.
pub fn degree_laplacian(g: &CapacityGraph) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = g.n();
    let degrees: Vec<f64> = (0..n).map(|i| g.a.row(i).sum()).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(degrees));
    let l = &d - &g.a;
    (d, l)
}

/// Edmonds-Karp (shortest augmenting path) on real capacities; each
/// undirected edge acts as two opposing arcs of capacity `a[i][j]`.
///
/// Residuals at or below `1e-12 * max capacity` are treated as saturated.
pub fn max_flow(g: &CapacityGraph) -> FlowResult {
    let n = g.n();
    let (s, t) = (g.source, g.sink);
    let eps = 1e-12 * g.max_capacity();
    let mut flow = DMatrix::zeros(n, n);
    let residual = |flow: &DMatrix<f64>, u: usize, v: usize| g.a[(u, v)] - flow[(u, v)];

    loop {
        let mut parent = vec![usize::MAX; n];
        parent[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for v in 0..n {
                if parent[v] == usize::MAX && residual(&flow, u, v) > eps {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            let cut_set = (0..n).filter(|&v| parent[v] != usize::MAX).collect();
            let value = (0..n).map(|v| flow[(s, v)]).sum();
            return FlowResult { value, flow, cut_set };
        }

        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while v != s {
            let u = parent[v];
            bottleneck = bottleneck.min(residual(&flow, u, v));
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = parent[v];
            flow[(u, v)] += bottleneck;
            flow[(v, u)] -= bottleneck;
            v = u;
        }
    }
}

/// Minimum s-d cut by enumerating every source-side subset.
pub fn min_cut_bruteforce(g: &CapacityGraph) -> Result<f64> {
    let n = g.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { n, limit: ENUMERATION_LIMIT });
    }
    let others: Vec<usize> = (0..n).filter(|&v| v != g.source && v != g.sink).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << others.len()) {
        let mut set = vec![false; n];
        set[g.source] = true;
        for (bit, &v) in others.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                set[v] = true;
            }
        }
        best = best.min(g.cut_capacity(&set));
    }
    Ok(best)
}

/// Outcome of [`validate_flow`]; empty `violations` means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowCheck {
    pub violations: Vec<String>,
}

impl FlowCheck {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks capacity bounds, antisymmetry, conservation at interior nodes and
/// that the net source outflow equals the reported value.
pub fn validate_flow(g: &CapacityGraph, fr: &FlowResult) -> FlowCheck {
    let n = g.n();
    let tol = 1e-9 * g.max_capacity().max(1.0);
    let mut check = FlowCheck::default();
    if fr.flow.nrows() != n || fr.flow.ncols() != n {
        check.violations.push(format!(
            "flow is {}x{}, graph has {n} nodes",
            fr.flow.nrows(),
            fr.flow.ncols()
        ));
        return check;
    }
    for i in 0..n {
        for j in 0..n {
            let f = fr.flow[(i, j)];
            if (f + fr.flow[(j, i)]).abs() > tol {
                check.violations.push(format!("flow not antisymmetric on ({i},{j})"));
            }
            if f > g.a[(i, j)] + tol {
                check
                    .violations
                    .push(format!("flow {f} exceeds capacity {} on ({i},{j})", g.a[(i, j)]));
            }
        }
    }
    for v in (0..n).filter(|&v| v != g.source && v != g.sink) {
        let net: f64 = fr.flow.row(v).sum();
        if net.abs() > tol {
            check.violations.push(format!("conservation violated at node {v}: net {net}"));
        }
    }
    let out: f64 = fr.flow.row(g.source).sum();
    if (out - fr.value).abs() > tol {
        check
            .violations
            .push(format!("source outflow {out} differs from value {}", fr.value));
    }
    check
}
