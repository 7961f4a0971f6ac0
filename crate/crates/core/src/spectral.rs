//! Weighted normalized Laplacian, algebraic connectivity, exact Cheeger
//! constants, and the spatial gradients that steer relays and jammers.
//!
//! The gradients are those of the frozen-coefficient surrogate
//!
//! ```text
//! Q(r) = sum_{p~q} (v_p/sqrt(w_p) - v_q/sqrt(w_q))^2 * a_pq(r)
//! ```
//!
//! where `v` is the current Fiedler vector. Eigenvector motion and the degree
//! normalization are held fixed while differentiating.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::flow::{self, CapacityGraph, ENUMERATION_LIMIT};
use crate::model::{Entity, NetworkState, Scenario};
use crate::radio::{self, Position};

/// Positive per-node weights emphasizing parts of the network in the
/// weighted Cheeger constant.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeWeights(Vec<f64>);

impl NodeWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Range {
                field: format!("weights[{i}]"),
                message: format!("weight {} must be positive and finite", w[i]),
            });
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    /// Source and sink get `endpoint`, every relay gets `relay`.
    pub fn endpoints(n: usize, endpoint: f64, relay: f64) -> Result<Self> {
        let mut w = vec![relay; n];
        if n > 0 {
            w[0] = endpoint;
            w[n - 1] = endpoint;
        }
        Self::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// `W^{-1/2} D^{-1/2} (D - A) D^{-1/2} W^{-1/2}` together with its null vector
/// `(W D)^{1/2} 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacian {
    pub matrix: DMatrix<f64>,
    pub null_vector: DVector<f64>,
}

pub fn weighted_laplacian(g: &CapacityGraph, w: &NodeWeights) -> Result<WeightedLaplacian> {
    let n = g.n();
    assert_eq!(w.len(), n, "one weight per node");
    let (d, l) = flow::degree_laplacian(g);
    if let Some(i) = (0..n).find(|&i| !(d[(i, i)] > 0.0)) {
        return Err(Error::ZeroDegree(i));
    }
    let scale: Vec<f64> = (0..n)
        .map(|i| 1.0 / (w.as_slice()[i] * d[(i, i)]).sqrt())
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| scale[i] * l[(i, j)] * scale[j]);
    let null_vector = DVector::from_fn(n, |i, _| (w.as_slice()[i] * d[(i, i)]).sqrt());
    Ok(WeightedLaplacian { matrix, null_vector })
}

/// `W^{-1/2} (D - A) W^{-1/2}` without degree normalization. Its second
/// eigenvalue is the one bounded by the weighted Cheeger inequalities.
pub fn combinatorial_weighted_laplacian(g: &CapacityGraph, w: &NodeWeights) -> DMatrix<f64> {
    let (_, l) = flow::degree_laplacian(g);
    let ws = w.as_slice();
    DMatrix::from_fn(g.n(), g.n(), |i, j| l[(i, j)] / (ws[i] * ws[j]).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiedlerPair {
    pub lambda2: f64,
    /// Unit norm; first component above `1e-12` in magnitude is positive.
    pub vector: DVector<f64>,
    /// Next eigenvalue up, when the graph has one.
    pub lambda3: Option<f64>,
}

pub fn fiedler(lap: &WeightedLaplacian) -> Result<FiedlerPair> {
    second_eigenpair(&lap.matrix)
}

/// Fiedler pair of [`combinatorial_weighted_laplacian`]. With this vector the
/// edge-coefficient gradient is the exact gradient of its `lambda2`.
pub fn combinatorial_fiedler(g: &CapacityGraph, w: &NodeWeights) -> Result<FiedlerPair> {
    second_eigenpair(&combinatorial_weighted_laplacian(g, w))
}

/// Separation below which `lambda2` and `lambda3` count as crossing.
pub const CROSSING_GAP: f64 = 1e-8;

pub(crate) fn second_eigenpair(m: &DMatrix<f64>) -> Result<FiedlerPair> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::ConvergenceFailure(format!(
            "a {n}-node graph has no second eigenvalue"
        )));
    }
    let eig = symmetric_eigen(m)?;
    let lambda2 = eig.values[1];
    let mut vector: DVector<f64> = eig.vectors.column(1).into_owned();
    if let Some(first) = vector.iter().find(|x| x.abs() > 1e-12).cloned() {
        if first < 0.0 {
            vector.neg_mut();
        }
    }
    let residual = (m * &vector - &vector * lambda2).norm();
    let bound = 1e-10 * m.norm().max(1.0);
    if residual > bound {
        return Err(Error::ConvergenceFailure(format!(
            "Fiedler residual {residual:e} exceeds {bound:e}"
        )));
    }
    let lambda3 = eig.values.get(2).cloned();
    if let Some(l3) = lambda3 {
        if l3 - lambda2 < CROSSING_GAP {
            tracing::debug!(lambda2, lambda3 = l3, "eigenvalue crossing at lambda2");
        }
    }
    Ok(FiedlerPair { lambda2, vector, lambda3 })
}

/// Exact weighted Cheeger constant and a minimizing side.
pub fn cheeger_partition(g: &CapacityGraph, w: &NodeWeights) -> Result<(f64, Vec<bool>)> {
    let n = g.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { n, limit: ENUMERATION_LIMIT });
    }
    let ws = w.as_slice();
    let total: f64 = ws.iter().sum();
    let mut best = (f64::INFINITY, vec![false; n]);
    // Node 0 always on side S; complements give the same ratio.
    for mask in 0u32..(1 << (n - 1)) {
        let mut set = vec![false; n];
        set[0] = true;
        for v in 1..n {
            set[v] = mask & (1 << (v - 1)) != 0;
        }
        if set.iter().all(|&b| b) {
            continue;
        }
        let inside: f64 = (0..n).filter(|&v| set[v]).map(|v| ws[v]).sum();
        let ratio = g.cut_capacity(&set) / inside.min(total - inside);
        if ratio < best.0 {
            best = (ratio, set);
        }
    }
    Ok(best)
}

/// `min_S cut(S) / min(|S|_W, |S^c|_W)` over nonempty proper subsets.
pub fn cheeger_exact(g: &CapacityGraph, w: &NodeWeights) -> Result<f64> {
    cheeger_partition(g, w).map(|(h, _)| h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheegerBounds {
    pub lower: f64,
    pub h_w: f64,
    pub upper: f64,
    pub lambda2: f64,
    pub delta_max: f64,
    pub w_min: f64,
}

/// Evaluates `lambda2/2 <= h_W <= sqrt(2 delta_max lambda2 / w_min)` with
/// `lambda2` taken from [`combinatorial_weighted_laplacian`] and `delta_max`
/// the largest generalized degree. Fails if either side is violated by more
/// than `1e-9`.
pub fn cheeger_bounds_check(g: &CapacityGraph, w: &NodeWeights) -> Result<CheegerBounds> {
    let h_w = cheeger_exact(g, w)?;
    let lambda2 = second_eigenpair(&combinatorial_weighted_laplacian(g, w))?
        .lambda2
        .max(0.0);
    let (d, _) = flow::degree_laplacian(g);
    let delta_max = d.diagonal().iter().cloned().fold(0.0, f64::max);
    let w_min = w.min();
    let bounds = CheegerBounds {
        lower: lambda2 / 2.0,
        h_w,
        upper: (2.0 * delta_max * lambda2 / w_min).sqrt(),
        lambda2,
        delta_max,
        w_min,
    };
    const SLACK: f64 = 1e-9;
    if bounds.lower > h_w + SLACK || h_w > bounds.upper + SLACK {
        return Err(Error::CheegerViolation {
            lower: bounds.lower,
            h: h_w,
            upper: bounds.upper,
        });
    }
    Ok(bounds)
}

/// Something whose coordinates a gradient is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mover {
    Node(usize),
    Interferer(usize),
}

/// Per-entity `(d/dx, d/dy, d/dz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<[f64; 3]>);

impl GradientVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![[0.0; 3]; n])
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn scaled(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn add_into(acc: &mut [f64; 3], v: [f64; 3]) {
    for k in 0..3 {
        acc[k] += v[k];
    }
}

/// `d G_{a,b} / d r_a` for a link gain `G` with exponent `alpha`.
fn gain_gradient(gain: f64, alpha: f64, ra: &Position, rb: &Position) -> Result<[f64; 3]> {
    let d2 = ra.distance(rb).powi(2);
    if !(d2 > 0.0) {
        return Err(Error::DegenerateGeometry("coincident positions in gradient".into()));
    }
    Ok(scaled(ra.delta(rb), -alpha * gain / d2))
}

/// `d u(d_{j,k}/r_int) / d r_j`.
fn safety_gradient(rj: &Position, rk: &Position, scenario: &Scenario) -> Result<[f64; 3]> {
    let d = rj.distance(rk);
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry("coincident nodes in safety term".into()));
    }
    let r_int = scenario.safety.r_int;
    let du = radio::smoothed_step_deriv(d / r_int, &scenario.safety);
    Ok(scaled(rj.delta(rk), du / (r_int * d)))
}

/// `SIR_{i,j}` and its gradient with respect to `mover`'s position.
pub fn sir_gradient(
    i: usize,
    j: usize,
    mover: Mover,
    state: &NetworkState,
    scenario: &Scenario,
) -> Result<(f64, [f64; 3])> {
    let terms = radio::sir_terms(i, j, state, scenario)?;
    let den = terms.denominator();
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator { from: i, to: j });
    }
    let (ri, rj) = (state.nodes[i], state.nodes[j]);
    let alpha_ij = radio::link_exponent(Entity::Node(i), Entity::Node(j), scenario);
    let p_i = state.power.p[i];
    let chi = scenario.safety.chi;

    let mut d_num = [0.0; 3];
    let mut d_den = [0.0; 3];
    match mover {
        Mover::Node(n) if n == i => {
            d_num = scaled(gain_gradient(terms.link_gain, alpha_ij, &ri, &rj)?, p_i);
        }
        Mover::Node(n) if n == j => {
            d_num = scaled(gain_gradient(terms.link_gain, alpha_ij, &rj, &ri)?, p_i);
            for (m, &pj) in state.power.pj.iter().enumerate() {
                let rm = state.interferers[m];
                let g = radio::gain_sq(Entity::Interferer(m), Entity::Node(j), state, scenario)?;
                let alpha = radio::link_exponent(Entity::Interferer(m), Entity::Node(j), scenario);
                add_into(&mut d_den, scaled(gain_gradient(g, alpha, &rj, &rm)?, pj));
            }
            for k in (0..state.nodes.len()).filter(|&k| k != i && k != j) {
                add_into(&mut d_den, scaled(safety_gradient(&rj, &state.nodes[k], scenario)?, chi));
            }
        }
        Mover::Node(n) => {
            d_den = scaled(safety_gradient(&state.nodes[n], &rj, scenario)?, chi);
        }
        Mover::Interferer(m) => {
            let rm = state.interferers[m];
            let g = radio::gain_sq(Entity::Interferer(m), Entity::Node(j), state, scenario)?;
            let alpha = radio::link_exponent(Entity::Interferer(m), Entity::Node(j), scenario);
            d_den = scaled(gain_gradient(g, alpha, &rm, &rj)?, state.power.pj[m]);
        }
    }
    let sir = terms.signal / den;
    let mut grad = [0.0; 3];
    for k in 0..3 {
        grad[k] = d_num[k] / den - terms.signal * d_den[k] / (den * den);
    }
    Ok((sir, grad))
}

/// Gradient of the link capacity `a_{p,q}` (bits/s per metre) with respect
/// to `mover`'s position; zero for `p == q`.
pub fn capacity_gradient(
    p: usize,
    q: usize,
    mover: Mover,
    state: &NetworkState,
    scenario: &Scenario,
) -> Result<[f64; 3]> {
    if p == q {
        return Ok([0.0; 3]);
    }
    let (sir_pq, g_pq) = sir_gradient(p, q, mover, state, scenario)?;
    let (sir_qp, g_qp) = sir_gradient(q, p, mover, state, scenario)?;
    let k = scenario.channel.bandwidth_hz / (2.0 * LN_2);
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = k * (g_pq[c] / (1.0 + sir_pq) + g_qp[c] / (1.0 + sir_qp));
    }
    Ok(out)
}

/// Frozen coefficients `(v_p/sqrt(w_p) - v_q/sqrt(w_q))^2` per topology edge.
pub fn edge_coefficients(
    scenario: &Scenario,
    fp: &FiedlerPair,
    w: &NodeWeights,
) -> Vec<((usize, usize), f64)> {
    let ws = w.as_slice();
    scenario
        .topology
        .edges(scenario.n_nodes())
        .into_iter()
        .map(|(p, q)| {
            let diff = fp.vector[p] / ws[p].sqrt() - fp.vector[q] / ws[q].sqrt();
            ((p, q), diff * diff)
        })
        .collect()
}

/// `Q(r) = sum c_pq a_pq(r)` for fixed coefficients.
pub fn surrogate(
    state: &NetworkState,
    scenario: &Scenario,
    coeffs: &[((usize, usize), f64)],
) -> Result<f64> {
    let mut q = 0.0;
    for &((i, j), c) in coeffs {
        q += c * flow::edge_capacity(i, j, state, scenario)?;
    }
    Ok(q)
}

fn surrogate_gradient(
    mover: Mover,
    state: &NetworkState,
    scenario: &Scenario,
    coeffs: &[((usize, usize), f64)],
) -> Result<[f64; 3]> {
    let mut acc = [0.0; 3];
    for &((p, q), c) in coeffs {
        if c != 0.0 {
            add_into(&mut acc, scaled(capacity_gradient(p, q, mover, state, scenario)?, c));
        }
    }
    Ok(acc)
}

/// Spatial gradient of the weighted algebraic connectivity for every node;
/// source and sink entries are zero since they never move.
pub fn connectivity_gradient(
    state: &NetworkState,
    scenario: &Scenario,
    fp: &FiedlerPair,
    w: &NodeWeights,
) -> Result<GradientVector> {
    let coeffs = edge_coefficients(scenario, fp, w);
    let mut grad = GradientVector::zeros(scenario.n_nodes());
    for n in (0..scenario.n_nodes()).filter(|&n| scenario.is_movable(n)) {
        grad.0[n] = surrogate_gradient(Mover::Node(n), state, scenario, &coeffs)?;
    }
    Ok(grad)
}

/// Direction in which each interferer lowers the network's connectivity:
/// the negated surrogate gradient with respect to its own position.
pub fn jammer_gradient(
    state: &NetworkState,
    scenario: &Scenario,
    fp: &FiedlerPair,
    w: &NodeWeights,
) -> Result<GradientVector> {
    let coeffs = edge_coefficients(scenario, fp, w);
    let mut grad = GradientVector::zeros(scenario.n_interferers());
    for m in 0..scenario.n_interferers() {
        grad.0[m] = scaled(surrogate_gradient(Mover::Interferer(m), state, scenario, &coeffs)?, -1.0);
    }
    Ok(grad)
}

/// Builds the capacity graph for `state` and returns it with its Fiedler
/// pair under `w`.
pub fn connectivity(
    state: &NetworkState,
    scenario: &Scenario,
    w: &NodeWeights,
) -> Result<(CapacityGraph, FiedlerPair)> {
    let g = flow::build_graph(state, scenario)?;
    let fp = fiedler(&weighted_laplacian(&g, w)?)?;
    Ok((g, fp))
}
