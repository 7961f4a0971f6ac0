//! Max-min power allocation along the relay chain by difference-of-concave
//! decomposition and successive convex approximation.
//!
//! Every link capacity splits as `a = v - r` with `v` concave in all powers
//! and `r` concave in the interferer powers. Each round replaces `r` by its
//! tangent at the previous iterate (an over-estimate, so `v - r~` is a
//! concave minorant of `a`), linearizes the subtracted term of the primary
//! QoS rate the same way, and solves the resulting convex problem with the
//! log-barrier method.

use std::f64::consts::LN_2;

use nalgebra::DVector;

use crate::barrier::{self, BarrierOptions, ConcaveFn, LogTerm};
use crate::error::{Error, Result};
use crate::flow;
use crate::model::{Entity, InterferenceMode, NetworkState, Scenario};
use crate::radio;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    /// Relay-network node powers (W).
    pub p: Vec<f64>,
    /// Interferer powers (W).
    pub pj: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub p_max_w: f64,
    /// Interference tolerated at each interferer (W).
    pub i_max_w: Vec<f64>,
    /// Primary-user rate floor (bits/s).
    pub r_th_bps: f64,
    /// Whether interferer powers are decision variables.
    pub cooperative: bool,
}

/// `a_{i,j} = v(P_i, P_j, P^J) - r(P^J)` with every gain frozen at the
/// current geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSplit {
    pub i: usize,
    pub j: usize,
    link_gain: f64,
    /// `|h_{m,j}|^2` per interferer.
    gain_to_j: Vec<f64>,
    gain_to_i: Vec<f64>,
    safety_j: f64,
    safety_i: f64,
    bandwidth: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DcSplit {
    /// Receiver-side interference-plus-safety at `j` and at `i`.
    fn floors(&self, pj: &[f64]) -> (f64, f64) {
        (dot(pj, &self.gain_to_j) + self.safety_j, dot(pj, &self.gain_to_i) + self.safety_i)
    }

    pub fn v(&self, p_i: f64, p_j: f64, pj: &[f64]) -> f64 {
        let (fj, fi) = self.floors(pj);
        0.5 * self.bandwidth * ((p_i * self.link_gain + fj).log2() + (p_j * self.link_gain + fi).log2())
    }

    pub fn r(&self, pj: &[f64]) -> f64 {
        let (fj, fi) = self.floors(pj);
        0.5 * self.bandwidth * (fj.log2() + fi.log2())
    }

    pub fn r_gradient(&self, pj: &[f64]) -> Vec<f64> {
        let (fj, fi) = self.floors(pj);
        let k = 0.5 * self.bandwidth / LN_2;
        self.gain_to_j
            .iter()
            .zip(&self.gain_to_i)
            .map(|(gj, gi)| k * (gj / fj + gi / fi))
            .collect()
    }

    pub fn capacity(&self, p_i: f64, p_j: f64, pj: &[f64]) -> f64 {
        self.v(p_i, p_j, pj) - self.r(pj)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

pub fn dc_split(i: usize, j: usize, state: &NetworkState, scenario: &Scenario) -> Result<DcSplit> {
    let m = scenario.n_interferers();
    let mut gain_to_j = Vec::with_capacity(m);
    let mut gain_to_i = Vec::with_capacity(m);
    for k in 0..m {
        gain_to_j.push(radio::gain_sq(Entity::Interferer(k), Entity::Node(j), state, scenario)?);
        gain_to_i.push(radio::gain_sq(Entity::Interferer(k), Entity::Node(i), state, scenario)?);
    }
    Ok(DcSplit {
        i,
        j,
        link_gain: radio::gain_sq(Entity::Node(i), Entity::Node(j), state, scenario)?,
        gain_to_j,
        gain_to_i,
        safety_j: radio::safety_term(i, j, state, scenario),
        safety_i: radio::safety_term(j, i, state, scenario),
        bandwidth: scenario.channel.bandwidth_hz,
    })
}

/// First-order expansion of `r` around an interferer power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedR {
    pub expansion: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl LinearizedR {
    pub fn eval(&self, pj: &[f64]) -> f64 {
        self.value
            + self
                .gradient
                .iter()
                .zip(pj.iter().zip(&self.expansion))
                .map(|(g, (x, x0))| g * (x - x0))
                .sum::<f64>()
    }
}

pub fn taylor_linearize_r(split: &DcSplit, expansion: &PowerVector) -> LinearizedR {
    LinearizedR {
        expansion: expansion.pj.clone(),
        value: split.r(&expansion.pj),
        gradient: split.r_gradient(&expansion.pj),
    }
}

/// QoS rate of primary UE `u` (served by interferer `m`) while node `i`
/// transmits, with the subtracted `log2(P_i |h_{i,u}|^2 + sigma^2)` term
/// replaced by its tangent at the expansion power.
#[derive(Debug, Clone, PartialEq)]
pub struct QosLinearization {
    pub m: usize,
    pub u: usize,
    pub i: usize,
    gain_mu: f64,
    gain_iu: f64,
    noise: f64,
    bandwidth: f64,
    p_i0: f64,
}

impl QosLinearization {
    /// Exact rate `B log2(1 + SINR)`.
    pub fn rate(&self, p_i: f64, pj_m: f64) -> f64 {
        self.bandwidth * (1.0 + radio::sinr_from_gains(pj_m, self.gain_mu, p_i, self.gain_iu, self.noise)).log2()
    }

    fn tangent_base(&self) -> f64 {
        self.p_i0 * self.gain_iu + self.noise
    }

    /// Conservative rate `R^ <= R`, equal at the expansion power.
    pub fn approx_rate(&self, p_i: f64, pj_m: f64) -> f64 {
        let c0 = self.tangent_base();
        let total = pj_m * self.gain_mu + p_i * self.gain_iu + self.noise;
        self.bandwidth * (total.log2() - c0.log2() - self.gain_iu * (p_i - self.p_i0) / (c0 * LN_2))
    }
}

pub fn qos_linearize(
    m: usize,
    u: usize,
    i: usize,
    expansion: &PowerVector,
    state: &NetworkState,
    scenario: &Scenario,
) -> Result<QosLinearization> {
    let lin = QosLinearization {
        m,
        u,
        i,
        gain_mu: radio::gain_sq(Entity::Interferer(m), Entity::PrimaryUe(u), state, scenario)?,
        gain_iu: radio::gain_sq(Entity::Node(i), Entity::PrimaryUe(u), state, scenario)?,
        noise: scenario.channel.noise_w,
        bandwidth: scenario.channel.bandwidth_hz,
        p_i0: expansion.p[i],
    };
    let threshold = scenario.constraints.r_th_bps;
    let rate = lin.rate(expansion.p[i], expansion.pj[m]);
    if rate < threshold - 1e-9 * threshold.max(1.0) {
        return Err(Error::InfeasibleExpansion { rate, threshold });
    }
    Ok(lin)
}

/// Links whose capacities enter the max-min objective.
pub fn maxmin_links(scenario: &Scenario) -> Vec<(usize, usize)> {
    scenario.topology.edges(scenario.n_nodes())
}

/// Smallest true capacity over the max-min links at `power`.
pub fn min_link_capacity(state: &NetworkState, scenario: &Scenario, power: &PowerVector) -> Result<f64> {
    let st = with_power(state, power);
    let mut best = f64::INFINITY;
    for (i, j) in maxmin_links(scenario) {
        best = best.min(flow::edge_capacity(i, j, &st, scenario)?);
    }
    Ok(best)
}

fn with_power(state: &NetworkState, power: &PowerVector) -> NetworkState {
    NetworkState { power: power.clone(), ..state.clone() }
}

/// Minimum slack of each true constraint family; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slacks {
    /// `min_{i,m} I^max_m - P_i |h_{i,m}|^2` (W); `+inf` without interferers.
    pub interference_w: f64,
    /// `min_{m,u,i} R_{m,u} - R^th` (bits/s); `+inf` without primary UEs.
    pub qos_bps: f64,
    /// `min_i min(P_i, P_max - P_i)` (W).
    pub power_box_w: f64,
}

impl Slacks {
    pub fn feasible(&self, tol: f64) -> bool {
        self.interference_w >= -tol && self.qos_bps >= -tol && self.power_box_w >= -tol
    }
}

pub fn constraint_slacks(state: &NetworkState, scenario: &Scenario) -> Result<Slacks> {
    let c = &scenario.constraints;
    let mut slacks = Slacks {
        interference_w: f64::INFINITY,
        qos_bps: f64::INFINITY,
        power_box_w: f64::INFINITY,
    };
    for (i, &p) in state.power.p.iter().enumerate() {
        slacks.power_box_w = slacks.power_box_w.min(p.min(c.p_max_w - p));
        for m in 0..scenario.n_interferers() {
            let g = radio::gain_sq(Entity::Node(i), Entity::Interferer(m), state, scenario)?;
            slacks.interference_w = slacks.interference_w.min(c.i_max_w[m] - p * g);
            for u in 0..scenario.primary_ues.len() {
                let rate = radio::primary_rate(m, u, i, state, scenario)?;
                slacks.qos_bps = slacks.qos_bps.min(rate - c.r_th_bps);
            }
        }
    }
    Ok(slacks)
}

/// Largest power node `i` may use under the interference caps alone.
fn interference_cap(i: usize, state: &NetworkState, scenario: &Scenario) -> Result<f64> {
    let c = &scenario.constraints;
    let mut cap = c.p_max_w;
    for m in 0..scenario.n_interferers() {
        let g = radio::gain_sq(Entity::Node(i), Entity::Interferer(m), state, scenario)?;
        if g > 0.0 {
            cap = cap.min(c.i_max_w[m] / g);
        }
    }
    Ok(cap)
}

fn qos_ok(i: usize, p_i: f64, pj: &[f64], state: &NetworkState, scenario: &Scenario) -> Result<bool> {
    let r_th = scenario.constraints.r_th_bps;
    for m in 0..scenario.n_interferers() {
        for u in 0..scenario.primary_ues.len() {
            let h_mu = radio::gain_sq(Entity::Interferer(m), Entity::PrimaryUe(u), state, scenario)?;
            let h_iu = radio::gain_sq(Entity::Node(i), Entity::PrimaryUe(u), state, scenario)?;
            let sinr = radio::sinr_from_gains(pj[m], h_mu, p_i, h_iu, scenario.channel.noise_w);
            if scenario.channel.bandwidth_hz * (1.0 + sinr).log2() <= r_th {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Raises every node power to the largest value its own interference caps,
/// QoS floors and `P_max` allow, with the interferer powers fixed. No link
/// capacity falls, so this picks the full-power point among max-min optima
/// whose non-bottleneck powers the subproblem leaves undetermined.
pub fn saturate(state: &NetworkState, scenario: &Scenario, power: &PowerVector) -> Result<PowerVector> {
    let gamma = (scenario.constraints.r_th_bps / scenario.channel.bandwidth_hz).exp2() - 1.0;
    let mut out = power.clone();
    for i in 0..scenario.n_nodes() {
        let mut cap = interference_cap(i, state, scenario)?;
        if gamma > 0.0 {
            for m in 0..scenario.n_interferers() {
                for u in 0..scenario.primary_ues.len() {
                    let h_mu = radio::gain_sq(Entity::Interferer(m), Entity::PrimaryUe(u), state, scenario)?;
                    let h_iu = radio::gain_sq(Entity::Node(i), Entity::PrimaryUe(u), state, scenario)?;
                    if h_iu > 0.0 {
                        cap = cap.min((power.pj[m] * h_mu / gamma - scenario.channel.noise_w) / h_iu);
                    }
                }
            }
        }
        out.p[i] = out.p[i].max(cap * (1.0 - 1e-12));
    }
    Ok(out)
}

/// Strictly feasible starting point: `0.9 * min(P_max, I^max_m / |h_{i,m}|^2)`
/// per node, halved until every QoS constraint holds; interferers at their
/// configured power.
pub fn initial_power(state: &NetworkState, scenario: &Scenario) -> Result<PowerVector> {
    let pj = scenario.interferer_powers();
    let mut p = Vec::with_capacity(scenario.n_nodes());
    for i in 0..scenario.n_nodes() {
        let mut p_i = 0.9 * interference_cap(i, state, scenario)?;
        let mut halvings = 0;
        while !qos_ok(i, p_i, &pj, state, scenario)? {
            halvings += 1;
            if halvings > 200 {
                return Err(Error::Infeasible {
                    family: format!("primary QoS cannot be met even with node {i} silent"),
                });
            }
            p_i *= 0.5;
        }
        if !(p_i > 0.0) {
            return Err(Error::Infeasible { family: format!("node {i} has no admissible power") });
        }
        p.push(p_i);
    }
    Ok(PowerVector { p, pj })
}

/// Result of one convexified subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub power: PowerVector,
    /// Optimal value of the convexified max-min (bits/s).
    pub eta: f64,
    pub gap: f64,
    pub kkt_residual: f64,
}

/// Variable layout: `[P / P_max (n), P^J / P^J_cfg (m, cooperative only), eta / B]`.
struct Layout {
    n: usize,
    m: usize,
    cooperative: bool,
}

impl Layout {
    fn dim(&self) -> usize {
        self.n + if self.cooperative { self.m } else { 0 } + 1
    }
    fn q(&self, m: usize) -> usize {
        self.n + m
    }
    fn eta(&self) -> usize {
        self.dim() - 1
    }
}

/// Solves the convexified max-min problem around `expansion`.
pub fn solve_subproblem(state: &NetworkState, scenario: &Scenario, expansion: &PowerVector) -> Result<Subproblem> {
    let c = &scenario.constraints;
    let bw = scenario.channel.bandwidth_hz;
    let pj_cfg = scenario.interferer_powers();
    let layout = Layout { n: scenario.n_nodes(), m: scenario.n_interferers(), cooperative: c.cooperative };
    let dim = layout.dim();
    let zeros = || DVector::<f64>::zeros(dim);

    let mut cons: Vec<ConcaveFn> = Vec::new();
    let mut family: Vec<&'static str> = Vec::new();

    // eta <= v - r~ on every max-min link.
    for (i, j) in maxmin_links(scenario) {
        let split = dc_split(i, j, state, scenario)?;
        let lin = taylor_linearize_r(&split, expansion);
        let mut logs = Vec::new();
        for (tx, floor_gains, safety) in [(i, &split.gain_to_j, split.safety_j), (j, &split.gain_to_i, split.safety_i)] {
            let mut coeffs = zeros();
            coeffs[tx] = c.p_max_w * split.link_gain;
            let mut constant = safety;
            for (k, g) in floor_gains.iter().enumerate() {
                if layout.cooperative {
                    coeffs[layout.q(k)] = pj_cfg[k] * g;
                } else {
                    constant += expansion.pj[k] * g;
                }
            }
            logs.push(LogTerm { weight: 0.5, constant, coeffs });
        }
        let mut linear = zeros();
        linear[layout.eta()] = -1.0;
        let mut constant = -lin.value / bw;
        if layout.cooperative {
            for k in 0..layout.m {
                linear[layout.q(k)] = -lin.gradient[k] * pj_cfg[k] / bw;
                constant += lin.gradient[k] * lin.expansion[k] / bw;
            }
        }
        cons.push(ConcaveFn { logs, constant, linear });
        family.push("link capacity");
    }

    // Interference caps and the power box.
    for i in 0..layout.n {
        for m in 0..layout.m {
            let g = radio::gain_sq(Entity::Node(i), Entity::Interferer(m), state, scenario)?;
            let mut linear = zeros();
            linear[i] = -c.p_max_w * g / c.i_max_w[m];
            cons.push(ConcaveFn::affine(1.0, linear));
            family.push("interference cap");
        }
        let mut lo = zeros();
        lo[i] = 1.0;
        cons.push(ConcaveFn::affine(0.0, lo));
        let mut hi = zeros();
        hi[i] = -1.0;
        cons.push(ConcaveFn::affine(1.0, hi));
        family.extend(["power box", "power box"]);
    }
    if layout.cooperative {
        for m in 0..layout.m {
            let mut lo = zeros();
            lo[layout.q(m)] = 1.0;
            cons.push(ConcaveFn::affine(0.0, lo));
            let mut hi = zeros();
            hi[layout.q(m)] = -1.0;
            cons.push(ConcaveFn::affine(1.0, hi));
            family.extend(["interferer power box", "interferer power box"]);
        }
    }
    let mut eta_lo = zeros();
    eta_lo[layout.eta()] = 1.0;
    cons.push(ConcaveFn::affine(0.0, eta_lo));
    family.push("eta >= 0");

    // Linearized primary QoS.
    for m in 0..layout.m {
        for u in 0..scenario.primary_ues.len() {
            for i in 0..layout.n {
                let q = qos_linearize(m, u, i, expansion, state, scenario)?;
                let c0 = q.tangent_base();
                let mut coeffs = zeros();
                coeffs[i] = c.p_max_w * q.gain_iu;
                let mut constant = q.noise;
                if layout.cooperative {
                    coeffs[layout.q(m)] = pj_cfg[m] * q.gain_mu;
                } else {
                    constant += expansion.pj[m] * q.gain_mu;
                }
                let mut linear = zeros();
                linear[i] = -q.gain_iu * c.p_max_w / (c0 * LN_2);
                let affine_const = -c0.log2() + q.gain_iu * q.p_i0 / (c0 * LN_2) - c.r_th_bps / bw;
                cons.push(ConcaveFn {
                    logs: vec![LogTerm { weight: 1.0, constant, coeffs }],
                    constant: affine_const,
                    linear,
                });
                family.push("primary QoS");
            }
        }
    }

    // Start just inside the expansion point.
    let shrink = 1.0 - 1e-6;
    let inside = |v: f64| v.clamp(f64::MIN_POSITIVE, 1.0) * shrink;
    let mut x0 = zeros();
    for i in 0..layout.n {
        x0[i] = inside(expansion.p[i] / c.p_max_w);
    }
    if layout.cooperative {
        for m in 0..layout.m {
            x0[layout.q(m)] = inside(expansion.pj[m] / pj_cfg[m]);
        }
    }
    let link_count = maxmin_links(scenario).len();
    let min_link = cons[..link_count]
        .iter()
        .map(|g| g.value(&x0).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    x0[layout.eta()] = if min_link.is_finite() && min_link > 0.0 { 0.5 * min_link } else { 0.0 };

    let opts = BarrierOptions::default();
    let start = barrier::phase_one(&cons, &x0, &opts).map_err(|k| Error::Infeasible {
        family: family.get(k).copied().unwrap_or("unknown").to_string(),
    })?;
    let sol = barrier::maximize(&{
        let mut obj = zeros();
        obj[layout.eta()] = 1.0;
        obj
    }, &cons, start, &opts, &|_| false)?;

    let p = (0..layout.n).map(|i| (sol.x[i] * c.p_max_w).clamp(0.0, c.p_max_w)).collect();
    let pj = if layout.cooperative {
        (0..layout.m).map(|m| (sol.x[layout.q(m)] * pj_cfg[m]).clamp(0.0, pj_cfg[m])).collect()
    } else {
        expansion.pj.clone()
    };
    Ok(Subproblem {
        power: PowerVector { p, pj },
        eta: sol.x[layout.eta()] * bw,
        gap: sol.gap * bw,
        kkt_residual: sol.kkt_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub power: PowerVector,
    /// Smallest true max-min link capacity at `power` (bits/s).
    pub eta: f64,
    /// `eta` at the initial point and after every accepted round.
    pub history: Vec<f64>,
    /// Every accepted iterate, starting with the initial point.
    pub iterates: Vec<PowerVector>,
}

/// Successive convex approximation from a feasible `init` until the max-min
/// value moves by at most `eps` bits/s.
///
/// Each subproblem solution is passed through [`saturate`]. A round whose
/// true max-min value would drop below the current one is rejected and the
/// loop ends, so `history` is nondecreasing.
pub fn sca_loop(state: &NetworkState, scenario: &Scenario, init: PowerVector, eps: f64) -> Result<ScaOutcome> {
    let st = with_power(state, &init);
    if !constraint_slacks(&st, scenario)?.feasible(0.0) {
        return Err(Error::Infeasible { family: "initial power allocation".into() });
    }
    let mut eta = min_link_capacity(state, scenario, &init)?;
    let mut out = ScaOutcome { power: init.clone(), eta, history: vec![eta], iterates: vec![init] };
    for _ in 0..scenario.sca.max_iters {
        let mut sub = solve_subproblem(state, scenario, &out.power)?;
        sub.power = saturate(state, scenario, &sub.power)?;
        let candidate_eta = min_link_capacity(state, scenario, &sub.power)?;
        if candidate_eta < eta {
            return Ok(out);
        }
        let delta = candidate_eta - eta;
        eta = candidate_eta;
        out.power = sub.power.clone();
        out.eta = eta;
        out.history.push(eta);
        out.iterates.push(sub.power);
        if delta <= eps {
            return Ok(out);
        }
    }
    Err(Error::MaxIterations(scenario.sca.max_iters))
}

/// Powers for the current geometry: full power against smart jammers,
/// otherwise the SCA allocation from the standard initial point.
pub fn allocate(state: &NetworkState, scenario: &Scenario) -> Result<ScaOutcome> {
    match scenario.mode {
        InterferenceMode::Smart => {
            let power = PowerVector {
                p: vec![scenario.constraints.p_max_w; scenario.n_nodes()],
                pj: scenario.interferer_powers(),
            };
            let eta = min_link_capacity(state, scenario, &power)?;
            Ok(ScaOutcome { power: power.clone(), eta, history: vec![eta], iterates: vec![power] })
        }
        InterferenceMode::Reckless => {
            let init = initial_power(state, scenario)?;
            sca_loop(state, scenario, init, scenario.sca.eps_bps)
        }
    }
}
