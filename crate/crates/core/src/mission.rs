//! The time loop: relay motion along the connectivity gradient, interferer
//! policies, per-step power allocation and flow evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow;
use crate::model::{NetworkState, Scenario};
use crate::power::{self, PowerVector};
use crate::radio::Position;
use crate::spectral::{self, FiedlerPair, GradientVector};

#[derive(Debug, Clone, PartialEq)]
pub enum InterfererPolicy {
    /// Static.
    Naive,
    /// Cycles through `waypoints` (closing back to its start) at `speed_m`
    /// metres per iteration.
    RecklessMobile { waypoints: Vec<Position>, speed_m: f64 },
    /// Descends the network's connectivity every `tau` iterations.
    Smart { tau: usize },
}

/// Axes along which relays may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dims {
    Xy,
    Xz,
    Yz,
    Xyz,
}

impl Dims {
    pub fn mask(self) -> [bool; 3] {
        match self {
            Dims::Xy => [true, true, false],
            Dims::Xz => [true, false, true],
            Dims::Yz => [false, true, true],
            Dims::Xyz => [true, true, true],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    /// Step gain in metres per unit of gradient.
    pub dt: f64,
    pub dims: Dims,
    pub z_min: f64,
    /// Per-iteration displacement cap (m).
    pub max_step: f64,
    /// Step halvings tried when a relay move would lower the
    /// frozen-coefficient connectivity surrogate; `0` always takes the full
    /// step.
    pub backtrack: usize,
}

/// Moves `p` by `dt * g` on the enabled axes, capping the displacement
/// length at `max_step` and clamping altitude at `z_min`.
fn displace(p: &mut Position, g: [f64; 3], mask: [bool; 3], dt: f64, max_step: f64, z_min: f64) {
    let mut d = [0.0; 3];
    for k in 0..3 {
        if mask[k] {
            d[k] = dt * g[k];
        }
    }
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len > max_step {
        for v in &mut d {
            *v *= max_step / len;
        }
    }
    for k in 0..3 {
        if mask[k] {
            *p.coord_mut(k) += d[k];
        }
    }
    if mask[2] && p.z < z_min {
        p.z = z_min;
    }
}

/// One relay location update along `grad`. Base station and UE stay put.
pub fn step_trajectory(
    state: &NetworkState,
    scenario: &Scenario,
    grad: &GradientVector,
    cfg: &MotionConfig,
) -> NetworkState {
    let mut next = state.clone();
    let mask = cfg.dims.mask();
    for (i, pos) in next.nodes.iter_mut().enumerate() {
        if scenario.is_movable(i) {
            displace(pos, grad.0[i], mask, cfg.dt, cfg.max_step, cfg.z_min);
        }
    }
    next
}

/// Point at arc length `s` along the closed path `start -> waypoints... -> start`.
fn along_path(start: Position, waypoints: &[Position], s: f64) -> Position {
    let mut pts = Vec::with_capacity(waypoints.len() + 2);
    pts.push(start);
    pts.extend_from_slice(waypoints);
    pts.push(start);
    let perimeter: f64 = pts.windows(2).map(|w| w[0].distance(&w[1])).sum();
    if !(perimeter > 0.0) {
        return start;
    }
    let mut rem = s.rem_euclid(perimeter);
    for w in pts.windows(2) {
        let len = w[0].distance(&w[1]);
        if rem <= len && len > 0.0 {
            let f = rem / len;
            return Position::new(
                w[0].x + f * (w[1].x - w[0].x),
                w[0].y + f * (w[1].y - w[0].y),
                w[0].z + f * (w[1].z - w[0].z),
            );
        }
        rem -= len;
    }
    start
}

/// Moves every interferer according to its policy at iteration `t`.
/// Smart jammers recompute the Fiedler pair from the true state.
pub fn jammer_step(state: &NetworkState, scenario: &Scenario, t: usize) -> Result<NetworkState> {
    let mut next = state.clone();
    let mut jammer_grad: Option<GradientVector> = None;
    for (m, intf) in scenario.interferers.iter().enumerate() {
        match &intf.policy {
            InterfererPolicy::Naive => {}
            InterfererPolicy::RecklessMobile { waypoints, speed_m } => {
                next.interferers[m] = along_path(scenario.initial_interferers[m], waypoints, *speed_m * t as f64);
            }
            InterfererPolicy::Smart { tau } => {
                if t % tau.max(&1) != 0 {
                    continue;
                }
                if jammer_grad.is_none() {
                    let fp = motion_fiedler(state, scenario)?;
                    jammer_grad = Some(spectral::jammer_gradient(state, scenario, &fp, &scenario.weights)?);
                }
                let g = jammer_grad.as_ref().map(|g| g.0[m]).unwrap_or([0.0; 3]);
                let cfg = &scenario.motion;
                displace(&mut next.interferers[m], g, [true; 3], cfg.dt, cfg.max_step, cfg.z_min);
            }
        }
    }
    Ok(next)
}

/// Everything recorded about one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// Source-to-sink max flow (bits/s).
    pub flow_bps: f64,
    pub lambda2: f64,
    /// Smallest link capacity on the max-min links (bits/s).
    pub eta_bps: f64,
    pub nodes: Vec<Position>,
    pub interferers: Vec<Position>,
    pub power: PowerVector,
    /// Tightest interference-cap slack (W).
    pub cap_slack_w: f64,
    /// Tightest primary QoS slack (bits/s).
    pub qos_slack_bps: f64,
    pub cut_set: Vec<usize>,
    pub cut_edges: Vec<(usize, usize)>,
}

impl TraceRecord {
    pub fn state(&self) -> NetworkState {
        NetworkState {
            nodes: self.nodes.clone(),
            interferers: self.interferers.clone(),
            power: self.power.clone(),
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    IterationCap,
    Failed { infeasible: bool, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
}

impl SimulationTrace {
    pub fn final_flow(&self) -> Option<f64> {
        self.records.last().map(|r| r.flow_bps)
    }

    /// Iterations executed after the initial record.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }
}

/// Evaluates flow, connectivity and slacks for `state`.
pub fn record(state: &NetworkState, scenario: &Scenario, eta_bps: f64) -> Result<TraceRecord> {
    let (g, fp) = spectral::connectivity(state, scenario, &scenario.weights)?;
    let fr = flow::max_flow(&g);
    let slacks = power::constraint_slacks(state, scenario)?;
    Ok(TraceRecord {
        t: state.t,
        flow_bps: fr.value,
        lambda2: fp.lambda2,
        eta_bps,
        nodes: state.nodes.clone(),
        interferers: state.interferers.clone(),
        power: state.power.clone(),
        cap_slack_w: slacks.interference_w,
        qos_slack_bps: slacks.qos_bps,
        cut_edges: fr.cut_edges(&g),
        cut_set: fr.cut_set,
    })
}

fn with_allocation(mut state: NetworkState, scenario: &Scenario) -> Result<(NetworkState, f64)> {
    let out = power::allocate(&state, scenario)?;
    state.power = out.power;
    Ok((state, out.eta))
}

/// Fiedler pair steering relays and jammers. Taken from the combinatorial
/// weighted Laplacian, whose `lambda2` the edge-coefficient gradient
/// differentiates exactly and which scales with link capacity.
pub fn motion_fiedler(state: &NetworkState, scenario: &Scenario) -> Result<FiedlerPair> {
    let g = flow::build_graph(state, scenario)?;
    spectral::combinatorial_fiedler(&g, &scenario.weights)
}

fn one_iteration(state: &NetworkState, scenario: &Scenario, t: usize) -> Result<(NetworkState, TraceRecord)> {
    let fp = motion_fiedler(state, scenario)?;
    let grad = spectral::connectivity_gradient(state, scenario, &fp, &scenario.weights)?;
    let coeffs = spectral::edge_coefficients(scenario, &fp, &scenario.weights);
    let mut next = ascend(state, scenario, &grad, &coeffs)?;
    next.t = t;
    let next = jammer_step(&next, scenario, t)?;
    let (next, eta) = with_allocation(next, scenario)?;
    let rec = record(&next, scenario, eta)?;
    Ok((next, rec))
}

/// Relay move along `grad`, halving the gain until the frozen-coefficient
/// connectivity surrogate at the current powers does not drop. Stays put if
/// no tried step qualifies.
fn ascend(
    state: &NetworkState,
    scenario: &Scenario,
    grad: &GradientVector,
    coeffs: &[((usize, usize), f64)],
) -> Result<NetworkState> {
    let mut cfg = scenario.motion;
    if cfg.backtrack == 0 {
        return Ok(step_trajectory(state, scenario, grad, &cfg));
    }
    let q0 = spectral::surrogate(state, scenario, coeffs)?;
    for _ in 0..=cfg.backtrack {
        let next = step_trajectory(state, scenario, grad, &cfg);
        match spectral::surrogate(&next, scenario, coeffs) {
            Ok(q) if q >= q0 => return Ok(next),
            Ok(_) | Err(Error::DegenerateGeometry(_)) => {}
            Err(e) => return Err(e),
        }
        cfg.dt *= 0.5;
        cfg.max_step *= 0.5;
    }
    Ok(state.clone())
}

fn failure(e: &Error) -> RunStatus {
    RunStatus::Failed {
        infeasible: matches!(e, Error::Infeasible { .. } | Error::InfeasibleExpansion { .. }),
        message: e.to_string(),
    }
}

/// Alternates relay motion, interferer moves and power allocation until the
/// flow changes by at most `scenario.eps_bps` between consecutive
/// iterations or `scenario.max_iters` iterations have run.
///
/// The record at `t = 0` holds the initial geometry with its allocated
/// powers. A failure ends the run with the records gathered so far.
pub fn alternating_optimize(scenario: &Scenario) -> SimulationTrace {
    let mut records = Vec::new();
    let initial = scenario.initial_state();
    let mut state = match with_allocation(initial, scenario).and_then(|(s, eta)| {
        let rec = record(&s, scenario, eta)?;
        Ok((s, rec))
    }) {
        Ok((s, rec)) => {
            records.push(rec);
            s
        }
        Err(e) => return SimulationTrace { records, status: failure(&e) },
    };
    for t in 1..=scenario.max_iters {
        match one_iteration(&state, scenario, t) {
            Ok((next, rec)) => {
                let prev = records.last().map(|r: &TraceRecord| r.flow_bps).unwrap_or(f64::NAN);
                let delta = (rec.flow_bps - prev).abs();
                records.push(rec);
                state = next;
                if t >= 2 && delta <= scenario.eps_bps {
                    return SimulationTrace { records, status: RunStatus::Converged };
                }
            }
            Err(e) => return SimulationTrace { records, status: failure(&e) },
        }
    }
    SimulationTrace { records, status: RunStatus::IterationCap }
}

/// Runs independent simulations concurrently, one per scenario, in order.
pub fn run_sweep(scenarios: &[Scenario]) -> Vec<SimulationTrace> {
    scenarios.par_iter().map(alternating_optimize).collect()
}
