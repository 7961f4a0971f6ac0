//! Physical layer: path loss, channel gains, the safety-augmented SIR used on
//! relay links, and the SINR/rate seen by primary-network users.
//!
//! Every power is in watts. Gains are linear (`|h|^2`, unitless).

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Entity, NetworkState, Scenario};

/// Speed of light used by the free-space reference loss.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Component-wise `self - other`.
    pub fn delta(&self, other: &Position) -> [f64; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }

    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn coord_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

/// Path-loss and link-budget parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub alpha_a2a: f64,
    pub alpha_a2g: f64,
    pub eta_a2a_db: f64,
    pub eta_a2g_db: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_w: f64,
}

impl ChannelParams {
    fn exponent_and_offset(&self, kind: LinkKind) -> (f64, f64) {
        match kind {
            LinkKind::AirToAir => (self.alpha_a2a, self.eta_a2a_db),
            LinkKind::AirToGround => (self.alpha_a2g, self.eta_a2g_db),
        }
    }
}

/// Parameters of the smoothed-step safety penalty.
///
/// `chi` carries watts so that it adds to the interference power in the SIR
/// denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyParams {
    pub chi: f64,
    pub zeta: f64,
    pub kappa: f64,
    pub y0: f64,
    pub r_int: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ground,
    Aerial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    AirToAir,
    AirToGround,
}

impl LinkKind {
    /// Air-to-air only when both ends fly; any terrestrial endpoint makes the
    /// link air-to-ground (ground-ground links included).
    pub fn between(a: Role, b: Role) -> Self {
        match (a, b) {
            (Role::Aerial, Role::Aerial) => LinkKind::AirToAir,
            _ => LinkKind::AirToGround,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingModel {
    Unit,
    ComplexGaussian { seed: u64 },
}

/// Small-scale power gains `|g|^2`, drawn once and frozen, symmetric by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingTable {
    size: usize,
    gains: Vec<f64>,
}

impl FadingTable {
    pub fn new(model: FadingModel, size: usize) -> Self {
        let mut gains = vec![1.0; size * size];
        if let FadingModel::ComplexGaussian { seed } = model {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..size {
                for j in (i + 1)..size {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    let g = (re * scale).powi(2) + (im * scale).powi(2);
                    gains[i * size + j] = g;
                    gains[j * size + i] = g;
                }
            }
        }
        Self { size, gains }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.gains[a * self.size + b]
    }
}

/// Free-space loss at the 1 m reference distance, `10 log10((4 pi f_c / c)^2)`.
pub fn reference_loss_db(carrier_hz: f64) -> f64 {
    let ratio = 4.0 * PI * carrier_hz / SPEED_OF_LIGHT;
    10.0 * (ratio * ratio).log10()
}

pub fn path_loss_db(kind: LinkKind, d: f64, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "link distance {d} m is not positive"
        )));
    }
    let (alpha, eta) = params.exponent_and_offset(kind);
    Ok(alpha * 10.0 * d.log10() + eta)
}

/// Linear channel power gain `|h_{a,b}|^2 = |g_{a,b}|^2 / PL(d_{a,b})`.
pub fn gain_sq(a: Entity, b: Entity, state: &NetworkState, scenario: &Scenario) -> Result<f64> {
    let d = scenario.position(a, state).distance(&scenario.position(b, state));
    gain_at_distance(a, b, d, scenario)
}

pub(crate) fn gain_at_distance(a: Entity, b: Entity, d: f64, scenario: &Scenario) -> Result<f64> {
    if a == b {
        return Err(Error::DegenerateGeometry(format!("self-link on {a:?}")));
    }
    let kind = LinkKind::between(scenario.role(a), scenario.role(b));
    let pl_db = path_loss_db(kind, d, &scenario.channel)?;
    let g = scenario
        .fading
        .get(scenario.entity_index(a), scenario.entity_index(b));
    Ok(g * 10f64.powf(-pl_db / 10.0))
}

/// Path-loss exponent in force on the link `a`-`b`.
pub(crate) fn link_exponent(a: Entity, b: Entity, scenario: &Scenario) -> f64 {
    match LinkKind::between(scenario.role(a), scenario.role(b)) {
        LinkKind::AirToAir => scenario.channel.alpha_a2a,
        LinkKind::AirToGround => scenario.channel.alpha_a2g,
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Smoothed step `zeta * e^(-kappa y - ln y0) / (1 + e^(-kappa y - ln y0))`.
pub fn smoothed_step(y: f64, safety: &SafetyParams) -> f64 {
    safety.zeta * logistic(-safety.kappa * y - safety.y0.ln())
}

/// Derivative of [`smoothed_step`] with respect to `y`.
pub fn smoothed_step_deriv(y: f64, safety: &SafetyParams) -> f64 {
    let s = -safety.kappa * y - safety.y0.ln();
    -safety.kappa * safety.zeta * logistic(s) * logistic(-s)
}

/// The three pieces of `SIR_{i,j}`: `signal / (interference + safety)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirTerms {
    /// `|h_{i,j}|^2` (power not applied).
    pub link_gain: f64,
    pub signal: f64,
    /// `sum_m P^J_m |h_{m,j}|^2`
    pub interference: f64,
    /// `chi * sum_{k != i,j} u(d_{j,k} / r_int)`
    pub safety: f64,
}

impl SirTerms {
    pub fn denominator(&self) -> f64 {
        self.interference + self.safety
    }

    pub fn sir(&self) -> f64 {
        self.signal / self.denominator()
    }
}

/// Safety sum `chi * sum_{k in N \ {i,j}} u(d_{j,k}/r_int)` at receiver `j`.
pub fn safety_term(i: usize, j: usize, state: &NetworkState, scenario: &Scenario) -> f64 {
    let rj = state.nodes[j];
    let sum: f64 = (0..state.nodes.len())
        .filter(|&k| k != i && k != j)
        .map(|k| smoothed_step(rj.distance(&state.nodes[k]) / scenario.safety.r_int, &scenario.safety))
        .sum();
    scenario.safety.chi * sum
}

/// Interference power received at node `j` from every interferer.
pub fn interference_at(j: usize, state: &NetworkState, scenario: &Scenario) -> Result<f64> {
    let mut total = 0.0;
    for (m, pj) in state.power.pj.iter().enumerate() {
        total += pj * gain_sq(Entity::Interferer(m), Entity::Node(j), state, scenario)?;
    }
    Ok(total)
}

pub fn sir_terms(i: usize, j: usize, state: &NetworkState, scenario: &Scenario) -> Result<SirTerms> {
    if i == j {
        return Err(Error::DegenerateGeometry(format!("SIR requested on self-link {i}")));
    }
    let link_gain = gain_sq(Entity::Node(i), Entity::Node(j), state, scenario)?;
    Ok(SirTerms {
        link_gain,
        signal: state.power.p[i] * link_gain,
        interference: interference_at(j, state, scenario)?,
        safety: safety_term(i, j, state, scenario),
    })
}

/// Safety-augmented SIR at node `j` for a transmission from node `i`.
pub fn sir(i: usize, j: usize, state: &NetworkState, scenario: &Scenario) -> Result<f64> {
    let terms = sir_terms(i, j, state, scenario)?;
    if !(terms.denominator() > 0.0) {
        return Err(Error::DegenerateDenominator { from: i, to: j });
    }
    Ok(terms.sir())
}

/// SINR at primary UE `u` served by interferer `m` while relay node `i`
/// transmits.
pub fn sinr_primary(
    m: usize,
    u: usize,
    i: usize,
    state: &NetworkState,
    scenario: &Scenario,
) -> Result<f64> {
    let h_mu = gain_sq(Entity::Interferer(m), Entity::PrimaryUe(u), state, scenario)?;
    let h_iu = gain_sq(Entity::Node(i), Entity::PrimaryUe(u), state, scenario)?;
    Ok(sinr_from_gains(state.power.pj[m], h_mu, state.power.p[i], h_iu, scenario.channel.noise_w))
}

pub fn sinr_from_gains(pj: f64, h_mu: f64, p: f64, h_iu: f64, noise_w: f64) -> f64 {
    pj * h_mu / (p * h_iu + noise_w)
}

/// Primary-link rate `B log2(1 + SINR)` in bits/s.
pub fn primary_rate(
    m: usize,
    u: usize,
    i: usize,
    state: &NetworkState,
    scenario: &Scenario,
) -> Result<f64> {
    let sinr = sinr_primary(m, u, i, state, scenario)?;
    Ok(scenario.channel.bandwidth_hz * (1.0 + sinr).log2())
}
