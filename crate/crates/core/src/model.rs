//! Resolved problem description and per-iteration network state.
//!
//! Nodes of the relay network are indexed `0..n`: node `0` is the base
//! station (flow source), node `n - 1` the desired UE (flow sink), and the
//! relays sit in between in chain order.

use crate::flow::Topology;
use crate::mission::{InterfererPolicy, MotionConfig};
use crate::power::{ConstraintSet, PowerVector};
use crate::radio::{ChannelParams, FadingTable, Position, Role, SafetyParams};
use crate::spectral::NodeWeights;

/// Anything that has a position and takes part in a radio link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entity {
    Node(usize),
    Interferer(usize),
    PrimaryUe(usize),
}

/// How the interferers behave and, with it, which optimizer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceMode {
    /// Co-existing primary network: power allocation honours interference
    /// caps and primary QoS.
    Reckless,
    /// Jammers: constraints dropped, relays transmit at full power.
    Smart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interferer {
    pub role: Role,
    pub policy: InterfererPolicy,
    /// Configured transmit power (upper bound when cooperating).
    pub power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub eps_bps: f64,
    pub max_iters: usize,
}

/// Immutable, fully resolved problem. All powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub channel: ChannelParams,
    pub safety: SafetyParams,
    pub node_roles: Vec<Role>,
    pub interferers: Vec<Interferer>,
    pub primary_ues: Vec<Position>,
    pub weights: NodeWeights,
    pub constraints: ConstraintSet,
    pub motion: MotionConfig,
    pub topology: Topology,
    pub mode: InterferenceMode,
    pub fading: FadingTable,
    pub eps_bps: f64,
    pub max_iters: usize,
    pub sca: ScaOptions,
    pub initial_nodes: Vec<Position>,
    pub initial_interferers: Vec<Position>,
}

impl Scenario {
    pub fn n_nodes(&self) -> usize {
        self.node_roles.len()
    }

    pub fn n_interferers(&self) -> usize {
        self.interferers.len()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.n_nodes() - 1
    }

    /// Relays are the only nodes that move.
    pub fn is_movable(&self, node: usize) -> bool {
        node != self.source() && node != self.sink()
    }

    pub fn role(&self, e: Entity) -> Role {
        match e {
            Entity::Node(i) => self.node_roles[i],
            Entity::Interferer(m) => self.interferers[m].role,
            Entity::PrimaryUe(_) => Role::Ground,
        }
    }

    /// Flat index into the fading table.
    pub fn entity_index(&self, e: Entity) -> usize {
        match e {
            Entity::Node(i) => i,
            Entity::Interferer(m) => self.n_nodes() + m,
            Entity::PrimaryUe(u) => self.n_nodes() + self.n_interferers() + u,
        }
    }

    pub fn position(&self, e: Entity, state: &NetworkState) -> Position {
        match e {
            Entity::Node(i) => state.nodes[i],
            Entity::Interferer(m) => state.interferers[m],
            Entity::PrimaryUe(u) => self.primary_ues[u],
        }
    }

    /// Configured interferer powers.
    pub fn interferer_powers(&self) -> Vec<f64> {
        self.interferers.iter().map(|j| j.power_w).collect()
    }

    /// Initial state with every relay at full power and interferers at their
    /// configured power.
    pub fn initial_state(&self) -> NetworkState {
        NetworkState {
            nodes: self.initial_nodes.clone(),
            interferers: self.initial_interferers.clone(),
            power: PowerVector {
                p: vec![self.constraints.p_max_w; self.n_nodes()],
                pj: self.interferer_powers(),
            },
            t: 0,
        }
    }
}

/// Mutable per-iteration state: positions and powers of everything that
/// moves or transmits.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub nodes: Vec<Position>,
    pub interferers: Vec<Position>,
    pub power: PowerVector,
    pub t: usize,
}
