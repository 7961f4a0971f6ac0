//! Scenario files: JSON schema with defaults, validation, resolution into a
//! runtime [`Scenario`], hashing and parameter sweeps.
//!
//! Powers in the file are in dBm; everything downstream is in watts. The
//! conversion happens here and nowhere else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::Topology;
use crate::mission::{Dims, InterfererPolicy, MotionConfig};
use crate::model::{InterferenceMode, Interferer, ScaOptions, Scenario};
use crate::power::ConstraintSet;
use crate::radio::{self, ChannelParams, FadingModel, FadingTable, Position, Role, SafetyParams};
use crate::spectral::NodeWeights;

pub const SCHEMA_VERSION: u32 = 1;

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "defaults::bs")]
    pub bs: [f64; 3],
    #[serde(default)]
    pub ue: UeConfig,
    #[serde(default)]
    pub relays: RelayConfig,
    #[serde(default = "defaults::interferers")]
    pub interferers: Vec<InterfererConfig>,
    #[serde(default)]
    pub primary_ues: Vec<[f64; 3]>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default)]
    pub constraints: ConstraintConfig,
    #[serde(default)]
    pub motion: MotionSection,
    #[serde(default = "defaults::topology")]
    pub topology: Topology,
    #[serde(default = "defaults::mode")]
    pub mode: ModeConfig,
    #[serde(default = "defaults::fading")]
    pub fading: FadingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Reckless,
    Smart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingConfig {
    Unit,
    ComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyConfig {
    Naive,
    RecklessMobile,
    Smart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    #[serde(default = "defaults::ue_x")]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default = "defaults::ue_altitude")]
    pub altitude_m: f64,
    #[serde(default = "defaults::ground")]
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    #[serde(default = "defaults::relay_count")]
    pub count: usize,
    /// Used when `positions` is absent.
    #[serde(default = "defaults::placement")]
    pub placement: Placement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Evenly spaced on the BS-UE segment.
    Line,
    /// Seeded uniform draw over the corridor between BS and UE, ordered by
    /// distance from the BS.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfererConfig {
    /// Drawn from the scenario seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default = "defaults::interferer_dbm")]
    pub power_dbm: f64,
    #[serde(default = "defaults::policy")]
    pub policy: PolicyConfig,
    #[serde(default = "defaults::one")]
    pub tau: usize,
    #[serde(default)]
    pub waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pub speed_m: f64,
    /// Ground unless the policy is smart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "defaults::alpha_a2a")]
    pub alpha_a2a: f64,
    #[serde(default = "defaults::alpha_a2g")]
    pub alpha_a2g: f64,
    /// Free-space reference loss at the carrier when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_a2a_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_a2g_db: Option<f64>,
    #[serde(default = "defaults::carrier")]
    pub carrier_hz: f64,
    #[serde(default = "defaults::bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "defaults::noise_dbm")]
    pub noise_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyConfig {
    #[serde(default = "defaults::one_f")]
    pub chi_w: f64,
    #[serde(default = "defaults::one_f")]
    pub zeta: f64,
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
    #[serde(default = "defaults::y0")]
    pub y0: f64,
    #[serde(default = "defaults::r_int")]
    pub r_int_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default = "defaults::endpoint_weight")]
    pub source: f64,
    #[serde(default = "defaults::endpoint_weight")]
    pub sink: f64,
    #[serde(default = "defaults::one_f")]
    pub relay: f64,
    /// Full per-node list (BS, relays, UE); overrides the three fields above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_node: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    #[serde(default = "defaults::p_max_dbm")]
    pub p_max_dbm: f64,
    /// Applied to every interferer.
    #[serde(default = "defaults::i_max_dbm")]
    pub i_max_dbm: f64,
    #[serde(default)]
    pub r_th_bps: f64,
    #[serde(default)]
    pub cooperative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::dims")]
    pub dims: Dims,
    #[serde(default = "defaults::one_f")]
    pub z_min_m: f64,
    #[serde(default = "defaults::max_step")]
    pub max_step_m: f64,
    #[serde(default = "defaults::backtrack")]
    pub backtrack: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Outer convergence tolerance on the flow (bits/s).
    #[serde(default = "defaults::one_f")]
    pub eps_bps: f64,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::sca_eps")]
    pub sca_eps_bps: f64,
    #[serde(default = "defaults::sca_max_iters")]
    pub sca_max_iters: usize,
}

mod defaults {
    use super::*;

    pub fn bs() -> [f64; 3] {
        [0.0, 0.0, 15.0]
    }
    pub fn ue_x() -> f64 {
        200.0
    }
    pub fn ue_altitude() -> f64 {
        25.0
    }
    pub fn ground() -> Role {
        Role::Ground
    }
    pub fn relay_count() -> usize {
        8
    }
    pub fn placement() -> Placement {
        Placement::Line
    }
    pub fn interferers() -> Vec<InterfererConfig> {
        vec![InterfererConfig::default()]
    }
    pub fn interferer_dbm() -> f64 {
        30.0
    }
    pub fn policy() -> PolicyConfig {
        PolicyConfig::Naive
    }
    pub fn one() -> usize {
        1
    }
    pub fn one_f() -> f64 {
        1.0
    }
    pub fn alpha_a2a() -> f64 {
        2.05
    }
    pub fn alpha_a2g() -> f64 {
        2.32
    }
    pub fn carrier() -> f64 {
        2e9
    }
    pub fn bandwidth() -> f64 {
        1e4
    }
    pub fn noise_dbm() -> f64 {
        -134.0
    }
    pub fn kappa() -> f64 {
        10.0
    }
    pub fn y0() -> f64 {
        1e-3
    }
    pub fn r_int() -> f64 {
        5.0
    }
    pub fn endpoint_weight() -> f64 {
        10.0
    }
    pub fn p_max_dbm() -> f64 {
        20.0
    }
    pub fn i_max_dbm() -> f64 {
        -30.0
    }
    pub fn dt() -> f64 {
        1.5
    }
    pub fn dims() -> Dims {
        Dims::Xyz
    }
    pub fn max_step() -> f64 {
        5.0
    }
    pub fn backtrack() -> usize {
        10
    }
    pub fn max_iters() -> usize {
        500
    }
    pub fn sca_eps() -> f64 {
        1e-3
    }
    pub fn sca_max_iters() -> usize {
        100
    }
    pub fn topology() -> Topology {
        Topology::Line
    }
    pub fn mode() -> ModeConfig {
        ModeConfig::Reckless
    }
    pub fn fading() -> FadingConfig {
        FadingConfig::Unit
    }
}

/// Serde-driven `Default` impls: a section's default is whatever an empty
/// JSON object deserializes to.
macro_rules! default_from_empty {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                serde_json::from_str("{}").expect("all fields defaulted")
            }
        }
    )*};
}

default_from_empty!(
    UeConfig,
    RelayConfig,
    InterfererConfig,
    ChannelConfig,
    SafetyConfig,
    WeightConfig,
    ConstraintConfig,
    MotionSection,
    SolverConfig
);

impl ScenarioConfig {
    /// All defaults, with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg: Self = serde_json::from_value(serde_json::json!({ "schema_version": SCHEMA_VERSION }))
            .expect("all fields defaulted");
        cfg.seed = Some(seed);
        cfg
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks ranges; the schema itself is enforced while parsing.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let c = &self.channel;
        positive("channel.bandwidth_hz", c.bandwidth_hz)?;
        positive("channel.carrier_hz", c.carrier_hz)?;
        finite("channel.noise_dbm", c.noise_dbm)?;
        if !(c.alpha_a2a >= 2.0) {
            return Err(range("channel.alpha_a2a", "path-loss exponent must be at least 2"));
        }
        if !(c.alpha_a2g >= 2.0) {
            return Err(range("channel.alpha_a2g", "path-loss exponent must be at least 2"));
        }
        for (f, v) in [("channel.eta_a2a_db", c.eta_a2a_db), ("channel.eta_a2g_db", c.eta_a2g_db)] {
            if let Some(v) = v {
                finite(f, v)?;
            }
        }
        let s = &self.safety;
        nonnegative("safety.chi_w", s.chi_w)?;
        nonnegative("safety.zeta", s.zeta)?;
        nonnegative("safety.kappa", s.kappa)?;
        positive("safety.y0", s.y0)?;
        positive("safety.r_int_m", s.r_int_m)?;
        if self.relays.count == 0 {
            return Err(range("relays.count", "at least one relay is required"));
        }
        if let Some(p) = &self.relays.positions {
            if p.len() != self.relays.count {
                return Err(range(
                    "relays.positions",
                    format!("{} positions given for {} relays", p.len(), self.relays.count),
                ));
            }
        }
        for (k, i) in self.interferers.iter().enumerate() {
            finite(&format!("interferers[{k}].power_dbm"), i.power_dbm)?;
            if i.tau == 0 {
                return Err(range(&format!("interferers[{k}].tau"), "must be a positive integer"));
            }
            nonnegative(&format!("interferers[{k}].speed_m"), i.speed_m)?;
        }
        let w = &self.weights;
        positive("weights.source", w.source)?;
        positive("weights.sink", w.sink)?;
        positive("weights.relay", w.relay)?;
        if let Some(per) = &w.per_node {
            if per.len() != self.relays.count + 2 {
                return Err(range(
                    "weights.per_node",
                    format!("{} weights for {} nodes", per.len(), self.relays.count + 2),
                ));
            }
            for (k, v) in per.iter().enumerate() {
                positive(&format!("weights.per_node[{k}]"), *v)?;
            }
        }
        let k = &self.constraints;
        finite("constraints.p_max_dbm", k.p_max_dbm)?;
        finite("constraints.i_max_dbm", k.i_max_dbm)?;
        nonnegative("constraints.r_th_bps", k.r_th_bps)?;
        let m = &self.motion;
        nonnegative("motion.dt", m.dt)?;
        positive("motion.max_step_m", m.max_step_m)?;
        finite("motion.z_min_m", m.z_min_m)?;
        let v = &self.solver;
        nonnegative("solver.eps_bps", v.eps_bps)?;
        nonnegative("solver.sca_eps_bps", v.sca_eps_bps)?;
        if v.sca_max_iters == 0 {
            return Err(range("solver.sca_max_iters", "must be positive"));
        }
        Ok(())
    }

    /// Builds the runtime scenario. A seed is required.
    pub fn resolve(&self) -> Result<Scenario> {
        self.validate()?;
        let seed = self
            .seed
            .ok_or_else(|| schema("seed", "a seed is required to run a scenario"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let bs = point(self.bs);
        let ue = Position::new(self.ue.x, self.ue.y, self.ue.altitude_m);
        let k = self.relays.count;
        let span = ue.distance(&bs).max(1.0);
        let along = |f: f64| Position::new(bs.x + f * (ue.x - bs.x), bs.y + f * (ue.y - bs.y), bs.z + f * (ue.z - bs.z));
        let relays: Vec<Position> = match (&self.relays.positions, self.relays.placement) {
            (Some(ps), _) => ps.iter().copied().map(point).collect(),
            (None, Placement::Line) => (1..=k).map(|i| along(i as f64 / (k + 1) as f64)).collect(),
            (None, Placement::Random) => {
                // Uniform offsets around the segment; the chain order follows
                // the projection onto it.
                let mut drawn: Vec<(f64, Position)> = (0..k)
                    .map(|_| {
                        let f = rng.random_range(0.05..0.95);
                        let base = along(f);
                        let p = Position::new(
                            base.x,
                            base.y + rng.random_range(-0.15 * span..0.15 * span),
                            (base.z + rng.random_range(-0.05 * span..0.05 * span)).max(self.motion.z_min_m),
                        );
                        (f, p)
                    })
                    .collect();
                drawn.sort_by(|a, b| a.0.total_cmp(&b.0));
                drawn.into_iter().map(|(_, p)| p).collect()
            }
        };
        let mut nodes = vec![bs];
        nodes.extend(relays);
        nodes.push(ue);
        let mut node_roles = vec![Role::Ground];
        node_roles.extend(std::iter::repeat_n(Role::Aerial, k));
        node_roles.push(self.ue.role);

        // Every interferer consumes a draw so an explicit position does not
        // shift the others.
        let mut interferers = Vec::new();
        let mut initial_interferers = Vec::new();
        for cfg in &self.interferers {
            let drawn = Position::new(
                rng.random_range(0.25 * span..0.75 * span),
                rng.random_range(-0.25 * span..0.25 * span),
                20.0,
            );
            initial_interferers.push(cfg.position.map(point).unwrap_or(drawn));
            let policy = match cfg.policy {
                PolicyConfig::Naive => InterfererPolicy::Naive,
                PolicyConfig::RecklessMobile => InterfererPolicy::RecklessMobile {
                    waypoints: cfg.waypoints.iter().copied().map(point).collect(),
                    speed_m: cfg.speed_m,
                },
                PolicyConfig::Smart => InterfererPolicy::Smart { tau: cfg.tau },
            };
            let role = cfg.role.unwrap_or(match cfg.policy {
                PolicyConfig::Smart => Role::Aerial,
                _ => Role::Ground,
            });
            interferers.push(Interferer { role, policy, power_w: dbm_to_w(cfg.power_dbm) });
        }

        let c = &self.channel;
        let eta0 = radio::reference_loss_db(c.carrier_hz);
        let channel = ChannelParams {
            alpha_a2a: c.alpha_a2a,
            alpha_a2g: c.alpha_a2g,
            eta_a2a_db: c.eta_a2a_db.unwrap_or(eta0),
            eta_a2g_db: c.eta_a2g_db.unwrap_or(eta0),
            carrier_hz: c.carrier_hz,
            bandwidth_hz: c.bandwidth_hz,
            noise_w: dbm_to_w(c.noise_dbm),
        };
        let s = &self.safety;
        let safety = SafetyParams { chi: s.chi_w, zeta: s.zeta, kappa: s.kappa, y0: s.y0, r_int: s.r_int_m };
        let n = nodes.len();
        let weights = match &self.weights.per_node {
            Some(w) => NodeWeights::new(w.clone())?,
            None => {
                let mut w = vec![self.weights.relay; n];
                w[0] = self.weights.source;
                w[n - 1] = self.weights.sink;
                NodeWeights::new(w)?
            }
        };
        let constraints = ConstraintSet {
            p_max_w: dbm_to_w(self.constraints.p_max_dbm),
            i_max_w: vec![dbm_to_w(self.constraints.i_max_dbm); interferers.len()],
            r_th_bps: self.constraints.r_th_bps,
            cooperative: self.constraints.cooperative,
        };
        let primary_ues: Vec<Position> = self.primary_ues.iter().copied().map(point).collect();
        let fading = FadingTable::new(
            match self.fading {
                FadingConfig::Unit => FadingModel::Unit,
                FadingConfig::ComplexGaussian => FadingModel::ComplexGaussian { seed },
            },
            n + interferers.len() + primary_ues.len(),
        );
        Ok(Scenario {
            seed,
            channel,
            safety,
            node_roles,
            interferers,
            primary_ues,
            weights,
            constraints,
            motion: MotionConfig {
                dt: self.motion.dt,
                dims: self.motion.dims,
                z_min: self.motion.z_min_m,
                max_step: self.motion.max_step_m,
                backtrack: self.motion.backtrack,
            },
            topology: self.topology,
            mode: match self.mode {
                ModeConfig::Reckless => InterferenceMode::Reckless,
                ModeConfig::Smart => InterferenceMode::Smart,
            },
            fading,
            eps_bps: self.solver.eps_bps,
            max_iters: self.solver.max_iters,
            sca: ScaOptions { eps_bps: self.solver.sca_eps_bps, max_iters: self.solver.sca_max_iters },
            initial_nodes: nodes,
            initial_interferers,
        })
    }

    /// Sets one field by dotted path or sweep alias, leaving the rest intact.
    pub fn with_field(&self, field: &str, raw: &str) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        match field {
            "tau" => {
                let list = doc["interferers"].as_array_mut().ok_or_else(|| schema("interferers", "not a list"))?;
                for intf in list {
                    if raw == "naive" {
                        intf["policy"] = Value::from("naive");
                    } else {
                        intf["policy"] = Value::from("smart");
                        intf["tau"] = scalar(raw);
                    }
                }
            }
            _ => {
                let path = alias(field);
                let mut slot = &mut doc;
                for key in path.split('.') {
                    let obj = slot.as_object_mut().ok_or_else(|| schema(field, "path does not name a field"))?;
                    slot = obj.entry(key.to_string()).or_insert(Value::Null);
                }
                *slot = scalar(raw);
            }
        }
        let cfg = from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn alias(field: &str) -> &str {
    match field {
        "i_max_dbm" | "I_max_dbm" => "constraints.i_max_dbm",
        "p_max_dbm" => "constraints.p_max_dbm",
        "r_th_bps" => "constraints.r_th_bps",
        "ue_altitude_m" | "h_ue" => "ue.altitude_m",
        "relays" => "relays.count",
        "dims" => "motion.dims",
        "dt" => "motion.dt",
        other => other,
    }
}

fn scalar(raw: &str) -> Value {
    serde_json::from_str::<Value>(raw)
        .ok()
        .filter(|v| !v.is_object() && !v.is_array())
        .unwrap_or_else(|| Value::from(raw))
}

fn point(p: [f64; 3]) -> Position {
    Position::new(p[0], p[1], p[2])
}

fn schema(field: &str, message: impl Into<String>) -> Error {
    Error::Schema { field: field.to_string(), message: message.into() }
}

fn range(field: &str, message: impl Into<String>) -> Error {
    Error::Range { field: field.to_string(), message: message.into() }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(range(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(range(field, format!("must be positive, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(range(field, format!("must be non-negative, got {v}")))
    }
}

fn path_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> Error {
    let path = e.path().to_string();
    schema(if path.is_empty() { "." } else { &path }, e.inner().to_string())
}

fn from_value(v: Value) -> Result<ScenarioConfig> {
    serde_path_to_error::deserialize(v).map_err(path_error)
}

/// Parses and validates scenario JSON.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(path_error)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses, validates and resolves scenario JSON in one go.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_config(text)?.resolve()
}

pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

/// `FIELD=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub field: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (field, values) = s
            .split_once('=')
            .ok_or_else(|| schema("sweep", format!("expected FIELD=v1,v2,... but got `{s}`")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if field.trim().is_empty() || values.is_empty() {
            return Err(schema("sweep", format!("expected FIELD=v1,v2,... but got `{s}`")));
        }
        Ok(Self { field: field.trim().to_string(), values })
    }
}

impl SweepSpec {
    /// One config per value, in order.
    pub fn expand(&self, base: &ScenarioConfig) -> Vec<Result<ScenarioConfig>> {
        self.values.iter().map(|v| base.with_field(&self.field, v)).collect()
    }

    /// File-name-safe suffix for value `k`.
    pub fn suffix(&self, k: usize) -> String {
        let clean = |s: &str| -> String {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
                .collect()
        };
        format!("{}_{}", clean(&self.field), clean(&self.values[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"schema_version": 1, "seed": 1}"#
    }

    #[test]
    fn empty_overrides_give_table_defaults() {
        let cfg = parse_config(minimal()).unwrap();
        let sc = cfg.resolve().unwrap();
        assert_eq!(sc.channel.alpha_a2a, 2.05);
        assert_eq!(sc.channel.alpha_a2g, 2.32);
        assert!((sc.constraints.p_max_w - 0.1).abs() < 1e-15);
        assert!((sc.interferers[0].power_w - 1.0).abs() < 1e-15);
        assert_eq!(sc.channel.bandwidth_hz, 1e4);
        assert_eq!(sc.safety.r_int, 5.0);
        assert_eq!(sc.channel.carrier_hz, 2e9);
        assert_eq!((sc.safety.zeta, sc.safety.kappa, sc.safety.y0, sc.safety.chi), (1.0, 10.0, 1e-3, 1.0));
        assert_eq!(sc.initial_nodes[0], Position::new(0.0, 0.0, 15.0));
        assert_eq!(*sc.initial_nodes.last().unwrap(), Position::new(200.0, 0.0, 25.0));
        assert_eq!(sc.n_nodes(), 10);
        assert!((sc.channel.eta_a2a_db - 38.4624).abs() < 1e-3);
    }

    #[test]
    fn negative_dbm_accepted_string_rejected() {
        let ok = r#"{"schema_version": 1, "constraints": {"p_max_dbm": -5}}"#;
        assert_eq!(parse_config(ok).unwrap().constraints.p_max_dbm, -5.0);
        let bad = r#"{"schema_version": 1, "constraints": {"p_max_dbm": "high"}}"#;
        match parse_config(bad) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "constraints.p_max_dbm"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_version_and_unknown_fields() {
        assert!(matches!(parse_config("{}"), Err(Error::Schema { .. })));
        match parse_config(r#"{"schema_version": 1, "chanel": {}}"#) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("chanel")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_bandwidth_is_range_error() {
        let bad = r#"{"schema_version": 1, "channel": {"bandwidth_hz": -1}}"#;
        assert!(matches!(parse_config(bad), Err(Error::Range { .. })));
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(minimal()).unwrap();
        let again = parse_config(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.resolve().unwrap(), again.resolve().unwrap());
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn seed_required_to_resolve() {
        let cfg = parse_config(r#"{"schema_version": 1}"#).unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::Schema { .. })));
    }

    #[test]
    fn random_interferer_inside_box() {
        let sc = parse_scenario(minimal()).unwrap();
        let p = sc.initial_interferers[0];
        assert!((50.0..150.0).contains(&p.x) && (-50.0..50.0).contains(&p.y) && p.z == 20.0);
    }

    #[test]
    fn sweep_fields() {
        let base = parse_config(minimal()).unwrap();
        let spec: SweepSpec = "i_max_dbm=-50,-30,-10".parse().unwrap();
        let cfgs: Vec<_> = spec.expand(&base).into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(cfgs[0].constraints.i_max_dbm, -50.0);
        assert_eq!(cfgs[2].constraints.i_max_dbm, -10.0);
        assert_eq!(spec.suffix(0), "i_max_dbm_-50");

        let tau: SweepSpec = "tau=2,naive".parse().unwrap();
        let cfgs: Vec<_> = tau.expand(&base).into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(cfgs[0].interferers[0].policy, PolicyConfig::Smart);
        assert_eq!(cfgs[0].interferers[0].tau, 2);
        assert_eq!(cfgs[1].interferers[0].policy, PolicyConfig::Naive);

        let dotted = base.with_field("motion.max_step_m", "2.5").unwrap();
        assert_eq!(dotted.motion.max_step_m, 2.5);
        assert!(base.with_field("constraints.p_max_dbm", "loud").is_err());
        assert!("nofield".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn dbm_conversions() {
        assert!((dbm_to_w(30.0) - 1.0).abs() < 1e-15);
        assert!((w_to_dbm(0.1) - 20.0).abs() < 1e-12);
    }
}
