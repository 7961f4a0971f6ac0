//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p uavnet --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::json;
use uavnet::flow::{max_flow, min_cut_bruteforce};
use uavnet::mission::motion_fiedler;
use uavnet::power::{self, PowerVector};
use uavnet::spectral::{cheeger_bounds_check, NodeWeights};
use uavnet::trace::trace_to_string;
use uavnet::{alternating_optimize, radio, Entity, NetworkState, Scenario, ScenarioConfig, TraceFile};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn final_flow(sc: &Scenario) -> f64 {
    alternating_optimize(sc).final_flow().unwrap_or(f64::NAN)
}

fn seeded(doc: serde_json::Value) -> Scenario {
    let mut doc = doc;
    doc["schema_version"] = json!(1);
    doc["seed"] = json!(1);
    common::scenario(doc)
}

fn max_flow_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let g = common::random_graph(&mut rng, n, 0.5);
        worst = worst.max((max_flow(&g).value - min_cut_bruteforce(&g).unwrap()).abs());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-9 && within(t, 5), format!("max |flow - cut| = {worst:.2e}, {t:.2?}"))
}

fn cheeger() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(102);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let g = common::random_graph(&mut rng, n, 0.5);
        let w = NodeWeights::new((0..n).map(|_| rng.random_range(0.5..10.0)).collect()).unwrap();
        let b = cheeger_bounds_check(&g, &w).unwrap();
        worst = worst.min((b.h_w - b.lower).min(b.upper - b.h_w));
    }
    let t = start.elapsed();
    outcome(worst >= -1e-9 && within(t, 10), format!("smallest slack {worst:.2e}, {t:.2?}"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(103);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let relays = rng.random_range(2..=6);
        let intf = rng.random_range(1..=2);
        let sc = common::random_scenario(&mut rng, relays, intf);
        let st = sc.initial_state();
        let fp = motion_fiedler(&st, &sc).unwrap();
        worst = worst.max(common::surrogate_gradient_mismatch(&sc, &st, &fp));
    }
    let t = start.elapsed();
    outcome(worst <= 1e-4 && within(t, 10), format!("worst relative mismatch {worst:.2e}, {t:.2?}"))
}

/// Returns the relative error against `min(P_max, I^max / |h|^2)` for a lone
/// BS-UE link with an interferer beside the UE.
fn single_link_error(i_max_dbm: f64) -> f64 {
    let mut sc = common::scenario(json!({
        "schema_version": 1, "seed": 1,
        "relays": { "count": 1 },
        "ue": { "x": 60.0, "y": 0.0, "altitude_m": 25.0, "role": "aerial" },
        "interferers": [{ "position": [70.0, 5.0, 20.0] }],
        "constraints": { "i_max_dbm": i_max_dbm },
    }));
    sc.node_roles.remove(1);
    sc.initial_nodes.remove(1);
    sc.weights = NodeWeights::new(vec![10.0, 10.0]).unwrap();
    let st = sc.initial_state();
    let out = power::allocate(&st, &sc).unwrap();
    (0..2)
        .map(|i| {
            let h = radio::gain_sq(Entity::Node(i), Entity::Interferer(0), &st, &sc).unwrap();
            let want = sc.constraints.p_max_w.min(sc.constraints.i_max_w[0] / h);
            common::rel_err(out.power.p[i], want)
        })
        .fold(0.0, f64::max)
}

fn sca_soundness() -> Outcome {
    let mut rng = common::rng(104);
    let (mut solved, mut rounds, mut drop, mut violation) = (0, 0, 0.0f64, 0.0f64);
    while solved < 50 {
        let sc = common::sca_instance(&mut rng, false);
        let st = sc.initial_state();
        let Ok(init) = power::initial_power(&st, &sc) else { continue };
        let out = match power::sca_loop(&st, &sc, init, sc.sca.eps_bps) {
            Ok(out) => out,
            Err(e) => return outcome(false, format!("instance {solved}: {e}")),
        };
        rounds = rounds.max(out.history.len() - 1);
        for w in out.history.windows(2) {
            drop = drop.max(w[0] - w[1]);
        }
        for p in &out.iterates {
            let s = power::constraint_slacks(&NetworkState { power: p.clone(), ..st.clone() }, &sc).unwrap();
            violation = violation.max(-s.interference_w.min(s.qos_bps).min(s.power_box_w));
        }
        solved += 1;
    }
    let single = [-70.0, -50.0, -30.0].map(single_link_error).into_iter().fold(0.0, f64::max);
    outcome(
        drop <= 1e-9 && violation <= 1e-9 && rounds <= 100 && single <= 1e-6,
        format!("max eta drop {drop:.1e}, max violation {violation:.1e}, max rounds {rounds}, single-link error {single:.1e}"),
    )
}

fn minorant() -> Outcome {
    let mut rng = common::rng(105);
    let (mut above, mut at_expansion, mut points) = (f64::NEG_INFINITY, 0.0f64, 0);
    while points < 1000 {
        let sc = common::random_scenario(&mut rng, 3, 2);
        let st = sc.initial_state();
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| PowerVector {
            p: (0..sc.n_nodes()).map(|_| rng.random_range(1e-6..sc.constraints.p_max_w)).collect(),
            pj: (0..2).map(|_| rng.random_range(0.0..2.0)).collect(),
        };
        let x0 = draw(&mut rng);
        for (i, j) in sc.topology.edges(sc.n_nodes()) {
            let split = power::dc_split(i, j, &st, &sc).unwrap();
            let lin = power::taylor_linearize_r(&split, &x0);
            let gap = |x: &PowerVector| {
                let approx = split.v(x.p[i], x.p[j], &x.pj) - lin.eval(&x.pj);
                let exact = split.capacity(x.p[i], x.p[j], &x.pj);
                (approx - exact) / exact.max(1.0)
            };
            at_expansion = at_expansion.max(gap(&x0).abs());
            for _ in 0..10 {
                above = above.max(gap(&draw(&mut rng)));
                points += 1;
            }
        }
    }
    outcome(
        above <= 1e-10 && at_expansion <= 1e-10,
        format!("{points} points, max (a~ - a)/a {above:.1e}, expansion mismatch {at_expansion:.1e}"),
    )
}

fn interference_threshold() -> Outcome {
    let start = Instant::now();
    let flows = [-50.0, -30.0, -10.0].map(|i| final_flow(&seeded(json!({ "constraints": { "i_max_dbm": i } }))));
    let t = start.elapsed();
    outcome(
        flows[0] <= flows[1] && flows[1] <= flows[2] && within(t, 120),
        format!("flow at -50/-30/-10 dBm: {:.3} / {:.3} / {:.3} bits/s, {t:.2?}", flows[0], flows[1], flows[2]),
    )
}

fn three_d() -> Outcome {
    let xy = final_flow(&seeded(json!({ "motion": { "dims": "xy" } })));
    let xyz = final_flow(&seeded(json!({ "motion": { "dims": "xyz" } })));
    outcome(xyz >= xy, format!("XYZ {xyz:.3}, XY {xy:.3}, ratio {:.4}", xyz / xy))
}

fn weighted_cheeger() -> Outcome {
    let weighted = final_flow(&seeded(json!({})));
    let plain = final_flow(&seeded(json!({ "weights": { "source": 1.0, "sink": 1.0, "relay": 1.0 } })));
    outcome(weighted >= plain, format!("weighted {weighted:.3}, unweighted {plain:.3}"))
}

fn smart_jammer() -> Outcome {
    let run = |policy: serde_json::Value| {
        let mut intf = json!({ "position": [100.0, 30.0, 20.0] });
        intf.as_object_mut().unwrap().extend(policy.as_object().unwrap().clone());
        final_flow(&seeded(json!({ "mode": "smart", "interferers": [intf] })))
    };
    let tau1 = run(json!({ "policy": "smart", "tau": 1 }));
    let tau10 = run(json!({ "policy": "smart", "tau": 10 }));
    let naive = run(json!({ "policy": "naive", "role": "aerial" }));
    outcome(tau1 <= tau10 && tau10 <= naive, format!("tau=1 {tau1:.3}, tau=10 {tau10:.3}, naive {naive:.3}"))
}

fn ue_altitude() -> Outcome {
    let flows = [25.0, 200.0, 500.0].map(|h| final_flow(&seeded(json!({ "ue": { "altitude_m": h } }))));
    outcome(
        flows[1] > flows[0] && flows[1] > flows[2],
        format!("flow at 25/200/500 m: {:.3} / {:.3} / {:.3}", flows[0], flows[1], flows[2]),
    )
}

fn determinism() -> Outcome {
    let cfg = ScenarioConfig::with_seed(1);
    let bytes = || {
        trace_to_string(&TraceFile {
            scenario_hash: cfg.hash(),
            seed: 1,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            trace: alternating_optimize(&cfg.resolve().unwrap()),
        })
    };
    let (a, b) = (bytes(), bytes());
    outcome(a == b, format!("{} bytes per trace", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("max-flow oracle", max_flow_oracle),
        ("Cheeger inequalities", cheeger),
        ("gradient correctness", gradients),
        ("SCA soundness", sca_soundness),
        ("minorant property", minorant),
        ("interference threshold trend", interference_threshold),
        ("3D vs 2D trend", three_d),
        ("weighted vs unweighted Cheeger trend", weighted_cheeger),
        ("smart jammer trend", smart_jammer),
        ("UE altitude trend", ue_altitude),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("{} criterion {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("acceptance: {} of 11 passed in {:.1?}", 11 - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
