mod common;

use rand::Rng;
use serde_json::json;
use uavnet::mission::{alternating_optimize, jammer_step, motion_fiedler, record, step_trajectory, Dims, RunStatus};
use uavnet::spectral::{self, GradientVector};

fn random_gradient(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> GradientVector {
    GradientVector((0..n).map(|_| [0; 3].map(|_: i32| rng.random_range(-10.0..10.0))).collect())
}

#[test]
fn zero_gradient_leaves_everyone_in_place() {
    let mut rng = common::rng(81);
    let sc = common::random_scenario(&mut rng, 4, 1);
    let st = sc.initial_state();
    let next = step_trajectory(&st, &sc, &GradientVector::zeros(sc.n_nodes()), &sc.motion);
    assert_eq!(next, st);
}

#[test]
fn endpoints_stay_and_relays_respect_the_floor() {
    let mut rng = common::rng(83);
    for _ in 0..20 {
        let sc = common::random_scenario(&mut rng, 5, 1);
        let st = sc.initial_state();
        let mut grad = random_gradient(&mut rng, sc.n_nodes());
        for g in &mut grad.0 {
            g[2] = -1e3;
        }
        let mut cfg = sc.motion;
        cfg.max_step = 100.0;
        let next = step_trajectory(&st, &sc, &grad, &cfg);
        assert_eq!(next.nodes[sc.source()], st.nodes[sc.source()]);
        assert_eq!(next.nodes[sc.sink()], st.nodes[sc.sink()]);
        assert!(next.nodes.iter().skip(1).take(5).all(|p| p.z >= cfg.z_min));
        for (a, b) in next.nodes.iter().zip(&st.nodes) {
            assert!(a.distance(b) <= cfg.max_step + 1e-9);
        }
    }
}

#[test]
fn planar_motion_keeps_altitude() {
    let mut rng = common::rng(85);
    let sc = common::random_scenario(&mut rng, 4, 1);
    let st = sc.initial_state();
    let mut cfg = sc.motion;
    cfg.dims = Dims::Xy;
    let next = step_trajectory(&st, &sc, &random_gradient(&mut rng, sc.n_nodes()), &cfg);
    for (a, b) in next.nodes.iter().zip(&st.nodes) {
        assert_eq!(a.z, b.z);
    }
    assert_ne!(next.nodes, st.nodes);
}

fn smart(tau: usize) -> uavnet::Scenario {
    common::scenario(json!({
        "schema_version": 1, "seed": 1, "mode": "smart",
        "interferers": [{ "position": [100.0, 30.0, 20.0], "policy": "smart", "tau": tau }],
    }))
}

#[test]
fn naive_jammers_never_move() {
    let sc = common::scenario(json!({ "schema_version": 1, "seed": 2 }));
    let st = sc.initial_state();
    for t in 0..5 {
        assert_eq!(jammer_step(&st, &sc, t).unwrap().interferers, st.interferers);
    }
}

#[test]
fn smart_jammer_acts_every_tau_iterations() {
    let sc = smart(2);
    let st = sc.initial_state();
    assert_ne!(jammer_step(&st, &sc, 2).unwrap().interferers, st.interferers);
    assert_eq!(jammer_step(&st, &sc, 3).unwrap().interferers, st.interferers);
    assert_ne!(jammer_step(&st, &sc, 4).unwrap().interferers, st.interferers);
}

#[test]
fn small_smart_step_lowers_the_surrogate() {
    let mut sc = smart(1);
    sc.motion.dt = 1e-3;
    sc.motion.max_step = 1e-3;
    let st = sc.initial_state();
    let fp = motion_fiedler(&st, &sc).unwrap();
    let coeffs = spectral::edge_coefficients(&sc, &fp, &sc.weights);
    let next = jammer_step(&st, &sc, 1).unwrap();
    let before = spectral::surrogate(&st, &sc, &coeffs).unwrap();
    let after = spectral::surrogate(&next, &sc, &coeffs).unwrap();
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn frozen_geometry_without_interferers_keeps_the_flow() {
    let sc = common::scenario(json!({
        "schema_version": 1, "seed": 4, "interferers": [],
        "motion": { "dt": 0.0 }, "solver": { "max_iters": 5 },
    }));
    let trace = alternating_optimize(&sc);
    assert!(trace.converged());
    let f0 = trace.records[0].flow_bps;
    assert!(trace.records.iter().all(|r| r.flow_bps == f0));
}

#[test]
fn records_replay_from_their_own_state() {
    let mut sc = common::scenario(json!({ "schema_version": 1, "seed": 5 }));
    sc.max_iters = 15;
    let trace = alternating_optimize(&sc);
    assert!(trace.records.len() > 1);
    for rec in &trace.records {
        let again = record(&rec.state(), &sc, rec.eta_bps).unwrap();
        assert!(common::rel_err(again.flow_bps, rec.flow_bps) <= 1e-9);
        assert!(common::rel_err(again.lambda2, rec.lambda2) <= 1e-9);
        assert!(rec.cap_slack_w >= -1e-12);
        assert!(rec.flow_bps >= rec.eta_bps * (1.0 - 1e-9), "line flow equals the weakest link");
    }
}

#[test]
fn default_run_climbs_and_converges() {
    let sc = common::scenario(json!({ "schema_version": 1, "seed": 1 }));
    let trace = alternating_optimize(&sc);
    assert_eq!(trace.status, RunStatus::Converged);
    assert!(trace.iterations() <= 300, "{} iterations", trace.iterations());
    let f: Vec<f64> = trace.records.iter().map(|r| r.flow_bps).collect();
    let up = f.windows(2).filter(|w| w[1] >= w[0]).count();
    assert!(up as f64 >= 0.9 * (f.len() - 1) as f64, "{up} of {} steps nondecreasing", f.len() - 1);
    assert!(f.last().unwrap() > &f[0]);
    for rec in &trace.records {
        assert!(rec.nodes[1..rec.nodes.len() - 1].iter().all(|p| p.z >= sc.motion.z_min));
        assert_eq!(rec.nodes[0], sc.initial_nodes[0]);
    }
}

#[test]
fn aggressive_jammer_hurts_more_than_a_static_one() {
    let every = alternating_optimize(&smart(1)).final_flow().unwrap();
    let mut still = smart(1);
    still.interferers[0].policy = uavnet::mission::InterfererPolicy::Naive;
    let naive = alternating_optimize(&still).final_flow().unwrap();
    assert!(every <= naive, "{every} vs {naive}");
}

#[test]
fn infeasible_qos_fails_the_run() {
    let sc = common::scenario(json!({
        "schema_version": 1, "seed": 1,
        "primary_ues": [[100.0, 0.0, 1.0]],
        "constraints": { "r_th_bps": 1e9 },
    }));
    let trace = alternating_optimize(&sc);
    assert!(matches!(trace.status, RunStatus::Failed { infeasible: true, .. }));
    assert!(trace.records.is_empty());
}
