#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use uavnet::flow::CapacityGraph;
use uavnet::{parse_scenario, Scenario};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario(doc: serde_json::Value) -> Scenario {
    parse_scenario(&doc.to_string()).expect("test scenario resolves")
}

fn point(rng: &mut ChaCha8Rng, x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> [f64; 3] {
    [rng.random_range(x.0..x.1), rng.random_range(y.0..y.1), rng.random_range(z.0..z.1)]
}

/// Relays scattered around the BS-UE segment, interferers at 20 m and
/// optional primary UEs on the ground. Any two points are at least 2 m apart.
pub fn random_doc(rng: &mut ChaCha8Rng, relays: usize, interferers: usize, primaries: usize) -> serde_json::Value {
    let mut taken: Vec<[f64; 3]> = vec![[0.0, 0.0, 15.0], [200.0, 0.0, 25.0]];
    let mut draw = |rng: &mut ChaCha8Rng, x, y, z| loop {
        let p = point(rng, x, y, z);
        let far = taken.iter().all(|q| {
            let d2: f64 = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum();
            d2 > 4.0
        });
        if far {
            taken.push(p);
            return p;
        }
    };
    let mut xs: Vec<[f64; 3]> = (0..relays)
        .map(|_| draw(rng, (10.0, 190.0), (-40.0, 40.0), (5.0, 60.0)))
        .collect();
    xs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let intf: Vec<_> = (0..interferers)
        .map(|_| json!({ "position": draw(rng, (20.0, 180.0), (-80.0, 80.0), (20.0, 20.0 + 1e-9)) }))
        .collect();
    let prim: Vec<_> = (0..primaries)
        .map(|_| draw(rng, (0.0, 200.0), (-150.0, 150.0), (0.0, 2.0)))
        .collect();
    json!({
        "schema_version": 1,
        "seed": 7,
        "relays": { "count": relays, "positions": xs },
        "interferers": intf,
        "primary_ues": prim,
    })
}

pub fn random_scenario(rng: &mut ChaCha8Rng, relays: usize, interferers: usize) -> Scenario {
    scenario(random_doc(rng, relays, interferers, 0))
}

/// Random undirected graph on `n` nodes, each pair present with probability
/// `density`, capacities uniform in `[0, 10]`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CapacityGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((i, j, rng.random_range(0.0..10.0)));
            }
        }
    }
    CapacityGraph::from_edges(n, &edges, 0, n - 1)
}

/// Like [`random_graph`] but every node has positive degree: a random
/// spanning path is always present.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CapacityGraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut a = nalgebra::DMatrix::zeros(n, n);
    for w in order.windows(2) {
        let c = rng.random_range(0.1..10.0);
        a[(w[0], w[1])] = c;
        a[(w[1], w[0])] = c;
    }
    for i in 0..n {
        for j in i + 1..n {
            if a[(i, j)] == 0.0 && rng.random_bool(density) {
                let c = rng.random_range(0.0..10.0);
                a[(i, j)] = c;
                a[(j, i)] = c;
            }
        }
    }
    CapacityGraph::new(a, 0, n - 1)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Central difference of `f` with respect to coordinate `axis` of the entity
/// picked by `mover`, step `h` metres.
pub fn central_difference(
    state: &uavnet::NetworkState,
    mover: uavnet::spectral::Mover,
    axis: usize,
    h: f64,
    f: impl Fn(&uavnet::NetworkState) -> f64,
) -> f64 {
    use uavnet::spectral::Mover;
    let shifted = |delta: f64| {
        let mut s = state.clone();
        let p = match mover {
            Mover::Node(i) => &mut s.nodes[i],
            Mover::Interferer(m) => &mut s.interferers[m],
        };
        *p.coord_mut(axis) += delta;
        f(&s)
    };
    (shifted(h) - shifted(-h)) / (2.0 * h)
}

/// Worst relative mismatch between analytic gradients and central
/// differences of the frozen-coefficient surrogate, over every relay and
/// interferer coordinate whose analytic magnitude exceeds `1e-15`.
pub fn surrogate_gradient_mismatch(sc: &Scenario, state: &uavnet::NetworkState, fp: &uavnet::spectral::FiedlerPair) -> f64 {
    use uavnet::spectral::{self, Mover};
    let coeffs = spectral::edge_coefficients(sc, fp, &sc.weights);
    let q = |s: &uavnet::NetworkState| spectral::surrogate(s, sc, &coeffs).unwrap();
    let relay = spectral::connectivity_gradient(state, sc, fp, &sc.weights).unwrap();
    let jam = spectral::jammer_gradient(state, sc, fp, &sc.weights).unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, mover: Mover, axis: usize| {
        if analytic.abs() > 1e-15 {
            let fd = central_difference(state, mover, axis, 1e-3, q);
            worst = worst.max((analytic - fd).abs() / analytic.abs());
        }
    };
    for n in (0..sc.n_nodes()).filter(|&n| sc.is_movable(n)) {
        for axis in 0..3 {
            check(relay.0[n][axis], Mover::Node(n), axis);
        }
    }
    for m in 0..sc.n_interferers() {
        for axis in 0..3 {
            check(-jam.0[m][axis], Mover::Interferer(m), axis);
        }
    }
    worst
}

/// Reckless-mode instance for the power allocator: 3-6 relays, 1-2
/// interferers, 0-2 primary UEs with a modest rate floor.
pub fn sca_instance(rng: &mut ChaCha8Rng, cooperative: bool) -> Scenario {
    let relays = rng.random_range(3..=6);
    let intf = rng.random_range(1..=2);
    let prim = rng.random_range(0..=2);
    let mut doc = random_doc(rng, relays, intf, prim);
    doc["constraints"] = serde_json::json!({
        "i_max_dbm": rng.random_range(-60.0..-20.0),
        "r_th_bps": if prim > 0 { rng.random_range(100.0..5000.0) } else { 0.0 },
        "cooperative": cooperative,
    });
    scenario(doc)
}
