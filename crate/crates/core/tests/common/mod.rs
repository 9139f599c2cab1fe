#![allow(dead_code)]

use lapue::network::{Arc, Network, OdPair};
use lapue::{CapacityModel, Gbpr, Instance, PenaltyConfig, PenaltyMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` parallel one-arc paths between two nodes carrying demand `q`.
pub fn parallel_network(n: usize, q: f64) -> Network {
    let arcs = (1..=n as u32).map(|id| Arc { id, tail: 1, head: 2 }).collect();
    let paths = vec![(1..=n as u32).map(|id| vec![id]).collect()];
    Network::with_arc_id_paths(
        vec![1, 2],
        arcs,
        vec![OdPair {
            origin: 1,
            destination: 2,
            demand: q,
        }],
        &paths,
    )
    .unwrap()
}

/// Parallel-route instance with identical arcs.
pub fn parallel_instance(n: usize, q: f64, theta2: f64, tau: f64) -> Instance {
    let net = parallel_network(n, q);
    let gbpr = vec![Gbpr { t0: 10.0, b: 0.15, n: 4.0 }; n];
    let penalty = PenaltyConfig {
        theta0: 0.0,
        theta1: 1.0,
        theta2,
        d: vec![0.0; n],
        tau: vec![tau],
        t: 0.1,
        mode: PenaltyMode::Smooth,
    };
    Instance::new("parallel", net, gbpr, penalty, vec![CapacityModel::normal(500.0, 20.0); n]).unwrap()
}

pub fn rand_vec(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A random feasible flow with every entry bounded away from zero.
pub fn random_feasible(net: &Network, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = vec![0.0; net.num_paths()];
    for (od, members) in net.od_pairs().iter().zip(net.od_paths()) {
        let w: Vec<f64> = members.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        for (&r, wr) in members.iter().zip(&w) {
            f[r] = od.demand * wr / total;
        }
    }
    f
}
