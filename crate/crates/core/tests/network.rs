mod common;

use approx::assert_abs_diff_eq;
use lapue::config::builtin;
use lapue::network::{project_simplex, Arc, Network, OdPair, Path};
use lapue::Error;
use proptest::prelude::*;

use common::{parallel_network, rand_vec};

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn network1_incidence_column_sums() {
    let inc = builtin::network1().network.build_incidence();
    let sums: Vec<f64> = inc.delta.column_iter().map(|c| c.sum()).collect();
    assert_eq!(sums, vec![1.0, 3.0, 2.0, 1.0]);
    for col in inc.pi.column_iter() {
        assert_eq!(col.sum(), 1.0);
    }
}

#[test]
fn nguyen_dupuis_path_counts() {
    let inc = builtin::nguyen_dupuis().network.build_incidence();
    let rows: Vec<f64> = inc.pi.row_iter().map(|r| r.sum()).collect();
    assert_eq!(rows, vec![8.0, 6.0, 5.0, 6.0]);
    assert_eq!(inc.delta.shape(), (19, 25));
}

#[test]
fn single_arc_identity() {
    let net = parallel_network(1, 7.0);
    let inc = net.build_incidence();
    assert_eq!(inc.delta.as_slice(), &[1.0]);
    assert_eq!(inc.pi.as_slice(), &[1.0]);
    assert_eq!(net.path_to_arc_flows(&[7.0]).unwrap(), vec![7.0]);
}

#[test]
fn arc_flows_from_path_flows() {
    let net = builtin::network1().network;
    let v = net.path_to_arc_flows(&[2182.0, 1318.0, 850.0, 3150.0]).unwrap();
    assert_eq!(v[2], 2168.0);
    let inc = net.build_incidence();
    let f = nalgebra::DVector::from_vec(vec![2182.0, 1318.0, 850.0, 3150.0]);
    assert_eq!((&inc.delta * f).as_slice(), v.as_slice());
    assert_eq!(net.path_to_arc_flows(&[0.0; 4]).unwrap(), vec![0.0; 6]);
    assert!(matches!(net.path_to_arc_flows(&[1.0; 3]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn projection_examples() {
    assert_eq!(project_simplex(&[1.0, 1.0], 3.0).unwrap(), vec![1.5, 1.5]);
    assert_eq!(project_simplex(&[5.0, 0.0], 3.0).unwrap(), vec![3.0, 0.0]);
    assert_eq!(project_simplex(&[2.0, 1.0], 3.0).unwrap(), vec![2.0, 1.0]);
    assert!(matches!(project_simplex(&[1.0], -1.0), Err(Error::NegativeDemand(_))));
}

#[test]
fn enumeration_matches_declared_paths() {
    let net = builtin::network1().network;
    let ids = |paths: Vec<Path>| -> Vec<Vec<u32>> {
        paths
            .iter()
            .map(|p| p.arcs.iter().map(|&a| net.arcs()[a].id).collect())
            .collect()
    };
    assert_eq!(ids(net.enumerate_simple_paths(0, 16).unwrap()), vec![vec![1], vec![3, 4, 5]]);
    assert_eq!(ids(net.enumerate_simple_paths(1, 16).unwrap()), vec![vec![2], vec![3, 6]]);
    assert!(matches!(net.enumerate_simple_paths(0, 1), Err(Error::TooManyPaths(1))));
}

#[test]
fn enumerated_network_partitions_paths() {
    let nd = builtin::nguyen_dupuis().network;
    let arcs = nd.arcs().to_vec();
    let enumerated = Network::with_enumerated_paths(nd.nodes().to_vec(), arcs, nd.od_pairs().to_vec(), 64).unwrap();
    assert_eq!(enumerated.num_paths(), 25);
    let inc = enumerated.build_incidence();
    for col in inc.pi.column_iter() {
        assert_eq!(col.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(col.sum(), 1.0);
    }
}

#[test]
fn invalid_paths_are_rejected() {
    let arcs = vec![Arc { id: 1, tail: 1, head: 2 }, Arc { id: 2, tail: 2, head: 3 }];
    let od = vec![OdPair {
        origin: 1,
        destination: 3,
        demand: 1.0,
    }];
    let nodes = vec![1, 2, 3];
    assert!(matches!(
        Network::with_arc_id_paths(nodes.clone(), arcs.clone(), od.clone(), &[vec![vec![1, 9]]]),
        Err(Error::UnknownArc { .. })
    ));
    assert!(matches!(
        Network::with_arc_id_paths(nodes.clone(), arcs.clone(), od.clone(), &[vec![vec![2, 1]]]),
        Err(Error::DisconnectedPath { .. })
    ));
    assert!(Network::with_arc_id_paths(nodes.clone(), arcs.clone(), od.clone(), &[vec![vec![1]]]).is_err());
    let negative = vec![OdPair {
        origin: 1,
        destination: 3,
        demand: -1.0,
    }];
    assert!(Network::with_arc_id_paths(nodes, arcs, negative, &[vec![vec![1, 2]]]).is_err());
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5000.0..5000.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_is_exactly_feasible(x in vec_strategy(25)) {
        let net = builtin::nguyen_dupuis().network;
        let p = net.project_feasible(&x).unwrap();
        prop_assert!(p.iter().all(|&y| y >= 0.0));
        prop_assert!(net.demand_violation(&p) <= 1e-12);
    }

    #[test]
    fn projection_beats_every_feasible_point(x in vec_strategy(25), seed in any::<u64>()) {
        let net = builtin::nguyen_dupuis().network;
        let p = net.project_feasible(&x).unwrap();
        let d = l2(&p, &x);
        for k in 0..20 {
            let z = net.project_feasible(&rand_vec(seed.wrapping_add(k), 25, 0.0, 1000.0)).unwrap();
            prop_assert!(d <= l2(&z, &x) + 1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(x in vec_strategy(25), y in vec_strategy(25)) {
        let net = builtin::nguyen_dupuis().network;
        let (px, py) = (net.project_feasible(&x).unwrap(), net.project_feasible(&y).unwrap());
        let ppx = net.project_feasible(&px).unwrap();
        for (a, b) in px.iter().zip(&ppx) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!(l2(&px, &py) <= l2(&x, &y) + 1e-9);
    }
}

#[test]
fn projection_satisfies_kkt_on_a_block() {
    // y = max(x − λ, 0) with a common λ is the KKT form of the simplex projection
    let x = [3.0, -1.0, 0.5, 2.2];
    let y = project_simplex(&x, 2.0).unwrap();
    assert_abs_diff_eq!(y.iter().sum::<f64>(), 2.0, epsilon = 1e-15);
    let lambda = x[0] - y[0];
    for (xi, yi) in x.iter().zip(&y) {
        assert_abs_diff_eq!(*yi, (xi - lambda).max(0.0), epsilon = 1e-12);
    }
}
