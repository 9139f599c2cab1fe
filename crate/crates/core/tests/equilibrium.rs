mod common;

use approx::assert_abs_diff_eq;
use lapue::config::builtin;
use lapue::equilibrium::*;
use lapue::stochastics::{mean_scenario, sample_scenarios};
use lapue::{Error, SaaOperator};

use common::{parallel_instance, parallel_network};

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn residual_vanishes_at_trivial_equilibria() {
    let single = parallel_network(1, 40.0);
    assert_eq!(natural_residual(&single, &[40.0], &[123.0]).unwrap(), 0.0);
    let two = parallel_network(2, 40.0);
    assert_eq!(natural_residual(&two, &[20.0, 20.0], &[7.0, 7.0]).unwrap(), 0.0);
    assert!(natural_residual(&two, &[30.0, 10.0], &[7.0, 7.5]).unwrap() > 0.0);
    assert!(natural_residual(&two, &[20.0, 20.0], &[7.0]).is_err());
}

#[test]
fn identical_routes_split_evenly() {
    let inst = parallel_instance(2, 900.0, 2.0, 10.0);
    let scen = sample_scenarios(&inst.capacity[..1], 50, 4).unwrap();
    // the same capacity column on both arcs keeps the routes identical
    let both = lapue::ScenarioSet::from_rows(
        &scen.rows().map(|r| vec![r[0], r[0]]).collect::<Vec<_>>(),
        4,
        "shared",
    )
    .unwrap();
    let res = solve(&inst, &both, &SolverOptions::default()).unwrap();
    assert!(res.converged);
    assert_abs_diff_eq!(res.f[0], 450.0, epsilon = 1e-9);
    assert_abs_diff_eq!(res.f[1], 450.0, epsilon = 1e-9);
    let report = complementarity_report(&res, &inst.network, 1e-6, 1e-9);
    assert!(report.records.iter().all(|r| r.gap.abs() <= 1e-9 && r.class == PathClass::Used));
}

#[test]
fn single_path_od_minimum_is_its_disutility() {
    let inst = parallel_instance(1, 300.0, 0.0, 10.0);
    let scen = mean_scenario(&inst.capacity).unwrap();
    let res = solve(&inst, &scen, &SolverOptions::default()).unwrap();
    assert_eq!(res.f, vec![300.0]);
    assert_eq!(res.z_min, res.expected_disutility);
    assert_eq!(res.iterations, 0);
    assert_eq!(min_od_disutilities(&inst.network, &[4.0]), vec![4.0]);
}

#[test]
fn network1_ue_is_certified() {
    let inst = builtin::network1().user_equilibrium();
    let scen = mean_scenario(&inst.capacity).unwrap();
    let opts = SolverOptions::default();
    let res = solve(&inst, &scen, &opts).unwrap();
    assert!(res.converged && res.residual <= 1e-8);
    assert!(inst.network.demand_violation(&res.f) <= 1e-10);
    assert!(res.f.iter().all(|&x| x >= -1e-12));
    assert_eq!(res.v, inst.network.path_to_arc_flows(&res.f).unwrap());
    let umax = res.expected_disutility.iter().fold(0.0_f64, |m, u| m.max(u.abs()));
    let report = complementarity_report(&res, &inst.network, 1e-6, 100.0 * opts.tol * (1.0 + umax));
    report.verify().unwrap();
    assert!(report.records.iter().all(|r| r.class == PathClass::Used));
    // both routes of each OD pair at nearly equal disutility
    assert!(report.max_used_gap(1e-6) <= 0.05);
}

#[test]
fn arc_flows_do_not_depend_on_the_start() {
    for inst in [builtin::network1(), builtin::nguyen_dupuis()] {
        let scen = sample_scenarios(&inst.capacity, 200, 12).unwrap();
        let op = SaaOperator::new(&inst, &scen).unwrap();
        let opts = SolverOptions::default();
        let a = solve_operator(&op, &inst.network.uniform_split(), &opts).unwrap();
        let mut corner = vec![0.0; inst.network.num_paths()];
        for (od, members) in inst.network.od_pairs().iter().zip(inst.network.od_paths()) {
            corner[members[0]] = od.demand;
        }
        let b = solve_operator(&op, &corner, &opts).unwrap();
        assert!(a.converged && b.converged);
        let vmax = a.v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(inf_dist(&a.v, &b.v) <= 1e-4 * vmax, "{}: {}", inst.name, inf_dist(&a.v, &b.v));
    }
}

#[test]
fn nguyen_dupuis_ue_has_an_unused_dominated_path() {
    let inst = builtin::nguyen_dupuis().user_equilibrium();
    let scen = mean_scenario(&inst.capacity).unwrap();
    let res = solve(&inst, &scen, &SolverOptions::default()).unwrap();
    assert!(res.converged);
    let report = complementarity_report(&res, &inst.network, 1e-6, 1e-6);
    report.verify().unwrap();
    assert_eq!(report.records[2].class, PathClass::Unused);
    assert!(report.records[2].gap > 1.0);
    assert!(report.records[2].flow <= 1e-6);
}

#[test]
fn solves_are_bit_reproducible() {
    let inst = builtin::network1();
    let run = || {
        let scen = sample_scenarios(&inst.capacity, 300, 99).unwrap();
        solve(&inst, &scen, &SolverOptions::default()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let inst = builtin::network1();
    let scen = mean_scenario(&inst.capacity).unwrap();
    let opts = SolverOptions {
        max_iter: 1,
        ..SolverOptions::default()
    };
    let res = solve(&inst, &scen, &opts).unwrap();
    assert!(!res.converged);
    assert_eq!(res.iterations, 1);
    assert!(inst.network.demand_violation(&res.f) <= 1e-10);
    let bad = SolverOptions {
        backtrack: 1.5,
        ..SolverOptions::default()
    };
    assert!(matches!(solve(&inst, &scen, &bad), Err(Error::InvalidParameter(_))));
}

#[test]
fn continuation_without_penalty_has_zero_distance() {
    let inst = builtin::network1().user_equilibrium();
    let scen = sample_scenarios(&inst.capacity, 100, 3).unwrap();
    let cont = t_continuation(&inst, &scen, &[1.0, 0.1, 0.01], &SolverOptions::default()).unwrap();
    assert_eq!(cont.steps.len(), 3);
    assert!(cont.steps.iter().all(|s| s.distance == 0.0));
}

#[test]
fn continuation_distances_shrink_with_t() {
    let mut inst = builtin::network1();
    inst.penalty.tau = vec![18.2, 16.84];
    let scen = sample_scenarios(&inst.capacity, 300, 3).unwrap();
    let opts = SolverOptions::default().with_tol(1e-10);
    let cont = t_continuation(&inst, &scen, &[1.0, 0.5, 0.1, 0.01], &opts).unwrap();
    assert!(cont.limit.converged);
    let d: Vec<f64> = cont.steps.iter().map(|s| s.distance).collect();
    assert!(d[0] > 0.0);
    for w in d.windows(2) {
        assert!(w[1] <= w[0] + 2.0 * opts.tol, "{d:?}");
    }
    assert!(d[3] <= 0.01 * d[0]);
}

#[test]
fn continuation_rejects_bad_schedules() {
    let inst = builtin::network1();
    let scen = mean_scenario(&inst.capacity).unwrap();
    let opts = SolverOptions::default();
    assert!(t_continuation(&inst, &scen, &[], &opts).is_err());
    assert!(t_continuation(&inst, &scen, &[0.1, 1.0], &opts).is_err());
    assert!(t_continuation(&inst, &scen, &[1.0, -0.1], &opts).is_err());
}

#[test]
fn relative_deviation_examples() {
    assert_eq!(relative_deviation(&[2.0, 0.5], &[2.0, 0.0]), 0.5);
    assert_eq!(relative_deviation(&[110.0], &[100.0]), 0.1);
}
