use lapue::config::builtin;
use lapue::equilibrium::{complementarity_report, solve, SolverOptions};
use lapue::report::*;
use lapue::stochastics::sample_scenarios;

fn sample_csv() -> (String, lapue::EquilibriumResult, lapue::Network) {
    let inst = builtin::network1();
    let scen = sample_scenarios(&inst.capacity, 100, 11).unwrap();
    let res = solve(&inst, &scen, &SolverOptions::default()).unwrap();
    let text = result_csv_string(&inst.network, &res, 11, 1e-6, 1e-6).unwrap();
    (text, res, inst.network)
}

#[test]
fn round_trip_preserves_every_number() {
    let (text, res, net) = sample_csv();
    assert!(text.starts_with(&RESULT_HEADER.join(",")));
    let table = read_result_csv(text.as_bytes()).unwrap();
    assert_eq!(table.seed, 11);
    assert_eq!(table.paths.len(), 4);
    assert_eq!(table.z_min, res.z_min);
    assert_eq!(table.residual, res.residual);
    assert_eq!(table.iterations, res.iterations);
    assert_eq!(table.converged, res.converged);
    let report = complementarity_report(&res, &net, 1e-6, 1e-6);
    for (r, (line, rec)) in table.paths.iter().zip(&report.records).enumerate() {
        assert_eq!(line.path_id, r + 1);
        assert_eq!(line.od, rec.od + 1);
        assert_eq!(line.flow, res.f[r]);
        assert_eq!(line.expected_disutility, res.expected_disutility[r]);
        assert_eq!(line.gap, rec.gap);
        assert_eq!(line.class, rec.class.label());
    }
}

#[test]
fn malformed_tables_are_rejected() {
    let (text, _, _) = sample_csv();
    let lines: Vec<&str> = text.lines().collect();
    let join = |v: Vec<&str>| v.join("\n") + "\n";

    assert!(read_result_csv("".as_bytes()).is_err());
    assert!(read_result_csv(join(vec![lines[0]]).as_bytes()).is_err());
    let mut bad_header = lines.clone();
    bad_header[0] = "path,od,flow,expected_disutility,gap,class,value,seed";
    assert!(read_result_csv(join(bad_header).as_bytes()).is_err());

    let mut swapped = lines.clone();
    swapped.swap(1, 2);
    assert!(read_result_csv(join(swapped).as_bytes()).is_err());

    let mut missing = lines.clone();
    missing.retain(|l| !l.starts_with("residual"));
    assert!(read_result_csv(join(missing).as_bytes()).is_err());

    let dup: Vec<&str> = lines.iter().copied().chain(lines.iter().copied().filter(|l| l.starts_with("z_min"))).collect();
    assert!(read_result_csv(join(dup).as_bytes()).is_err());

    let reseeded = text.replacen(",11\n", ",12\n", 1);
    assert!(read_result_csv(reseeded.as_bytes()).is_err());

    let mut unknown = lines.clone();
    unknown.push("bogus,,,,,,1,11");
    assert!(read_result_csv(join(unknown).as_bytes()).is_err());

    let mut zero_od = lines.clone();
    let replaced = lines[1].replacen(",1,", ",0,", 1);
    zero_od[1] = &replaced;
    assert!(read_result_csv(join(zero_od).as_bytes()).is_err());

    let non_numeric = text.replacen("residual,,,,,,", "residual,,,,,,x", 1);
    assert!(read_result_csv(non_numeric.as_bytes()).is_err());
}
