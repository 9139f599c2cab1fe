//! Replays the checked-in fuzz seeds through the same invariants as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use lapue::config::{parse_capacity_model, parse_instance};
use lapue::report::read_result_csv;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn instance_seeds_parse() {
    for (path, bytes) in seeds("parse_instance") {
        let inst = parse_instance(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(inst.capacity.len(), inst.network.num_arcs());
    }
}

#[test]
fn capacity_seeds_keep_cdf_in_range() {
    for (path, bytes) in seeds("parse_capacity_model") {
        let model = parse_capacity_model(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        for u in [0.001, 0.5, 0.999] {
            let x = model.quantile(u);
            assert!(!x.is_nan());
            assert!((0.0..=1.0).contains(&model.cdf(x)), "{}", path.display());
        }
    }
}

#[test]
fn result_seeds_parse() {
    for (path, bytes) in seeds("read_result_csv") {
        let table = read_result_csv(bytes.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        for (r, p) in table.paths.iter().enumerate() {
            assert_eq!(p.path_id, r + 1);
            assert!(p.od >= 1 && p.od <= table.z_min.len());
        }
    }
}
