#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = lapue::report::read_result_csv(data) {
        for (r, p) in table.paths.iter().enumerate() {
            assert_eq!(p.path_id, r + 1);
            assert!(p.od >= 1 && p.od <= table.z_min.len());
        }
    }
});
