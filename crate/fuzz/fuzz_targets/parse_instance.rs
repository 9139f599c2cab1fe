#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(inst) = lapue::config::parse_instance(text) {
            let net = &inst.network;
            assert_eq!(inst.capacity.len(), net.num_arcs());
            assert_eq!(net.uniform_split().len(), net.num_paths());
        }
    }
});
