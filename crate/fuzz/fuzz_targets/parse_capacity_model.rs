#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = lapue::config::parse_capacity_model(text) {
            for u in [0.001, 0.5, 0.999] {
                let x = model.quantile(u);
                assert!(!x.is_nan());
                assert!((0.0..=1.0).contains(&model.cdf(x)));
            }
        }
    }
});
