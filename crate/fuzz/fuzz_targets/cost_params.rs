#![no_main]

use busnet_core::CostParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for p in [CostParams::from_toml_str(s), CostParams::from_json_str(s)].into_iter().flatten() {
        assert!(p.validate().is_ok());
    }
});
