#![no_main]

use busnet_core::CriterionRanges;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = CriterionRanges::parse(s) {
        let json = serde_json::to_string(&r).unwrap();
        let back: CriterionRanges = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
    let _ = serde_json::from_str::<CriterionRanges>(s);
});
