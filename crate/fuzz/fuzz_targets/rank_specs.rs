#![no_main]

use busnet_core::analytics::{RankFilters, RankWeights, RouteMetric, TimeBin};
use busnet_core::Criterion;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(w) = RankWeights::parse(s) {
        assert!(w.validate().is_ok());
    }
    let _ = RankFilters::parse(s);
    let _ = s.parse::<TimeBin>();
    let _ = s.parse::<RouteMetric>();
    let _ = s.parse::<Criterion>();
});
