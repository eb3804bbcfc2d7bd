#![no_main]

use busnet_core::network::{ingest_network, DatasetSources};
use busnet_core::TransferParams;
use libfuzzer_sys::fuzz_target;

// Files are separated by NUL bytes: stops, routes, trips, then optional road distances.
fuzz_target!(|data: &[u8]| {
    let mut parts = data.split(|&b| b == 0);
    let (Some(stops), Some(routes), Some(trips)) = (parts.next(), parts.next(), parts.next()) else {
        return;
    };
    let road_distances = parts.next();
    let sources = DatasetSources {
        stops,
        routes,
        trips,
        road_distances,
    };
    if let Ok((net, report)) = ingest_network(sources, &TransferParams::default()) {
        assert!(!net.stops().is_empty());
        assert!(report.issues.len() <= 1000);
        for t in net.trips() {
            assert!(t.tap_off >= t.tap_on);
        }
    }
});
