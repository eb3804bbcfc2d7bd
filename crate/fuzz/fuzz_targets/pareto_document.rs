#![no_main]

use busnet_core::workflow::{replay, ParetoDocument};
use busnet_core::CriterionVector;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<ParetoDocument>(data) else { return };
    if doc.routes.len() > 32 || doc.routes.iter().any(|r| r.stops.len() > 64) {
        return;
    }
    let Ok(mut session) = doc.resolution(CriterionVector::from_array([1.0; 5]), 2) else { return };
    let n = doc.routes.len();
    let mut steps = 0;
    while !session.is_final() {
        let before = session.candidates().count();
        replay(&mut session, &[0]).unwrap();
        assert!(session.candidates().count() < before);
        steps += 1;
        assert!(steps < n);
    }
});
