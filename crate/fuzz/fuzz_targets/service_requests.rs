#![no_main]

use busnet_core::workflow::SearchRequest;
use busnet_core::StationEdit;
use busnet_service::api::{ActivateRequest, ControlRequest, CreateResolution, ResolveRequest};
use busnet_service::ServiceConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<SearchRequest>(data);
    let _ = serde_json::from_slice::<StationEdit>(data);
    let _ = serde_json::from_slice::<CreateResolution>(data);
    let _ = serde_json::from_slice::<ControlRequest>(data);
    let _ = serde_json::from_slice::<ResolveRequest>(data);
    let _ = serde_json::from_slice::<ActivateRequest>(data);
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(c) = toml::from_str::<ServiceConfig>(s) {
            let _ = c.validate();
        }
    }
});
