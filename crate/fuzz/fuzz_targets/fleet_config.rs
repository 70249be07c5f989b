#![no_main]

use helm_sketch::ais::FleetConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<FleetConfig>(data) {
        let _ = cfg.check();
    }
});
