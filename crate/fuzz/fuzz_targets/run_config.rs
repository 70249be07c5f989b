#![no_main]

use helm_sketch::ais::NormalizationSpec;
use helm_sketch::pipeline::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<RunConfig>(data) {
        if cfg.validate().is_ok() {
            let _ = cfg.seeds();
            let _ = cfg.fleet.check();
        }
    }
    if let Ok(spec) = serde_json::from_slice::<NormalizationSpec>(data) {
        let _ = spec.validate();
    }
});
