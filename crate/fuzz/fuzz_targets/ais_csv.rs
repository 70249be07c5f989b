#![no_main]

use helm_sketch::ais::{build_tracks, filter_cargo, parse_ais_csv};
use helm_sketch::geo::EarthModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = parse_ais_csv(data) else { return };
    for r in &parsed.records {
        assert!(r.pos.lat.abs() <= 90.0);
    }
    if parsed.records.len() <= 256 {
        let _ = build_tracks(&filter_cargo(parsed.records), 300.0, 6.0 * 3600.0, &EarthModel::default());
    }
});
