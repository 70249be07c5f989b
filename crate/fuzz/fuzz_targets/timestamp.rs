#![no_main]

use helm_sketch::ais::{format_timestamp, parse_timestamp};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Some(t) = parse_timestamp(s) {
        assert!(t.is_finite());
        let _ = parse_timestamp(&format_timestamp(t));
    }
});
