#![no_main]

use helm_sketch::ais::parse_key_nodes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(nodes) = parse_key_nodes(data) {
        for n in &nodes {
            assert!(n.radius_m > 0.0);
        }
    }
});
