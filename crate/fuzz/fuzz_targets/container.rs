#![no_main]

use helm_sketch::io::{decode_container, encode_container};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = decode_container(data) {
        // anything accepted re-encodes to the same bytes
        let again = encode_container(c.kind, &c.header, &c.payload).expect("re-encode");
        let back = decode_container(&again).expect("decode");
        assert_eq!(back.kind, c.kind);
        assert_eq!(back.payload.len(), c.payload.len());
    }
});
