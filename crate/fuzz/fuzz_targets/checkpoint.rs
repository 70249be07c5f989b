#![no_main]

//! Input: selector byte, u32 LE checkpoint length, checkpoint bytes, sidecar bytes.

use helm_sketch::io::{decode_encoder, decode_predictor, decode_reference_db};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() < 5 {
        return;
    }
    let n = u32::from_le_bytes(data[1..5].try_into().unwrap()) as usize;
    let rest = &data[5..];
    let (bin, side) = rest.split_at(n.min(rest.len()));
    match data[0] % 4 {
        0 => drop(decode_encoder(bin, side)),
        1 => drop(decode_predictor(bin, side, None)),
        2 => drop(decode_predictor(bin, side, Some(6))),
        _ => drop(decode_reference_db(bin, side)),
    }
});
