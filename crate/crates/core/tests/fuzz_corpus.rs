//! Replays the checked-in fuzz seeds through the same entry points as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use helm_sketch::ais::{parse_ais_csv, parse_key_nodes, parse_timestamp, FleetConfig, NormalizationSpec};
use helm_sketch::io::{decode_container, decode_encoder, decode_predictor, decode_reference_db};
use helm_sketch::pipeline::RunConfig;

fn seed(target: &str, name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target).join(name);
    fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn unpack(data: &[u8]) -> (u8, &[u8], &[u8]) {
    let n = u32::from_le_bytes(data[1..5].try_into().unwrap()) as usize;
    let (bin, side) = data[5..].split_at(n);
    (data[0], bin, side)
}

#[test]
fn csv_seeds() {
    assert!(parse_ais_csv(&seed("ais_csv", "synthetic")[..]).unwrap().records.len() == 12);
    assert!(parse_ais_csv(&seed("ais_csv", "header_only")[..]).unwrap().records.is_empty());
    assert_eq!(parse_ais_csv(&seed("ais_csv", "minimal")[..]).unwrap().records.len(), 2);
    let bad = parse_ais_csv(&seed("ais_csv", "bad_rows")[..]).unwrap();
    assert!(!bad.skipped.is_empty());
}

#[test]
fn key_node_seeds() {
    assert!(!parse_key_nodes(&seed("key_nodes", "ring")[..]).unwrap().is_empty());
    assert!(parse_key_nodes(&seed("key_nodes", "duplicate")[..]).is_err());
    let _ = parse_key_nodes(&seed("key_nodes", "empty")[..]);
}

#[test]
fn config_seeds() {
    for name in ["ring", "branching", "straight", "extension"] {
        let f: FleetConfig = serde_json::from_slice(&seed("fleet_config", name)).unwrap();
        f.check().unwrap();
    }
    let cfg: RunConfig = serde_json::from_slice(&seed("run_config", "branching_preset")).unwrap();
    cfg.validate().unwrap();
    let spec: NormalizationSpec = serde_json::from_slice(&seed("run_config", "spec")).unwrap();
    spec.validate().unwrap();
}

#[test]
fn container_seeds() {
    assert_eq!(decode_container(&seed("container", "small")).unwrap().payload.len(), 3);
    assert!(decode_container(&seed("container", "empty_payload")).unwrap().payload.is_empty());
    assert!(decode_container(&seed("container", "truncated")).is_err());
}

#[test]
fn checkpoint_seeds() {
    let data = seed("checkpoint", "encoder");
    let (_, bin, side) = unpack(&data);
    decode_encoder(bin, side).unwrap();
    let data = seed("checkpoint", "predictor");
    let (_, bin, side) = unpack(&data);
    decode_predictor(bin, side, None).unwrap();
    decode_predictor(bin, side, Some(6)).unwrap();
    assert!(decode_predictor(bin, side, Some(4)).is_err());
    assert!(decode_encoder(bin, side).is_err());
    let data = seed("checkpoint", "reference_db");
    let (_, bin, side) = unpack(&data);
    assert_eq!(decode_reference_db(bin, side).unwrap().0.len(), 2);
    let mut flipped = bin.to_vec();
    *flipped.last_mut().unwrap() ^= 1;
    assert!(decode_reference_db(&flipped, side).is_err());
}

#[test]
fn timestamp_seeds() {
    for name in ["rfc3339", "offset", "naive"] {
        let s = String::from_utf8(seed("timestamp", name)).unwrap();
        assert!(parse_timestamp(&s).is_some(), "{s}");
    }
    assert!(parse_timestamp(&String::from_utf8(seed("timestamp", "garbage")).unwrap()).is_none());
}
