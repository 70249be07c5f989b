//! Artifact persistence: checksummed binary checkpoints with JSON sidecars,
//! JSON documents stamped with run provenance, GeoJSON export, and atomic
//! write-then-rename for every file written.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic "HLMS" | version u16 | kind u8 | header_len u32 | header (JSON)
//! | count u64 | count x f64 | sha256 of everything before (32 bytes)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ais::{NkpLabel, NormalizationSpec};
use crate::geo::GeoPoint;
use crate::metrics::Polyline;
use crate::nkp::{DbEntry, Embedding, EncoderParams, EntryMeta, ReferenceDb};
use crate::predictor::PredictorParams;

pub const MAGIC: [u8; 4] = *b"HLMS";
pub const FORMAT_VERSION: u16 = 1;

const FIXED_LEN: usize = 4 + 2 + 1 + 4;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ArtifactKind {
    Encoder = 1,
    Predictor = 2,
    ReferenceDb = 3,
}

impl ArtifactKind {
    fn from_u8(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::Encoder),
            2 => Some(Self::Predictor),
            3 => Some(Self::ReferenceDb),
            _ => None,
        }
    }
}

/// Run identity carried by every artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub created: String,
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical (declaration-ordered, compact) JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String, IoError> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

/// Writes through a temporary file in the target directory, then renames
/// it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, IoError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    atomic_write(path, &to_json_bytes(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Decoded container: header JSON plus the raw payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ArtifactKind,
    pub header: Value,
    pub payload: Vec<f64>,
}

pub fn encode_container(kind: ArtifactKind, header: &Value, payload: &[f64]) -> Result<Vec<u8>, IoError> {
    let head = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(FIXED_LEN + head.len() + 8 + payload.len() * 8 + DIGEST_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    let head_len = u32::try_from(head.len()).map_err(|_| IoError::ShapeMismatch("header too large".into()))?;
    out.extend_from_slice(&head_len.to_le_bytes());
    out.extend_from_slice(&head);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode_container(bytes: &[u8]) -> Result<Container, IoError> {
    let corrupt = |m: &str| IoError::CorruptFile(m.into());
    if bytes.len() < FIXED_LEN + 8 + DIGEST_LEN {
        return Err(corrupt("truncated"));
    }
    if bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != FORMAT_VERSION {
        return Err(IoError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kind = ArtifactKind::from_u8(body[6]).ok_or_else(|| corrupt("unknown artifact kind"))?;
    let head_len = u32::from_le_bytes(body[7..11].try_into().expect("4 bytes")) as usize;
    let head_end = FIXED_LEN
        .checked_add(head_len)
        .filter(|&e| e + 8 <= body.len())
        .ok_or_else(|| corrupt("header overruns file"))?;
    let header: Value = serde_json::from_slice(&body[FIXED_LEN..head_end]).map_err(|_| corrupt("header is not JSON"))?;
    let count = u64::from_le_bytes(body[head_end..head_end + 8].try_into().expect("8 bytes"));
    let data = &body[head_end + 8..];
    if (data.len() as u64) != count.saturating_mul(8) {
        return Err(corrupt("payload length disagrees with count"));
    }
    let payload = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Container { kind, header, payload })
}

/// `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct Header<S> {
    shape: S,
    provenance: Provenance,
    sidecar_sha256: String,
}

fn save_artifact<S: Serialize, M: Serialize>(
    path: &Path,
    kind: ArtifactKind,
    shape: S,
    payload: &[f64],
    provenance: &Provenance,
    sidecar: &M,
) -> Result<(), IoError> {
    let side = to_json_bytes(sidecar)?;
    let header = Header {
        shape,
        provenance: provenance.clone(),
        sidecar_sha256: sha256_hex(&side),
    };
    let bytes = encode_container(kind, &serde_json::to_value(&header)?, payload)?;
    atomic_write(&sidecar_path(path), &side)?;
    atomic_write(path, &bytes)
}

struct Loaded<S> {
    header: Header<S>,
    payload: Vec<f64>,
    sidecar: Vec<u8>,
}

/// Largest accepted shape dimension; keeps weight counts far from overflow.
const MAX_DIM: usize = 1 << 20;

fn check_dims(dims: &[usize]) -> Result<(), IoError> {
    if dims.iter().any(|&d| d > MAX_DIM) {
        return Err(IoError::ShapeMismatch(format!("dimension above {MAX_DIM} in {dims:?}")));
    }
    Ok(())
}

fn decode_artifact<S: DeserializeOwned>(bin: &[u8], sidecar: &[u8], kind: ArtifactKind) -> Result<Loaded<S>, IoError> {
    let c = decode_container(bin)?;
    if c.kind != kind {
        return Err(IoError::ShapeMismatch(format!("expected a {kind:?} artifact, found {:?}", c.kind)));
    }
    let header: Header<S> =
        serde_json::from_value(c.header).map_err(|e| IoError::CorruptFile(format!("header: {e}")))?;
    let sidecar = sidecar.to_vec();
    if sha256_hex(&sidecar) != header.sidecar_sha256 {
        return Err(IoError::CorruptFile("sidecar does not match checkpoint".into()));
    }
    Ok(Loaded {
        header,
        payload: c.payload,
        sidecar,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct EncoderShape {
    hidden: usize,
    embed_dim: usize,
}

pub fn save_encoder<M: Serialize>(
    path: &Path,
    params: &EncoderParams,
    provenance: &Provenance,
    sidecar: &M,
) -> Result<(), IoError> {
    let shape = EncoderShape {
        hidden: params.hidden,
        embed_dim: params.embed_dim,
    };
    save_artifact(path, ArtifactKind::Encoder, shape, &params.data, provenance, sidecar)
}

fn read_pair(path: &Path) -> Result<(Vec<u8>, Vec<u8>), IoError> {
    Ok((fs::read(path)?, fs::read(sidecar_path(path))?))
}

pub fn load_encoder(path: &Path) -> Result<(EncoderParams, Provenance), IoError> {
    let (bin, side) = read_pair(path)?;
    decode_encoder(&bin, &side)
}

/// Encoder from checkpoint bytes and the sidecar bytes they were saved with.
pub fn decode_encoder(bin: &[u8], sidecar: &[u8]) -> Result<(EncoderParams, Provenance), IoError> {
    let l: Loaded<EncoderShape> = decode_artifact(bin, sidecar, ArtifactKind::Encoder)?;
    let EncoderShape { hidden, embed_dim } = l.header.shape;
    check_dims(&[hidden, embed_dim])?;
    if l.payload.len() != EncoderParams::param_count(hidden, embed_dim) {
        return Err(IoError::ShapeMismatch(format!(
            "encoder {hidden}x{embed_dim} needs {} weights, file has {}",
            EncoderParams::param_count(hidden, embed_dim),
            l.payload.len()
        )));
    }
    let params = EncoderParams {
        hidden,
        embed_dim,
        data: l.payload,
    };
    Ok((params, l.header.provenance))
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictorShape {
    context: usize,
    channels: usize,
    hidden: usize,
}

pub fn save_predictor<M: Serialize>(
    path: &Path,
    params: &PredictorParams,
    provenance: &Provenance,
    sidecar: &M,
) -> Result<(), IoError> {
    let shape = PredictorShape {
        context: params.context,
        channels: params.channels,
        hidden: params.hidden,
    };
    save_artifact(path, ArtifactKind::Predictor, shape, &params.data, provenance, sidecar)
}

/// Loads a predictor; with `channels` set, a checkpoint of another channel
/// count is rejected.
pub fn load_predictor(path: &Path, channels: Option<usize>) -> Result<(PredictorParams, Provenance), IoError> {
    let (bin, side) = read_pair(path)?;
    decode_predictor(&bin, &side, channels)
}

pub fn decode_predictor(
    bin: &[u8],
    sidecar: &[u8],
    channels: Option<usize>,
) -> Result<(PredictorParams, Provenance), IoError> {
    let l: Loaded<PredictorShape> = decode_artifact(bin, sidecar, ArtifactKind::Predictor)?;
    let PredictorShape {
        context,
        channels: ch,
        hidden,
    } = l.header.shape;
    check_dims(&[context, ch, hidden])?;
    if let Some(want) = channels {
        if want != ch {
            return Err(IoError::ShapeMismatch(format!("checkpoint has {ch} channels, task needs {want}")));
        }
    }
    let n = PredictorParams::param_count(context, ch, hidden);
    if l.payload.len() != n {
        return Err(IoError::ShapeMismatch(format!("predictor needs {n} weights, file has {}", l.payload.len())));
    }
    let params = PredictorParams {
        context,
        channels: ch,
        hidden,
        data: l.payload,
    };
    params
        .validate()
        .map_err(|e| IoError::ShapeMismatch(e.to_string()))?;
    Ok((params, l.header.provenance))
}

pub fn read_sidecar<M: DeserializeOwned>(path: &Path) -> Result<M, IoError> {
    read_json(&sidecar_path(path))
}

#[derive(Debug, Serialize, Deserialize)]
struct DbShape {
    n: usize,
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct DbEntryRecord {
    label: usize,
    mmsi: u64,
    track_t0: f64,
    start: usize,
}

/// Reference-database sidecar: label table, per-entry metadata and key
/// nodes. Embeddings live in the binary payload.
#[derive(Debug, Serialize, Deserialize)]
struct DbSidecar {
    dim: usize,
    labels: Vec<NkpLabel>,
    nodes: BTreeMap<NkpLabel, GeoPoint>,
    entries: Vec<DbEntryRecord>,
    provenance: Provenance,
}

pub fn save_reference_db(path: &Path, db: &ReferenceDb, provenance: &Provenance) -> Result<(), IoError> {
    let dim = db.dim().unwrap_or(0);
    let labels: Vec<NkpLabel> = db.nodes.keys().cloned().collect();
    let mut entries = Vec::with_capacity(db.len());
    let mut payload = Vec::with_capacity(db.len() * dim);
    for e in &db.entries {
        let label = labels
            .binary_search(&e.label)
            .map_err(|_| IoError::ShapeMismatch(format!("label {} has no key node", e.label)))?;
        entries.push(DbEntryRecord {
            label,
            mmsi: e.meta.mmsi,
            track_t0: e.meta.track_t0,
            start: e.meta.start,
        });
        payload.extend_from_slice(e.embedding.as_slice());
    }
    let sidecar = DbSidecar {
        dim,
        labels,
        nodes: db.nodes.clone(),
        entries,
        provenance: provenance.clone(),
    };
    let shape = DbShape { n: db.len(), dim };
    save_artifact(path, ArtifactKind::ReferenceDb, shape, &payload, provenance, &sidecar)
}

pub fn load_reference_db(path: &Path) -> Result<(ReferenceDb, Provenance), IoError> {
    let (bin, side) = read_pair(path)?;
    decode_reference_db(&bin, &side)
}

pub fn decode_reference_db(bin: &[u8], sidecar: &[u8]) -> Result<(ReferenceDb, Provenance), IoError> {
    let l: Loaded<DbShape> = decode_artifact(bin, sidecar, ArtifactKind::ReferenceDb)?;
    let side: DbSidecar = serde_json::from_slice(&l.sidecar)?;
    let DbShape { n, dim } = l.header.shape;
    let bad = |m: String| Err(IoError::ShapeMismatch(m));
    if dim == 0 && n > 0 {
        return bad("zero-dimensional embeddings".into());
    }
    if side.dim != dim || side.entries.len() != n || Some(l.payload.len()) != n.checked_mul(dim) {
        return bad(format!(
            "header says {n}x{dim}, sidecar {}x{}, payload {}",
            side.entries.len(),
            side.dim,
            l.payload.len()
        ));
    }
    if side.labels.iter().any(|lab| !side.nodes.contains_key(lab)) {
        return bad("label without key node".into());
    }
    let mut entries = Vec::with_capacity(n);
    for (rec, chunk) in side.entries.iter().zip(l.payload.chunks_exact(dim.max(1))) {
        let Some(label) = side.labels.get(rec.label) else {
            return bad(format!("label index {} out of range", rec.label));
        };
        let embedding = Embedding::from_unit(chunk.to_vec())
            .map_err(|_| IoError::CorruptFile("stored embedding is not unit norm".into()))?;
        entries.push(DbEntry {
            embedding,
            label: label.clone(),
            meta: EntryMeta {
                mmsi: rec.mmsi,
                track_t0: rec.track_t0,
                start: rec.start,
            },
        });
    }
    let db = ReferenceDb {
        entries,
        nodes: side.nodes,
    };
    Ok((db, l.header.provenance))
}

/// JSON document with a provenance block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpecBody {
    normalization: NormalizationSpec,
}

pub fn save_spec(path: &Path, spec: &NormalizationSpec, provenance: &Provenance) -> Result<(), IoError> {
    write_json(
        path,
        &Stamped {
            provenance: provenance.clone(),
            body: SpecBody { normalization: *spec },
        },
    )
}

pub fn load_spec(path: &Path) -> Result<NormalizationSpec, IoError> {
    let s: Stamped<SpecBody> = read_json(path)?;
    s.body
        .normalization
        .validate()
        .map_err(|e| IoError::CorruptFile(e.to_string()))?;
    Ok(s.body.normalization)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    History,
    Truth,
    Prediction,
    Baseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleLine {
    pub role: Role,
    pub model: String,
    pub mmsi: u64,
    pub seed: u64,
    pub polyline: Polyline,
}

/// FeatureCollection with one feature per non-empty polyline: a
/// `LineString` in `(lon, lat)` order, or a `Point` for a single position.
pub fn geojson(lines: &[RoleLine], provenance: &Provenance) -> Value {
    let features: Vec<Value> = lines
        .iter()
        .filter(|l| !l.polyline.is_empty())
        .map(|l| {
            let coords: Vec<[f64; 2]> = l.polyline.points.iter().map(|p| [p.lon, p.lat]).collect();
            let geometry = if coords.len() == 1 {
                json!({"type": "Point", "coordinates": coords[0]})
            } else {
                json!({"type": "LineString", "coordinates": coords})
            };
            json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": {"role": l.role, "model": l.model, "mmsi": l.mmsi, "seed": l.seed},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features, "provenance": provenance})
}

pub fn write_geojson(path: &Path, lines: &[RoleLine], provenance: &Provenance) -> Result<(), IoError> {
    write_json(path, &geojson(lines, provenance))
}

/// Header row plus one row per record, through the `csv` writer.
pub fn to_csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| IoError::CorruptFile(e.to_string()))?;
    }
    w.into_inner().map_err(|e| IoError::Io(e.into_error()))
}
