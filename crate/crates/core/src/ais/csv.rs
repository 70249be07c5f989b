use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};

use super::{AisError, AisRecord, NkpLabel};
use crate::geo::GeoPoint;

/// A data row that was skipped, with its zero-based index among data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RowWarning {
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutcome {
    pub records: Vec<AisRecord>,
    pub skipped: Vec<RowWarning>,
}

struct Columns {
    mmsi: usize,
    time: usize,
    lat: usize,
    lon: usize,
    sog: usize,
    cog: usize,
    vessel_type: usize,
    track_id: Option<usize>,
}

impl Columns {
    fn from_header(header: &::csv::StringRecord) -> Result<Self, AisError> {
        let find = |name: &'static str| {
            header
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
        };
        let need = |name: &'static str| find(name).ok_or(AisError::MissingColumn(name));
        Ok(Self {
            mmsi: need("MMSI")?,
            time: need("BaseDateTime")?,
            lat: need("LAT")?,
            lon: need("LON")?,
            sog: need("SOG")?,
            cog: need("COG")?,
            vessel_type: need("VesselType")?,
            track_id: find("TrackID"),
        })
    }
}

/// Parses an ISO-8601 timestamp as UTC epoch seconds. A missing offset is
/// read as UTC.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            let dt = dt.and_utc();
            return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
        }
    }
    None
}

pub fn format_timestamp(t: f64) -> String {
    let secs = t.floor();
    let nanos = ((t - secs) * 1e9).round() as u32;
    match DateTime::from_timestamp(secs as i64, nanos.min(999_999_999)) {
        Some(dt) if nanos == 0 => dt.format("%Y-%m-%dT%H:%M:%S").to_string(),
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.f").to_string(),
        None => String::from("invalid"),
    }
}

fn parse_row(rec: &::csv::StringRecord, cols: &Columns) -> Result<AisRecord, String> {
    let field = |i: usize| rec.get(i).map(str::trim).ok_or_else(|| format!("missing field {i}"));
    let num = |i: usize, what: &str| -> Result<f64, String> {
        let raw = field(i)?;
        let v: f64 = raw.parse().map_err(|_| format!("bad {what} {raw:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {what}"))
        }
    };
    let mmsi_raw = field(cols.mmsi)?;
    let mmsi: u64 = mmsi_raw
        .parse()
        .map_err(|_| format!("bad MMSI {mmsi_raw:?}"))?;
    let time_raw = field(cols.time)?;
    let timestamp = parse_timestamp(time_raw).ok_or_else(|| format!("bad timestamp {time_raw:?}"))?;
    let lat = num(cols.lat, "LAT")?;
    let lon = num(cols.lon, "LON")?;
    if !(-180.0..=180.0).contains(&lon) {
        return Err(format!("LON {lon} out of range"));
    }
    let pos = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
    let sog_knots = num(cols.sog, "SOG")?;
    if sog_knots < 0.0 {
        return Err(format!("negative SOG {sog_knots}"));
    }
    let cog = num(cols.cog, "COG")?;
    if !(0.0..=360.0).contains(&cog) {
        return Err(format!("COG {cog} out of range"));
    }
    let cog_deg = if cog == 360.0 { 0.0 } else { cog };
    let vt_raw = field(cols.vessel_type)?;
    // unknown ship type is reported as an empty field
    let vessel_type = if vt_raw.is_empty() {
        0
    } else {
        vt_raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0 && v.fract() == 0.0 && *v <= u32::MAX as f64)
            .map(|v| v as u32)
            .ok_or_else(|| format!("bad VesselType {vt_raw:?}"))?
    };
    let track_id = cols
        .track_id
        .and_then(|i| rec.get(i))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned);
    Ok(AisRecord {
        mmsi,
        timestamp,
        pos,
        sog_knots,
        cog_deg,
        vessel_type,
        track_id,
    })
}

/// Header-driven AIS CSV parser. Rows that fail to parse or violate record
/// invariants are skipped and reported; a missing required column is fatal.
pub fn parse_ais_csv<R: Read>(input: R) -> Result<ParseOutcome, AisError> {
    let mut reader = ::csv::ReaderBuilder::new()
        .flexible(true)
        .trim(::csv::Trim::None)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| AisError::Csv(e.to_string()))?
        .clone();
    let cols = Columns::from_header(&header)?;
    let mut out = ParseOutcome::default();
    for (row, rec) in reader.records().enumerate() {
        let parsed = rec
            .map_err(|e| e.to_string())
            .and_then(|r| parse_row(&r, &cols));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => out.skipped.push(RowWarning { row, message }),
        }
    }
    Ok(out)
}

/// Writes records in the same column layout the parser reads. When
/// `labels` is given, a trailing `NKP` column carries one label per record.
pub fn write_ais_csv<W: Write>(
    out: W,
    records: &[AisRecord],
    labels: Option<&[Option<NkpLabel>]>,
) -> Result<(), AisError> {
    let mut w = ::csv::Writer::from_writer(out);
    let csv_err = |e: ::csv::Error| AisError::Csv(e.to_string());
    let mut header = vec![
        "MMSI",
        "BaseDateTime",
        "LAT",
        "LON",
        "SOG",
        "COG",
        "VesselType",
        "TrackID",
    ];
    if labels.is_some() {
        header.push("NKP");
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            r.mmsi.to_string(),
            format_timestamp(r.timestamp),
            r.pos.lat.to_string(),
            r.pos.lon.to_string(),
            r.sog_knots.to_string(),
            r.cog_deg.to_string(),
            r.vessel_type.to_string(),
            r.track_id.clone().unwrap_or_default(),
        ];
        if let Some(ls) = labels {
            row.push(ls.get(i).cloned().flatten().map(|l| l.0).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AisError::Csv(e.to_string()))?;
    Ok(())
}
