use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{cosine_similarity, encode, Embedding, EncoderParams, NkpError};
use crate::ais::{normalize, Features, NkpLabel, NormalizationSpec, Window};
use crate::geo::GeoPoint;

/// Where a reference entry came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub mmsi: u64,
    pub track_t0: f64,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbEntry {
    pub embedding: Embedding,
    pub label: NkpLabel,
    pub meta: EntryMeta,
}

/// Labeled embeddings queried by flat scan, plus the coordinates of every
/// label's key node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDb {
    pub entries: Vec<DbEntry>,
    pub nodes: BTreeMap<NkpLabel, GeoPoint>,
}

impl ReferenceDb {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Embedding dimension, if any entry exists.
    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.embedding.dim())
    }

    /// Adds one entry. `node` registers the label's key-node position and
    /// may be omitted for labels already known.
    pub fn append(
        &mut self,
        embedding: Embedding,
        label: NkpLabel,
        node: Option<GeoPoint>,
        meta: EntryMeta,
    ) -> Result<(), NkpError> {
        if let Some(d) = self.dim() {
            if d != embedding.dim() {
                return Err(NkpError::ShapeMismatch(format!(
                    "db holds {d}-dim embeddings, got {}",
                    embedding.dim()
                )));
            }
        }
        match node {
            Some(p) => {
                self.nodes.insert(label.clone(), p);
            }
            None if !self.nodes.contains_key(&label) => {
                return Err(NkpError::UnknownLabel(label));
            }
            None => {}
        }
        self.entries.push(DbEntry {
            embedding,
            label,
            meta,
        });
        Ok(())
    }

    /// Encodes and appends labeled windows; no retraining is involved.
    pub fn extend_windows(
        &mut self,
        windows: &[Window],
        params: &EncoderParams,
        spec: &NormalizationSpec,
    ) -> Result<(), NkpError> {
        for w in windows {
            let (Some(label), Some(node)) = (&w.label, w.nkp) else {
                return Err(NkpError::Unlabeled {
                    mmsi: w.mmsi,
                    start: w.start,
                });
            };
            let feats = encoder_features(w, spec)?;
            let meta = EntryMeta {
                mmsi: w.mmsi,
                track_t0: w.track_t0,
                start: w.start,
            };
            self.append(encode(&feats, params)?, label.clone(), Some(node), meta)?;
        }
        Ok(())
    }
}

/// Four-channel encoder input of a window; key-node channels are dropped.
pub fn encoder_features(w: &Window, spec: &NormalizationSpec) -> Result<Features, NkpError> {
    Ok(normalize(w, spec)?.take_channels(super::ENCODER_INPUTS))
}

/// One entry per labeled window.
pub fn build_reference_db(
    windows: &[Window],
    params: &EncoderParams,
    spec: &NormalizationSpec,
) -> Result<ReferenceDb, NkpError> {
    let mut db = ReferenceDb::default();
    db.extend_windows(windows, params, spec)?;
    Ok(db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub index: usize,
    pub similarity: f64,
    pub label: NkpLabel,
}

fn similarities(query: &Embedding, db: &ReferenceDb) -> Result<Vec<f64>, NkpError> {
    if db.is_empty() {
        return Err(NkpError::EmptyDb);
    }
    db.entries
        .iter()
        .map(|e| cosine_similarity(query, &e.embedding))
        .collect()
}

/// The `k` most similar entries, most similar first; equal similarities
/// keep insertion order. `k` is clipped to the database size.
pub fn retrieve_topk(query: &Embedding, db: &ReferenceDb, k: usize) -> Result<Vec<Retrieved>, NkpError> {
    if k == 0 {
        return Err(NkpError::InvalidConfig("k must be at least 1".into()));
    }
    let sims = similarities(query, db)?;
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].partial_cmp(&sims[a]).unwrap_or(Ordering::Equal));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| Retrieved {
            index: i,
            similarity: sims[i],
            label: db.entries[i].label.clone(),
        })
        .collect())
}

/// Threshold-voting outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NkpPrediction {
    pub label: NkpLabel,
    /// Votes per label from entries with similarity at or above the threshold.
    pub votes: BTreeMap<NkpLabel, usize>,
    pub max_similarity: f64,
    /// No entry reached the threshold; the label is the nearest neighbour's.
    pub low_confidence: bool,
}

impl NkpPrediction {
    /// Vote counts normalized to frequencies; empty when nobody voted.
    pub fn distribution(&self) -> BTreeMap<NkpLabel, f64> {
        let total: usize = self.votes.values().sum();
        if total == 0 {
            return BTreeMap::new();
        }
        self.votes
            .iter()
            .map(|(l, c)| (l.clone(), *c as f64 / total as f64))
            .collect()
    }
}

/// Threshold voting over an embedded query. Every entry with similarity at
/// least `tau` votes for its label and the most-voted label wins; ties go to
/// the higher mean similarity among voters, then to the smaller label.
pub fn vote(query: &Embedding, db: &ReferenceDb, tau: f64) -> Result<NkpPrediction, NkpError> {
    let sims = similarities(query, db)?;
    let mut tally: BTreeMap<&NkpLabel, (usize, f64)> = BTreeMap::new();
    let mut best = 0;
    for (i, (s, e)) in sims.iter().zip(&db.entries).enumerate() {
        if *s > sims[best] {
            best = i;
        }
        if *s >= tau {
            let t = tally.entry(&e.label).or_default();
            t.0 += 1;
            t.1 += s;
        }
    }
    let votes: BTreeMap<NkpLabel, usize> = tally.iter().map(|(l, t)| ((*l).clone(), t.0)).collect();
    // BTreeMap iterates in label order, so a strict comparison keeps the
    // smallest label on a full tie.
    let winner = tally
        .iter()
        .fold(None::<(&NkpLabel, usize, f64)>, |acc, (l, (c, sum))| {
            let mean = sum / *c as f64;
            match acc {
                Some((_, bc, bm)) if (*c, mean) <= (bc, bm) => acc,
                _ => Some((l, *c, mean)),
            }
        });
    let (label, low_confidence) = match winner {
        Some((l, _, _)) => (l.clone(), false),
        None => (db.entries[best].label.clone(), true),
    };
    Ok(NkpPrediction {
        label,
        votes,
        max_similarity: sims[best],
        low_confidence,
    })
}

/// Embeds `features` and runs [`vote`].
pub fn predict_nkp(
    features: &Features,
    db: &ReferenceDb,
    params: &EncoderParams,
    tau: f64,
) -> Result<NkpPrediction, NkpError> {
    if db.is_empty() {
        return Err(NkpError::EmptyDb);
    }
    vote(&encode(features, params)?, db, tau)
}
