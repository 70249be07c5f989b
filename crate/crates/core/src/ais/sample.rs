use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NkpLabel, Window};

/// Stratified reference sampling: every label with at least `quota` windows
/// contributes exactly `quota` of them, chosen uniformly with a seeded RNG;
/// labels below quota are dropped. Output is grouped by label in label
/// order, keeping input order within a label.
pub fn sample_reference_set(windows: &[Window], quota: usize, seed: u64) -> Vec<Window> {
    assert!(quota >= 1, "quota must be at least 1");
    let mut by_label: BTreeMap<&NkpLabel, Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        if let Some(l) = &w.label {
            by_label.entry(l).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for idx in by_label.values() {
        if idx.len() < quota {
            continue;
        }
        let mut picked: Vec<usize> = index::sample(&mut rng, idx.len(), quota)
            .into_iter()
            .map(|k| idx[k])
            .collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| windows[i].clone()));
    }
    out
}

/// Disjoint MMSI sets for training, validation and testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MmsiSplit {
    pub train: BTreeSet<u64>,
    pub val: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
}

impl MmsiSplit {
    pub fn is_disjoint(&self) -> bool {
        self.train.is_disjoint(&self.val)
            && self.train.is_disjoint(&self.test)
            && self.val.is_disjoint(&self.test)
    }
}

/// Shuffles the distinct MMSIs with `seed` and cuts them by the given
/// validation and test fractions; the remainder trains.
pub fn split_by_mmsi<I: IntoIterator<Item = u64>>(
    mmsis: I,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> MmsiSplit {
    let mut ids: Vec<u64> = mmsis.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let n_test = ((n as f64) * test_frac).round() as usize;
    let n_val = (((n as f64) * val_frac).round() as usize).min(n - n_test.min(n));
    let n_test = n_test.min(n);
    let test = ids[..n_test].iter().copied().collect();
    let val = ids[n_test..n_test + n_val].iter().copied().collect();
    let train = ids[n_test + n_val..].iter().copied().collect();
    MmsiSplit { train, val, test }
}
