use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Seeds;
use crate::metrics::MetricsReport;

/// Which model and key-node source produced a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// 6-channel model given the true next key point.
    #[serde(rename = "correct")]
    Correct,
    /// 6-channel model given the voted key point.
    #[serde(rename = "predicted")]
    Predicted,
    /// 6-channel model given a wrong key point.
    #[serde(rename = "wrong")]
    Wrong,
    /// 4-channel model, no key point.
    #[serde(rename = "4ch")]
    FourCh,
    /// Constant-velocity baseline.
    #[serde(rename = "cvm")]
    Cvm,
}

impl Variant {
    pub const ABLATION: [Variant; 5] = [
        Variant::Correct,
        Variant::Predicted,
        Variant::Wrong,
        Variant::FourCh,
        Variant::Cvm,
    ];

    /// Serialized name of the variant.
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Correct => "correct",
            Variant::Predicted => "predicted",
            Variant::Wrong => "wrong",
            Variant::FourCh => "4ch",
            Variant::Cvm => "cvm",
        }
    }

    pub fn model_name(self) -> &'static str {
        match self {
            Variant::Correct | Variant::Predicted | Variant::Wrong => "ours-6ch",
            Variant::FourCh => "ours-4ch",
            Variant::Cvm => "cvm",
        }
    }
}

/// One table row: metrics of one model variant on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub variant: Variant,
    pub split: String,
    pub msep: f64,
    pub msec: f64,
    pub mfd: f64,
    /// Inference seconds; zero under a fixed clock.
    pub wall_time: f64,
    pub n_samples: usize,
    /// Share of tasks whose voted key point was the true one.
    pub nkp_accuracy: Option<f64>,
}

impl EvalRecord {
    pub fn new(variant: Variant, split: &str, m: &MetricsReport, nkp_accuracy: Option<f64>) -> Self {
        Self {
            model: variant.model_name().into(),
            variant,
            split: split.into(),
            msep: m.msep,
            msec: m.msec,
            mfd: m.mfd,
            wall_time: m.wall_time,
            n_samples: m.n_samples,
            nkp_accuracy,
        }
    }
}

/// Key-point retrieval on held-out windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NkpWindowEval {
    pub accuracy: f64,
    pub n_windows: usize,
    pub low_confidence: usize,
    pub per_label: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Seeds,
    pub records: Vec<EvalRecord>,
    pub nkp_windows: Option<NkpWindowEval>,
    pub notes: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn record(&self, variant: Variant) -> Option<&EvalRecord> {
        self.records.iter().find(|r| r.variant == variant)
    }
}

pub(crate) fn metric_notes() -> BTreeMap<String, String> {
    [
        ("metric_space", "planar (lat, lon) degrees"),
        ("msep_units", "squared degrees"),
        ("curvature_arc_length", "mean planar degree length of the adjacent segments"),
        ("wrong_nkp", "uniform over the other key nodes, seeded"),
        ("velocity_targets", "normalized components"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_and_models() {
        let tags: Vec<String> = Variant::ABLATION.iter().map(|v| serde_json::to_string(v).unwrap()).collect();
        assert_eq!(tags, ["\"correct\"", "\"predicted\"", "\"wrong\"", "\"4ch\"", "\"cvm\""]);
        for v in Variant::ABLATION {
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.tag()));
        }
        assert_eq!(Variant::Wrong.model_name(), "ours-6ch");
        assert_eq!(Variant::FourCh.model_name(), "ours-4ch");
    }

    #[test]
    fn record_copies_metrics() {
        let m = MetricsReport {
            msep: 1.0,
            msec: 2.0,
            mfd: 3.0,
            wall_time: 4.0,
            n_samples: 5,
        };
        let r = EvalRecord::new(Variant::Predicted, "test", &m, Some(0.5));
        assert_eq!((r.msep, r.msec, r.mfd, r.wall_time, r.n_samples), (1.0, 2.0, 3.0, 4.0, 5));
        assert_eq!(r.model, "ours-6ch");
        assert_eq!(r.nkp_accuracy, Some(0.5));
    }
}
