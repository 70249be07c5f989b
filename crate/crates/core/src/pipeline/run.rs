use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::data::{Dataset, EvalTask, Split};
use super::report::{metric_notes, EvalRecord, EvalReport, NkpWindowEval, Variant};
use super::{ModelKind, NkpMode, PipelineError, RunConfig, Seeds};
use crate::ais::{
    sample_reference_set, split_by_mmsi, synth_fleet, write_ais_csv, KeyNode, KeyNodeRecord, MmsiSplit, NkpLabel,
    NormalizationSpec, Window,
};
use crate::geo::{EarthModel, GeoPoint};
use crate::io::{
    self, load_encoder, load_predictor, load_reference_db, load_spec, read_json, save_encoder, save_predictor,
    save_reference_db, save_spec, to_csv_bytes, write_geojson, write_json, Provenance, Role, RoleLine, Stamped,
};
use crate::metrics::{MetricsReport, Polyline};
use crate::nkp::{
    build_reference_db, encoder_features, predict_nkp, train_encoder, EncoderParams, ReferenceDb,
};
use crate::predictor::{
    cvm_baseline, integrated_predict, rollout_predict, train_alternating, PredictionTask, PredictorParams,
    TrainingWindow,
};
use crate::verify;

/// Environment variable capping evaluation threads.
pub const THREADS_ENV: &str = "HELM_SKETCH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Synth,
    Ingest,
    TrainEncoder,
    BuildDb,
    TrainPredictor,
    Predict,
    Evaluate,
    Ablate,
    InfoCheck,
    Verify,
}

/// What a subcommand wrote, whether its checks held, and a JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub command: Command,
    pub pass: bool,
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
}

/// Fixed artifact locations.
pub mod artifact {
    pub const SPEC: &str = "spec.json";
    pub const SPLIT: &str = "split.json";
    pub const FLEET: &str = "fleet.json";
    pub const INGEST: &str = "ingest.json";
    pub const ENCODER: &str = "encoder.bin";
    pub const REFERENCE_DB: &str = "reference_db.bin";
    pub const ENCODER_REPORT: &str = "train_encoder.json";
    pub const DB_REPORT: &str = "build_db.json";
    pub const PREDICTIONS: &str = "predictions.geojson";
    pub const EVAL_JSON: &str = "eval.json";
    pub const EVAL_CSV: &str = "eval.csv";
    pub const ABLATION_JSON: &str = "ablation.json";
    pub const ABLATION_CSV: &str = "ablation.csv";
    pub const INFO_CHECK: &str = "info_check.json";
    pub const VERIFY: &str = "verify.json";

    pub fn predictor(channels: usize) -> String {
        format!("predictor_{channels}ch.bin")
    }

    pub fn predictor_report(channels: usize) -> String {
        format!("train_predictor_{channels}ch.json")
    }
}

/// Provenance of every artifact of a run. The hash covers the whole
/// configuration except file locations.
pub fn provenance(cfg: &RunConfig) -> Result<Provenance, PipelineError> {
    let mut canon = cfg.clone();
    canon.paths = Default::default();
    let created = if cfg.fixed_clock {
        "1970-01-01T00:00:00Z".to_string()
    } else {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    };
    Ok(Provenance {
        config_hash: io::config_hash(&canon)?,
        seed: cfg.seed,
        created,
    })
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    cfg.validate()?;
    match command {
        Command::Synth => synth(cfg),
        Command::Ingest => ingest(cfg),
        Command::TrainEncoder => train_encoder_cmd(cfg),
        Command::BuildDb => build_db(cfg),
        Command::TrainPredictor => train_predictor(cfg),
        Command::Predict => predict(cfg),
        Command::Evaluate => evaluate(cfg),
        Command::Ablate => ablate(cfg),
        Command::InfoCheck => info_check(cfg),
        Command::Verify => verify_cmd(cfg),
    }
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.output.join(name)
}

fn ckpt(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.checkpoints.join(name)
}

/// `path` if it exists, else a missing-input error naming the producing stage.
fn require(path: PathBuf, producer: &str) -> Result<PathBuf, PipelineError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::Missing {
            path,
            reason: format!("not found; run `{producer}` first"),
        })
    }
}

fn outcome(command: Command, pass: bool, artifacts: Vec<PathBuf>, summary: Value) -> Outcome {
    Outcome {
        command,
        pass,
        artifacts,
        summary,
    }
}

fn stamped<T: Serialize>(prov: &Provenance, body: T) -> Stamped<T> {
    Stamped {
        provenance: prov.clone(),
        body,
    }
}

fn synth(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let earth = cfg.earth()?;
    let fleet = synth_fleet(&cfg.fleet, &earth)?;
    let mut csv = Vec::new();
    write_ais_csv(&mut csv, &fleet.records, Some(&fleet.labels))?;
    io::atomic_write(&cfg.paths.data, &csv)?;
    let nodes: Vec<KeyNodeRecord> = cfg.fleet.nodes.iter().cloned().map(KeyNodeRecord::from).collect();
    write_json(&cfg.paths.key_nodes, &nodes)?;
    let prov = provenance(cfg)?;
    let fleet_path = out(cfg, artifact::FLEET);
    write_json(&fleet_path, &stamped(&prov, json!({ "fleet": cfg.fleet })))?;
    let summary = json!({
        "records": fleet.records.len(),
        "vessels": cfg.fleet.n_vessels,
        "key_nodes": nodes.len(),
    });
    Ok(outcome(
        Command::Synth,
        true,
        vec![cfg.paths.data.clone(), cfg.paths.key_nodes.clone(), fleet_path],
        summary,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitBody {
    seeds: Seeds,
    split: MmsiSplit,
}

fn ingest(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let ds = Dataset::load(cfg)?;
    let earth = cfg.earth()?;
    let seeds = cfg.seeds();
    let split = split_by_mmsi(ds.tracks.iter().map(|t| t.mmsi), cfg.val_frac, cfg.test_frac, seeds.split);
    if !split.is_disjoint() {
        return Err(PipelineError::Config("MMSI split is not disjoint".into()));
    }
    let spec = ds.fit_spec(&split, cfg.spec_margin_deg)?;
    let prov = provenance(cfg)?;
    let spec_path = out(cfg, artifact::SPEC);
    let split_path = out(cfg, artifact::SPLIT);
    save_spec(&spec_path, &spec, &prov)?;
    write_json(&split_path, &stamped(&prov, SplitBody { seeds, split: split.clone() }))?;

    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for which in [Split::Train, Split::Val, Split::Test] {
        let l = cfg.encoder_windows;
        for w in ds.windows(&split, which, l.l_seq, l.stride, &earth) {
            *labels.entry(w.label.expect("labeled").0).or_default() += 1;
        }
    }
    let summary = json!({
        "tracks": ds.tracks.len(),
        "row_warnings": ds.warnings,
        "train_mmsi": split.train.len(),
        "val_mmsi": split.val.len(),
        "test_mmsi": split.test.len(),
        "windows_per_label": labels,
    });
    let ingest_path = out(cfg, artifact::INGEST);
    write_json(&ingest_path, &stamped(&prov, summary.clone()))?;
    Ok(outcome(Command::Ingest, true, vec![spec_path, split_path, ingest_path], summary))
}

/// Dataset plus the normalization and split written by ingestion.
struct Prepared {
    ds: Dataset,
    spec: NormalizationSpec,
    split: MmsiSplit,
    earth: EarthModel,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    let ds = Dataset::load(cfg)?;
    let spec = load_spec(&require(out(cfg, artifact::SPEC), "ingest")?)?;
    let body: Stamped<SplitBody> = read_json(&require(out(cfg, artifact::SPLIT), "ingest")?)?;
    if !body.body.split.is_disjoint() {
        return Err(PipelineError::Config("stored MMSI split is not disjoint".into()));
    }
    Ok(Prepared {
        ds,
        spec,
        split: body.body.split,
        earth: cfg.earth()?,
    })
}

fn encoder_windows(cfg: &RunConfig, p: &Prepared, which: Split) -> Vec<Window> {
    let l = cfg.encoder_windows;
    p.ds.windows(&p.split, which, l.l_seq, l.stride, &p.earth)
}

fn spec_hash(spec: &NormalizationSpec) -> Result<String, PipelineError> {
    Ok(io::config_hash(spec)?)
}

fn train_encoder_cmd(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let p = prepare(cfg)?;
    let seeds = cfg.seeds();
    let windows = encoder_windows(cfg, &p, Split::Train);
    let samples = windows
        .iter()
        .map(|w| Ok((encoder_features(w, &p.spec)?, w.label.clone().expect("labeled"))))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let contrastive = crate::nkp::ContrastiveConfig {
        seed: seeds.encoder,
        ..cfg.contrastive.clone()
    };
    let trained = train_encoder(&samples, &contrastive)?;
    let prov = provenance(cfg)?;
    let path = ckpt(cfg, artifact::ENCODER);
    let sidecar = json!({
        "contrastive": contrastive,
        "seeds": seeds,
        "spec_sha256": spec_hash(&p.spec)?,
        "loss_curve": trained.loss_curve,
        "windows": windows.len(),
    });
    save_encoder(&path, &trained.params, &prov, &stamped(&prov, sidecar))?;
    let summary = json!({
        "windows": windows.len(),
        "epochs": trained.loss_curve.len(),
        "first_loss": trained.loss_curve.first(),
        "last_loss": trained.loss_curve.last(),
    });
    let report = out(cfg, artifact::ENCODER_REPORT);
    write_json(&report, &stamped(&prov, summary.clone()))?;
    Ok(outcome(Command::TrainEncoder, true, vec![path, report], summary))
}

/// Voting accuracy on labeled windows of one split.
pub fn nkp_window_accuracy(
    windows: &[Window],
    spec: &NormalizationSpec,
    encoder: &EncoderParams,
    db: &ReferenceDb,
    tau: f64,
) -> Result<NkpWindowEval, PipelineError> {
    let preds = windows
        .par_iter()
        .map(|w| Ok(predict_nkp(&encoder_features(w, spec)?, db, encoder, tau)?))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    let mut low = 0;
    for (w, p) in windows.iter().zip(&preds) {
        let truth = w.label.as_ref().expect("labeled");
        let e = hits.entry(truth.0.clone()).or_default();
        e.1 += 1;
        if &p.label == truth {
            correct += 1;
            e.0 += 1;
        }
        low += usize::from(p.low_confidence);
    }
    let n = windows.len();
    Ok(NkpWindowEval {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        n_windows: n,
        low_confidence: low,
        per_label: hits.into_iter().map(|(k, (c, t))| (k, c as f64 / t as f64)).collect(),
    })
}

fn build_db(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let p = prepare(cfg)?;
    let (encoder, _) = load_encoder(&require(ckpt(cfg, artifact::ENCODER), "train-encoder")?)?;
    let refs = sample_reference_set(&encoder_windows(cfg, &p, Split::Train), cfg.quota, cfg.seeds().reference);
    let db = build_reference_db(&refs, &encoder, &p.spec)?;
    let prov = provenance(cfg)?;
    let path = ckpt(cfg, artifact::REFERENCE_DB);
    save_reference_db(&path, &db, &prov)?;
    let eval = nkp_window_accuracy(&encoder_windows(cfg, &p, Split::Test), &p.spec, &encoder, &db, cfg.tau)?;
    let summary = json!({
        "entries": db.len(),
        "labels": db.nodes.keys().map(|l| l.0.clone()).collect::<Vec<_>>(),
        "test_windows": eval,
    });
    let report = out(cfg, artifact::DB_REPORT);
    write_json(&report, &stamped(&prov, summary.clone()))?;
    Ok(outcome(Command::BuildDb, true, vec![path, report], summary))
}

fn train_predictor(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let p = prepare(cfg)?;
    let seeds = cfg.seeds();
    let l = cfg.predictor_windows;
    let windows = p.ds.windows(&p.split, Split::Train, l.l_seq, l.stride, &p.earth);
    let tws = windows
        .iter()
        .map(|w| TrainingWindow::new(w, &p.spec, cfg.channels, None, cfg.dt))
        .collect::<Result<Vec<_>, _>>()?;
    let schedule = crate::predictor::TrainSchedule {
        seed: seeds.schedule,
        ..cfg.schedule.clone()
    };
    let init = PredictorParams::init(cfg.predictor.context, cfg.channels, cfg.predictor.hidden, seeds.predictor_init);
    let trained = train_alternating(&tws, &schedule, init, &p.spec, &p.earth)?;
    let prov = provenance(cfg)?;
    let path = ckpt(cfg, &artifact::predictor(cfg.channels));
    let sidecar = json!({
        "schedule": schedule,
        "spec_sha256": spec_hash(&p.spec)?,
        "seeds": seeds,
        "vol_curve": trained.vol_curve,
        "coord_curve": trained.coord_curve,
        "windows": windows.len(),
    });
    save_predictor(&path, &trained.params, &prov, &stamped(&prov, sidecar))?;
    let summary = json!({
        "channels": cfg.channels,
        "windows": windows.len(),
        "last_vol_loss": trained.vol_curve.last(),
        "last_coord_loss": trained.coord_curve.last(),
    });
    let report = out(cfg, &artifact::predictor_report(cfg.channels));
    write_json(&report, &stamped(&prov, summary.clone()))?;
    Ok(outcome(Command::TrainPredictor, true, vec![path, report], summary))
}

/// Models loaded for the variants being evaluated.
struct Models {
    six: Option<PredictorParams>,
    four: Option<PredictorParams>,
    encoder: Option<EncoderParams>,
    db: Option<ReferenceDb>,
}

impl Models {
    fn load(cfg: &RunConfig, variants: &[Variant]) -> Result<Self, PipelineError> {
        let needs = |vs: &[Variant]| variants.iter().any(|v| vs.contains(v));
        let six = needs(&[Variant::Correct, Variant::Predicted, Variant::Wrong])
            .then(|| Ok::<_, PipelineError>(load_predictor(&require(ckpt(cfg, &artifact::predictor(6)), "train-predictor")?, Some(6))?))
            .transpose()?
            .map(|p| p.0);
        let four = needs(&[Variant::FourCh])
            .then(|| Ok::<_, PipelineError>(load_predictor(&require(ckpt(cfg, &artifact::predictor(4)), "train-predictor --channels 4")?, Some(4))?))
            .transpose()?
            .map(|p| p.0);
        let (encoder, db) = if needs(&[Variant::Predicted]) {
            (
                Some(load_encoder(&require(ckpt(cfg, artifact::ENCODER), "train-encoder")?)?.0),
                Some(load_reference_db(&require(ckpt(cfg, artifact::REFERENCE_DB), "build-db")?)?.0),
            )
        } else {
            (None, None)
        };
        Ok(Self { six, four, encoder, db })
    }
}

fn variant_of(cfg: &RunConfig) -> Variant {
    match (cfg.model, cfg.channels, cfg.nkp) {
        (ModelKind::Cvm, _, _) => Variant::Cvm,
        (ModelKind::Ours, 4, _) => Variant::FourCh,
        (ModelKind::Ours, _, NkpMode::Oracle) => Variant::Correct,
        (ModelKind::Ours, _, NkpMode::Predicted) => Variant::Predicted,
        (ModelKind::Ours, _, NkpMode::Wrong) => Variant::Wrong,
    }
}

/// One wrong key node per task, drawn in task order.
fn wrong_nodes(tasks: &[EvalTask], nodes: &[KeyNode], seed: u64) -> Result<Vec<GeoPoint>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tasks
        .iter()
        .map(|t| {
            let others: Vec<&KeyNode> = nodes.iter().filter(|n| n.id != t.label).collect();
            others
                .choose(&mut rng)
                .map(|n| n.center)
                .ok_or_else(|| PipelineError::Config("wrong key point needs at least two key nodes".into()))
        })
        .collect()
}

fn infer(
    variant: Variant,
    task: &EvalTask,
    wrong: GeoPoint,
    models: &Models,
    cfg: &RunConfig,
    spec: &NormalizationSpec,
    earth: &EarthModel,
) -> Result<(Polyline, Option<NkpLabel>), PipelineError> {
    let mut pt = PredictionTask {
        history: task.history.clone(),
        horizon: task.truth.len(),
        nkp: None,
        dt: cfg.dt,
    };
    let six = || models.six.as_ref().expect("loaded");
    Ok(match variant {
        Variant::Cvm => (cvm_baseline(&pt, earth)?, None),
        Variant::FourCh => (rollout_predict(&pt, models.four.as_ref().expect("loaded"), spec, earth)?, None),
        Variant::Correct => {
            pt.nkp = Some(task.node);
            (rollout_predict(&pt, six(), spec, earth)?, None)
        }
        Variant::Wrong => {
            pt.nkp = Some(wrong);
            (rollout_predict(&pt, six(), spec, earth)?, None)
        }
        Variant::Predicted => {
            let (enc, db) = (models.encoder.as_ref().expect("loaded"), models.db.as_ref().expect("loaded"));
            let r = integrated_predict(&pt, db, enc, six(), cfg.tau, spec, earth)?;
            (r.polyline, Some(r.nkp.label))
        }
    })
}

/// Thread count for evaluation: the environment cap if set, else all cores.
pub fn eval_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs every variant on the same held-out tasks.
pub fn evaluate_variants(cfg: &RunConfig, variants: &[Variant]) -> Result<EvalReport, PipelineError> {
    cfg.validate()?;
    let p = prepare(cfg)?;
    let tasks = p.ds.tasks(&p.split, Split::Test, cfg)?;
    if tasks.is_empty() {
        return Err(PipelineError::NoTasks("the test split yields no task of the configured length".into()));
    }
    let models = Models::load(cfg, variants)?;
    let wrong = wrong_nodes(&tasks, &p.ds.nodes, cfg.seeds().wrong_nkp)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(eval_threads())
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut records = Vec::new();
    for &v in variants {
        let clock = Instant::now();
        let preds = pool.install(|| {
            tasks
                .par_iter()
                .zip(&wrong)
                .map(|(t, w)| infer(v, t, *w, &models, cfg, &p.spec, &p.earth))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let wall = if cfg.fixed_clock { 0.0 } else { clock.elapsed().as_secs_f64() };
        let pairs: Vec<(Polyline, Polyline)> = preds
            .iter()
            .zip(&tasks)
            .map(|((poly, _), t)| (poly.clone(), t.truth.clone()))
            .collect();
        let metrics = MetricsReport::from_pairs(&pairs, wall)?;
        let acc = (v == Variant::Predicted).then(|| {
            let hits = preds.iter().zip(&tasks).filter(|((_, l), t)| l.as_ref() == Some(&t.label)).count();
            hits as f64 / tasks.len() as f64
        });
        records.push(EvalRecord::new(v, "test", &metrics, acc));
    }
    let nkp_windows = match (&models.encoder, &models.db) {
        (Some(enc), Some(db)) => Some(nkp_window_accuracy(
            &encoder_windows(cfg, &p, Split::Test),
            &p.spec,
            enc,
            db,
            cfg.tau,
        )?),
        _ => None,
    };
    Ok(EvalReport {
        seeds: cfg.seeds(),
        records,
        nkp_windows,
        notes: metric_notes(),
    })
}

fn write_report(cfg: &RunConfig, report: &EvalReport, json_name: &str, csv_name: &str) -> Result<Vec<PathBuf>, PipelineError> {
    let prov = provenance(cfg)?;
    let jp = out(cfg, json_name);
    let cp = out(cfg, csv_name);
    write_json(&jp, &stamped(&prov, report))?;
    let mut csv = format!("# config_hash={} seed={}\n", prov.config_hash, prov.seed).into_bytes();
    csv.extend(to_csv_bytes(&report.records)?);
    io::atomic_write(&cp, &csv)?;
    Ok(vec![jp, cp])
}

fn evaluate(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let report = evaluate_variants(cfg, &[variant_of(cfg)])?;
    let paths = write_report(cfg, &report, artifact::EVAL_JSON, artifact::EVAL_CSV)?;
    Ok(outcome(Command::Evaluate, true, paths, serde_json::to_value(&report.records).map_err(io::IoError::from)?))
}

fn ablate(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let report = evaluate_variants(cfg, &Variant::ABLATION)?;
    let paths = write_report(cfg, &report, artifact::ABLATION_JSON, artifact::ABLATION_CSV)?;
    let mfd = |v| report.record(v).map(|r| r.mfd).unwrap_or(f64::NAN);
    let sandwich = mfd(Variant::Correct) <= mfd(Variant::Predicted) && mfd(Variant::Predicted) <= mfd(Variant::Wrong);
    let summary = json!({
        "mfd": Variant::ABLATION.iter().map(|v| (v.tag(), mfd(*v))).collect::<BTreeMap<_, _>>(),
        "sandwich_holds": sandwich,
        "six_beats_four": mfd(Variant::Correct) < mfd(Variant::FourCh),
    });
    Ok(outcome(Command::Ablate, true, paths, summary))
}

fn predict(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let variant = variant_of(cfg);
    let p = prepare(cfg)?;
    let tasks = p.ds.tasks(&p.split, Split::Test, cfg)?;
    let models = Models::load(cfg, &[variant])?;
    let wrong = wrong_nodes(&tasks, &p.ds.nodes, cfg.seeds().wrong_nkp)?;
    let role = if variant == Variant::Cvm { Role::Baseline } else { Role::Prediction };
    let model = format!("{}:{}", variant.model_name(), variant.tag());
    let mut lines = Vec::with_capacity(tasks.len() * 3);
    for (t, w) in tasks.iter().zip(&wrong) {
        let (poly, _) = infer(variant, t, *w, &models, cfg, &p.spec, &p.earth)?;
        let line = |role, polyline| RoleLine {
            role,
            model: model.clone(),
            mmsi: t.mmsi,
            seed: cfg.seed,
            polyline,
        };
        lines.push(line(Role::History, Polyline::new(t.history.positions.clone())));
        lines.push(line(Role::Truth, t.truth.clone()));
        lines.push(line(role, poly));
    }
    let path = out(cfg, artifact::PREDICTIONS);
    write_geojson(&path, &lines, &provenance(cfg)?)?;
    Ok(outcome(Command::Predict, true, vec![path], json!({ "tasks": tasks.len(), "features": lines.len() })))
}

fn info_check(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let checks = verify::info_suite(1000, cfg.seed);
    let pass = checks.iter().all(|c| c.pass);
    let path = out(cfg, artifact::INFO_CHECK);
    let body = json!({ "pass": pass, "checks": checks });
    write_json(&path, &stamped(&provenance(cfg)?, body.clone()))?;
    Ok(outcome(Command::InfoCheck, pass, vec![path], body))
}

fn verify_cmd(cfg: &RunConfig) -> Result<Outcome, PipelineError> {
    let checks = verify::run_suite(cfg.seed);
    let pass = checks.iter().all(|c| c.pass);
    let path = out(cfg, artifact::VERIFY);
    let body = json!({ "pass": pass, "checks": checks });
    fs::create_dir_all(&cfg.paths.output).map_err(io::IoError::from)?;
    write_json(&path, &stamped(&provenance(cfg)?, body.clone()))?;
    Ok(outcome(Command::Verify, pass, vec![path], body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Fixture;
    use std::path::Path;

    #[test]
    fn provenance_ignores_paths_and_pins_clock() {
        let mut a = RunConfig::preset(Fixture::Ring, Path::new("a"));
        let mut b = RunConfig::preset(Fixture::Ring, Path::new("elsewhere/b"));
        a.fixed_clock = true;
        b.fixed_clock = true;
        let (pa, pb) = (provenance(&a).unwrap(), provenance(&b).unwrap());
        assert_eq!(pa, pb);
        assert_eq!(pa.created, "1970-01-01T00:00:00Z");
        b.seed = 1;
        assert_ne!(provenance(&b).unwrap().config_hash, pa.config_hash);
    }

    #[test]
    fn variant_follows_flags() {
        let mut c = RunConfig::default();
        c.nkp = NkpMode::Oracle;
        assert_eq!(variant_of(&c), Variant::Correct);
        c.nkp = NkpMode::Wrong;
        assert_eq!(variant_of(&c), Variant::Wrong);
        c.channels = 4;
        assert_eq!(variant_of(&c), Variant::FourCh);
        c.model = ModelKind::Cvm;
        assert_eq!(variant_of(&c), Variant::Cvm);
    }

    #[test]
    fn wrong_nodes_avoid_truth_and_repeat() {
        let cfg = RunConfig::preset(Fixture::Ring, Path::new("x"));
        let nodes = cfg.fleet.nodes.clone();
        let w = crate::ais::Window {
            mmsi: 1,
            track_t0: 0.0,
            start: 0,
            positions: vec![],
            velocities: vec![],
            label: None,
            nkp: None,
        };
        let tasks: Vec<EvalTask> = nodes
            .iter()
            .cycle()
            .take(40)
            .map(|n| EvalTask {
                mmsi: 1,
                end: 0,
                label: n.id.clone(),
                node: n.center,
                history: w.clone(),
                truth: Polyline::new(vec![]),
            })
            .collect();
        let a = wrong_nodes(&tasks, &nodes, 3).unwrap();
        assert_eq!(a, wrong_nodes(&tasks, &nodes, 3).unwrap());
        for (t, p) in tasks.iter().zip(&a) {
            assert_ne!(t.node, *p);
        }
        assert!(wrong_nodes(&tasks[..1], &nodes[..1], 3).is_err());
    }

    #[test]
    fn missing_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::preset(Fixture::Ring, dir.path());
        let err = run(Command::Ingest, &cfg).unwrap_err();
        assert_eq!(err.kind(), "missing_input");
        run(Command::Synth, &cfg).unwrap();
        let err = run(Command::TrainEncoder, &cfg).unwrap_err();
        assert_eq!(err.kind(), "missing_input");
        assert!(err.to_string().contains("ingest"));
    }
}
