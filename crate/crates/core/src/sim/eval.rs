//! Closed-loop evaluation: random placements, rendering, prediction,
//! decoding and simulated execution, plus the acceptance-threshold sweep.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::decode::{propose, GraspProposal, NmsParams, Representation};
use crate::error::{Error, Result};
use crate::geometry::{derive_seed, Pose, RigidTransform};
use crate::model::{encode_input, oracle_predict, oracle_predict_tcp, perturbed_oracle, PerturbParams, Tensor};
use crate::pipeline::{object_dir, write_config, ObjectAsset, PlacedObject, View};
use crate::render::{sample_camera_pose, CameraPose, SparseGraspMap};

use super::svg;
use super::{simulate_proposal, SimOutcome, SimResult};

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";
pub const TIMING_FILE: &str = "timing.json";
/// File a file-backed predictor reads inside each trial directory.
pub const TENSOR_FILE: &str = "tensor.f32";

const KEY_EVAL: u64 = 0xE7A1;
const KEY_PLACE: u64 = 0;
const KEY_CAMERA: u64 = 1;
const KEY_NOISE: u64 = 2;
const KEY_PREDICT: u64 = 3;

/// Source of the output tensors.
#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    /// Ground-truth map written as a tensor.
    Oracle,
    /// Ground truth with seeded noise.
    Perturbed(PerturbParams),
    /// Tensors produced elsewhere, read from `DIR/obj_<id>/trial_<t>/tensor.f32`.
    File(PathBuf),
}

impl FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" {
            return Ok(Predictor::Oracle);
        }
        if let Some(sigma) = s.strip_prefix("perturbed:") {
            let quality_sigma: f64 = sigma
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid perturbation sigma '{sigma}'")))?;
            let p = PerturbParams {
                quality_sigma,
                ..PerturbParams::default()
            };
            p.validate()?;
            return Ok(Predictor::Perturbed(p));
        }
        if let Some(dir) = s.strip_prefix("file:") {
            if !dir.is_empty() {
                return Ok(Predictor::File(PathBuf::from(dir)));
            }
        }
        Err(Error::InvalidArgument(format!(
            "unknown predictor '{s}' (expected oracle, perturbed:SIGMA or file:DIR)"
        )))
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Oracle => write!(f, "oracle"),
            Predictor::Perturbed(p) => write!(f, "perturbed:{}", p.quality_sigma),
            Predictor::File(d) => write!(f, "file:{}", d.display()),
        }
    }
}

pub fn trial_dir(root: &Path, object_id: &str, trial: usize) -> PathBuf {
    object_dir(root, object_id).join(format!("trial_{trial}"))
}

impl Predictor {
    fn predict(
        &self,
        map: &SparseGraspMap,
        object_id: &str,
        trial: usize,
        seed: u64,
        repr: Representation,
    ) -> Result<Tensor> {
        let tcp = repr == Representation::Tcp;
        let tensor = match self {
            Predictor::Oracle if tcp => oracle_predict_tcp(map),
            Predictor::Oracle => oracle_predict(map),
            Predictor::Perturbed(p) => perturbed_oracle(map, p, seed, tcp)?,
            Predictor::File(root) => Tensor::read(trial_dir(root, object_id, trial).join(TENSOR_FILE))?,
        };
        Ok(tensor)
    }
}

/// Evaluation trial seed.
pub fn trial_seed(master: u64, object_id: &str, trial: usize) -> u64 {
    derive_seed(
        master,
        &[KEY_EVAL, crc32fast::hash(object_id.as_bytes()) as u64, trial as u64],
    )
}

struct Trial {
    seed: u64,
    stable_pose: usize,
    object_pose: Pose,
    placed: PlacedObject,
    view: View,
    map: SparseGraspMap,
}

fn setup_trial(asset: &ObjectAsset, trial: usize, config: &PipelineConfig) -> Result<Trial> {
    let seed = trial_seed(config.seed, &asset.id, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[KEY_PLACE]));
    let total: f64 = asset.stable_poses.iter().map(|p| p.probability).sum();
    let pick = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let stable_pose = asset
        .stable_poses
        .iter()
        .position(|p| {
            acc += p.probability;
            pick < acc
        })
        .unwrap_or(asset.stable_poses.len() - 1);
    let [wx, wy] = config.eval.workspace;
    let x = (rng.random::<f64>() - 0.5) * wx;
    let y = (rng.random::<f64>() - 0.5) * wy;
    let yaw = rng.random::<f64>() * std::f64::consts::TAU;
    let object_pose = asset.stable_poses[stable_pose].placed(x, y, yaw);
    let placed = PlacedObject::new(asset, object_pose, config)?;
    let camera = sample_camera_pose(
        &placed.center(),
        &config.camera.bounds,
        derive_seed(seed, &[KEY_CAMERA]),
    )?;
    let view = placed.view(camera, config, derive_seed(seed, &[KEY_NOISE]));
    let map = view.ground_truth(&placed.scene, config, config.decode.representation);
    Ok(Trial {
        seed,
        stable_pose,
        object_pose,
        placed,
        view,
        map,
    })
}

fn export_inputs(dir: &Path, trial: &Trial, config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let input = encode_input(&trial.view.noisy, config.render.near, config.render.far)?;
    input.write(dir.join("input.f32"))?;
    let depth: Vec<u8> = trial
        .view
        .decode_depth(config)
        .data
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    write("depth.f32", &depth)?;
    write(
        "intrinsics.json",
        &serde_json::to_vec_pretty(&config.camera.intrinsics).expect("intrinsics serialize"),
    )?;
    write(
        "extrinsics.json",
        &serde_json::to_vec_pretty(&RigidTransform::from(&trial.view.camera.pose)).expect("pose serializes"),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub object_id: String,
    pub trial: usize,
    pub seed: u64,
    pub stable_pose: usize,
    pub object_pose: RigidTransform,
    pub camera_pose: CameraPose,
    /// Visible quality-1 entries of the ground-truth map.
    pub visible_positives: usize,
    pub proposal_count: usize,
    /// The top-quality proposal, the only one executed.
    pub proposal: Option<GraspProposal>,
    /// Ground-truth label at the proposal's source pixel, if it has one.
    pub gt_entry_q: Option<u8>,
    pub outcome: SimOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub object_id: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub no_proposal_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub outcomes: BTreeMap<SimResult, usize>,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub predictor: String,
    pub seed: u64,
    pub gamma: f64,
    pub trials_per_object: usize,
    pub overall: Overall,
    pub objects: Vec<ObjectSummary>,
    pub records: Vec<TrialRecord>,
}

/// Wall-clock statistics, kept apart from the reproducible report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub trials: usize,
    pub wall_s: f64,
    pub mean_setup_ms: f64,
    pub mean_decode_ms: f64,
    pub mean_simulate_ms: f64,
    pub max_trial_ms: f64,
}

fn rate(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

fn gt_quality(map: &SparseGraspMap, p: &GraspProposal) -> Option<u8> {
    let [u, v] = p.source_pixel;
    map.entries.iter().find(|e| e.u == u && e.v == v).map(|e| e.q)
}

fn jobs(objects: &[ObjectAsset], n: usize) -> Vec<(usize, usize)> {
    (0..objects.len()).flat_map(|o| (0..n).map(move |t| (o, t))).collect()
}

/// Runs `config.eval.trials_per_object` trials per object, executing only
/// the top proposal of each. When `export` is set, the network inputs of
/// every trial are written below it.
pub fn run_trials(
    objects: &[ObjectAsset],
    predictor: &Predictor,
    config: &PipelineConfig,
    export: Option<&Path>,
) -> Result<(TrialReport, Timing)> {
    config.validate()?;
    let start = Instant::now();
    let nms = config.decode.nms();
    let results: Vec<(TrialRecord, [f64; 3])> = jobs(objects, config.eval.trials_per_object)
        .par_iter()
        .map(|&(oi, t)| run_one(&objects[oi], t, predictor, config, &nms, export))
        .collect::<Result<_>>()?;

    let mut report = TrialReport {
        predictor: predictor.to_string(),
        seed: config.seed,
        gamma: config.decode.gamma,
        trials_per_object: config.eval.trials_per_object,
        overall: Overall::default(),
        objects: Vec::new(),
        records: Vec::new(),
    };
    let mut timing = Timing {
        trials: results.len(),
        ..Timing::default()
    };
    for a in objects {
        report.objects.push(ObjectSummary {
            object_id: a.id.clone(),
            trials: 0,
            successes: 0,
            success_rate: 0.0,
            no_proposal_count: 0,
        });
    }
    for (i, (rec, ms)) in results.into_iter().enumerate() {
        let s = &mut report.objects[i / config.eval.trials_per_object.max(1)];
        let ok = rec.outcome.result == SimResult::Success;
        s.trials += 1;
        s.successes += usize::from(ok);
        s.no_proposal_count += usize::from(rec.outcome.result == SimResult::NoProposal);
        let o = &mut report.overall;
        o.trials += 1;
        o.successes += usize::from(ok);
        o.errors += usize::from(rec.error.is_some());
        *o.outcomes.entry(rec.outcome.result).or_default() += 1;
        timing.mean_setup_ms += ms[0];
        timing.mean_decode_ms += ms[1];
        timing.mean_simulate_ms += ms[2];
        timing.max_trial_ms = timing.max_trial_ms.max(ms.iter().sum());
        report.records.push(rec);
    }
    for s in &mut report.objects {
        s.success_rate = rate(s.successes, s.trials);
    }
    report.overall.success_rate = rate(report.overall.successes, report.overall.trials);
    let n = timing.trials.max(1) as f64;
    timing.mean_setup_ms /= n;
    timing.mean_decode_ms /= n;
    timing.mean_simulate_ms /= n;
    timing.wall_s = start.elapsed().as_secs_f64();
    Ok((report, timing))
}

fn run_one(
    asset: &ObjectAsset,
    t: usize,
    predictor: &Predictor,
    config: &PipelineConfig,
    nms: &NmsParams,
    export: Option<&Path>,
) -> Result<(TrialRecord, [f64; 3])> {
    let clock = Instant::now();
    let trial = setup_trial(asset, t, config)?;
    if let Some(root) = export {
        export_inputs(&trial_dir(root, &asset.id, t), &trial, config)?;
    }
    let setup_ms = clock.elapsed().as_secs_f64() * 1e3;
    let mut record = TrialRecord {
        object_id: asset.id.clone(),
        trial: t,
        seed: trial.seed,
        stable_pose: trial.stable_pose,
        object_pose: RigidTransform::from(&trial.object_pose),
        camera_pose: trial.view.camera,
        visible_positives: trial.map.entries.iter().filter(|e| e.q == 1).count(),
        proposal_count: 0,
        proposal: None,
        gt_entry_q: None,
        outcome: SimOutcome::no_proposal(),
        error: None,
    };

    let clock = Instant::now();
    let repr = config.decode.representation;
    let decoded = predictor
        .predict(&trial.map, &asset.id, t, derive_seed(trial.seed, &[KEY_PREDICT]), repr)
        .and_then(|tensor| {
            propose(
                &tensor,
                &config.camera.intrinsics,
                trial.view.decode_depth(config),
                &trial.view.camera.pose,
                nms,
                config.gripper.max_width,
                repr,
            )
        });
    let decode_ms = clock.elapsed().as_secs_f64() * 1e3;

    let clock = Instant::now();
    match decoded {
        Ok(report) => {
            record.proposal_count = report.proposals.len();
            if let Some(top) = report.proposals.into_iter().next() {
                record.gt_entry_q = gt_quality(&trial.map, &top);
                record.outcome = simulate_proposal(&trial.placed.scene, &top, &config.gripper, &config.sim);
                record.proposal = Some(top);
            }
        }
        Err(e) => {
            log::warn!("object {} trial {t}: {e}", asset.id);
            record.error = Some(e.to_string());
        }
    }
    let sim_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok((record, [setup_ms, decode_ms, sim_ms]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    /// Mean predicted quality over all proposals; `None` without proposals.
    pub mean_pred_quality: Option<f64>,
    /// Fraction of trials whose top proposal succeeds.
    pub object_success: f64,
    /// Fraction of all proposals that succeed; `None` without proposals.
    pub proposal_success: Option<f64>,
    pub mean_proposals: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub total_proposals: usize,
}

/// Proposal pixels of one trial at every threshold, in threshold order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTrial {
    pub object_id: String,
    pub trial: usize,
    pub pixels: Vec<Vec<[u32; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub predictor: String,
    pub seed: u64,
    pub gammas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub trials: Vec<SweepTrial>,
}

struct GammaStats {
    qualities: Vec<f64>,
    successes: usize,
    top_success: bool,
}

/// Evaluates every threshold in `gammas` on the same trials and tensors.
/// Each proposal is simulated once and shared across thresholds.
pub fn threshold_sweep(
    objects: &[ObjectAsset],
    predictor: &Predictor,
    config: &PipelineConfig,
    gammas: &[f64],
) -> Result<SweepReport> {
    config.validate()?;
    if gammas.is_empty() {
        return Err(Error::InvalidArgument("empty threshold list".into()));
    }
    let per_trial: Vec<(SweepTrial, Vec<GammaStats>)> = jobs(objects, config.eval.trials_per_object)
        .par_iter()
        .map(|&(oi, t)| sweep_one(&objects[oi], t, predictor, config, gammas))
        .collect::<Result<_>>()?;

    let n = per_trial.len();
    let rows = gammas
        .iter()
        .enumerate()
        .map(|(gi, &gamma)| {
            let stats: Vec<&GammaStats> = per_trial.iter().map(|(_, s)| &s[gi]).collect();
            let counts: Vec<f64> = stats.iter().map(|s| s.qualities.len() as f64).collect();
            let total: usize = stats.iter().map(|s| s.qualities.len()).sum();
            let q_sum: f64 = stats.iter().flat_map(|s| s.qualities.iter()).sum();
            let succ: usize = stats.iter().map(|s| s.successes).sum();
            let (mean, half) = mean_ci95(&counts);
            SweepRow {
                gamma,
                mean_pred_quality: (total > 0).then(|| q_sum / total as f64),
                object_success: rate(stats.iter().filter(|s| s.top_success).count(), n),
                proposal_success: (total > 0).then(|| succ as f64 / total as f64),
                mean_proposals: mean,
                ci95_low: mean - half,
                ci95_high: mean + half,
                total_proposals: total,
            }
        })
        .collect();
    Ok(SweepReport {
        predictor: predictor.to_string(),
        seed: config.seed,
        gammas: gammas.to_vec(),
        rows,
        trials: per_trial.into_iter().map(|(t, _)| t).collect(),
    })
}

fn sweep_one(
    asset: &ObjectAsset,
    t: usize,
    predictor: &Predictor,
    config: &PipelineConfig,
    gammas: &[f64],
) -> Result<(SweepTrial, Vec<GammaStats>)> {
    let trial = setup_trial(asset, t, config)?;
    let repr = config.decode.representation;
    let mut out = SweepTrial {
        object_id: asset.id.clone(),
        trial: t,
        pixels: Vec::new(),
        error: None,
    };
    let empty = || GammaStats {
        qualities: Vec::new(),
        successes: 0,
        top_success: false,
    };
    let tensor = match predictor.predict(&trial.map, &asset.id, t, derive_seed(trial.seed, &[KEY_PREDICT]), repr) {
        Ok(t) => t,
        Err(e) => {
            out.error = Some(e.to_string());
            out.pixels = vec![Vec::new(); gammas.len()];
            return Ok((out, gammas.iter().map(|_| empty()).collect()));
        }
    };
    let mut cache: HashMap<[u32; 2], bool> = HashMap::new();
    let mut stats = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let nms = NmsParams {
            gamma,
            ..config.decode.nms()
        };
        let report = propose(
            &tensor,
            &config.camera.intrinsics,
            trial.view.decode_depth(config),
            &trial.view.camera.pose,
            &nms,
            config.gripper.max_width,
            repr,
        )?;
        let mut s = empty();
        for (k, p) in report.proposals.iter().enumerate() {
            let ok = *cache.entry(p.source_pixel).or_insert_with(|| {
                simulate_proposal(&trial.placed.scene, p, &config.gripper, &config.sim).result == SimResult::Success
            });
            s.qualities.push(p.quality);
            s.successes += usize::from(ok);
            if k == 0 {
                s.top_success = ok;
            }
        }
        out.pixels
            .push(report.proposals.iter().map(|p| p.source_pixel).collect());
        stats.push(s);
    }
    Ok((out, stats))
}

/// Sample mean and the half-width of its normal 95% confidence interval.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(report: &TrialReport) -> String {
    let mut s = String::from("object_id,trials,successes,success_rate,no_proposal_count\n");
    for o in &report.objects {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            o.object_id, o.trials, o.successes, o.success_rate, o.no_proposal_count
        ));
    }
    s
}

pub fn sweep_csv(sweep: &SweepReport) -> String {
    let mut s =
        String::from("gamma,mean_pred_quality,object_success,proposal_success,mean_proposals,ci95_low,ci95_high\n");
    for r in &sweep.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.gamma,
            opt(r.mean_pred_quality),
            r.object_success,
            opt(r.proposal_success),
            r.mean_proposals,
            r.ci95_low,
            r.ci95_high
        ));
    }
    s
}

/// Writes `report.json`, `summary.csv` and, with `charts`, `success.svg`.
pub fn emit_report(report: &TrialReport, out: &Path, charts: bool) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_bytes(
        out,
        REPORT_FILE,
        &serde_json::to_vec_pretty(report).expect("report serializes"),
    )?;
    write_bytes(out, SUMMARY_FILE, summary_csv(report).as_bytes())?;
    if charts {
        let bars: Vec<(String, f64)> = report
            .objects
            .iter()
            .map(|o| (o.object_id.clone(), o.success_rate))
            .collect();
        write_bytes(
            out,
            "success.svg",
            svg::bar_chart("Grasp success per object", &bars).as_bytes(),
        )?;
    }
    Ok(())
}

/// Writes `sweep.json`, `sweep.csv` and, with `charts`, `sweep.svg`.
pub fn emit_sweep(sweep: &SweepReport, out: &Path, charts: bool) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_bytes(
        out,
        SWEEP_JSON_FILE,
        &serde_json::to_vec_pretty(sweep).expect("sweep serializes"),
    )?;
    write_bytes(out, SWEEP_CSV_FILE, sweep_csv(sweep).as_bytes())?;
    if charts {
        let series = [
            (
                "mean predicted quality",
                sweep.rows.iter().map(|r| r.mean_pred_quality).collect(),
            ),
            (
                "object success",
                sweep.rows.iter().map(|r| Some(r.object_success)).collect(),
            ),
            (
                "proposal success",
                sweep.rows.iter().map(|r| r.proposal_success).collect(),
            ),
        ];
        let counts = [(
            "mean proposals",
            sweep.rows.iter().map(|r| Some(r.mean_proposals)).collect(),
        )];
        let doc = svg::line_chart("Acceptance threshold", &sweep.gammas, &series, &counts);
        write_bytes(out, "sweep.svg", doc.as_bytes())?;
    }
    Ok(())
}

pub fn emit_timing(timing: &Timing, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_bytes(
        out,
        TIMING_FILE,
        &serde_json::to_vec_pretty(timing).expect("timing serializes"),
    )
}

/// Writes the effective configuration into an evaluation output directory.
pub fn emit_config(config: &PipelineConfig, out: &Path) -> Result<()> {
    write_config(out, config)
}

pub fn read_report(path: &Path) -> Result<TrialReport> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.column() as u64, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn small_config() -> PipelineConfig {
        let mut c = PipelineConfig {
            seed: 11,
            ..PipelineConfig::default()
        };
        c.stable.samples = 500;
        c.sampler.max_grasps = 30;
        c.sampler.epsilon.trials = 20;
        c.eval.trials_per_object = 4;
        c.camera.intrinsics.width = 160;
        c.camera.intrinsics.height = 120;
        c.camera.intrinsics.fx = 96.0;
        c.camera.intrinsics.fy = 96.0;
        c.camera.intrinsics.cx = 79.5;
        c.camera.intrinsics.cy = 59.5;
        c
    }

    fn cube_asset(c: &PipelineConfig) -> ObjectAsset {
        let cube = primitives::cuboid(0.07, 0.07, 0.07).build().unwrap();
        ObjectAsset::prepare("cube", &cube, c).unwrap()
    }

    #[test]
    fn predictor_parsing() {
        assert_eq!("oracle".parse::<Predictor>().unwrap(), Predictor::Oracle);
        match "perturbed:0.3".parse::<Predictor>().unwrap() {
            Predictor::Perturbed(p) => assert_eq!(p.quality_sigma, 0.3),
            other => panic!("{other:?}"),
        }
        assert_eq!("file:/x".parse::<Predictor>().unwrap(), Predictor::File("/x".into()));
        assert!("perturbed:-1".parse::<Predictor>().is_err());
        assert!("file:".parse::<Predictor>().is_err());
        assert!("net".parse::<Predictor>().is_err());
        assert_eq!(
            "perturbed:0.3".parse::<Predictor>().unwrap().to_string(),
            "perturbed:0.3"
        );
    }

    #[test]
    fn zero_trials_gives_empty_report() {
        let mut c = small_config();
        c.eval.trials_per_object = 0;
        let a = cube_asset(&c);
        let (r, _) = run_trials(&[a], &Predictor::Oracle, &c, None).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.overall.trials, 0);
        assert_eq!(r.objects[0].trials, 0);
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path(), false).unwrap();
        let csv = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn oracle_trials_are_reproducible_and_sound() {
        let c = small_config();
        let a = cube_asset(&c);
        let (r1, _) = run_trials(std::slice::from_ref(&a), &Predictor::Oracle, &c, None).unwrap();
        let (r2, _) = run_trials(&[a], &Predictor::Oracle, &c, None).unwrap();
        assert_eq!(serde_json::to_vec(&r1).unwrap(), serde_json::to_vec(&r2).unwrap());
        assert_eq!(r1.records.len(), 4);
        for rec in &r1.records {
            if rec.proposal.is_some() {
                assert_eq!(rec.gt_entry_q, Some(1));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r1, dir.path(), true).unwrap();
        assert_eq!(read_report(&dir.path().join(REPORT_FILE)).unwrap(), r1);
        assert!(dir.path().join("success.svg").exists());
    }

    #[test]
    fn missing_file_tensor_is_recorded() {
        let c = small_config();
        let a = cube_asset(&c);
        let dir = tempfile::tempdir().unwrap();
        let p = Predictor::File(dir.path().to_path_buf());
        let (r, _) = run_trials(&[a], &p, &c, None).unwrap();
        assert_eq!(r.overall.errors, 4);
        assert!(r.records.iter().all(|t| t.outcome.result == SimResult::NoProposal));
    }

    #[test]
    fn sweep_rows_and_monotone_sets() {
        let c = small_config();
        let a = cube_asset(&c);
        let gammas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let p: Predictor = "perturbed:0.3".parse().unwrap();
        let s = threshold_sweep(&[a], &p, &c, &gammas).unwrap();
        assert_eq!(s.rows.len(), 9);
        for w in s.rows.windows(2) {
            assert!(w[1].mean_proposals <= w[0].mean_proposals);
        }
        for t in &s.trials {
            for w in t.pixels.windows(2) {
                assert!(w[1].iter().all(|p| w[0].contains(p)));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        emit_sweep(&s, dir.path(), true).unwrap();
        let csv = fs::read_to_string(dir.path().join(SWEEP_CSV_FILE)).unwrap();
        assert_eq!(csv.lines().count(), 10);
    }

    #[test]
    fn gamma_one_yields_nothing() {
        let c = small_config();
        let a = cube_asset(&c);
        let s = threshold_sweep(&[a], &Predictor::Oracle, &c, &[1.0]).unwrap();
        assert_eq!(s.rows[0].total_proposals, 0);
        assert_eq!(s.rows[0].mean_pred_quality, None);
    }

    #[test]
    fn ci_of_constant_sample_is_a_point() {
        assert_eq!(mean_ci95(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, h) = mean_ci95(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-12);
    }
}
