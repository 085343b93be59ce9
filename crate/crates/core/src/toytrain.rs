//! Desk-scale harness: trains the same small SRCNN on the full dataset and on
//! core-sets at matched step counts, then evaluates PSNR/SSIM on held-out
//! images.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::imgcore::io::read_png;
use crate::imgcore::{bicubic_resize, psnr, ssim, to_luma, ImageBuffer, ResampleSpec, ScaleFactor};
use crate::pipeline::{list_pngs, synthesize_lr, PreparedDataset};
use crate::scoring::train_pairs;
use crate::selection::CoreSetManifest;
use crate::srcnn::{
    save_weights, srcnn_forward, train, weights_hash, Architecture, InitScheme, SrcnnWeights, TrainConfig,
    TrainPair,
};
use crate::util;

pub const REPORT_VERSION: u32 = 1;
pub const BICUBIC: &str = "bicubic";
pub const INIT: &str = "init";

/// One arm of a plan file. `manifest = None` trains on the full dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub label: String,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Overrides the plan-wide step count.
    #[serde(default)]
    pub steps: Option<usize>,
}

fn default_widths() -> [usize; 2] {
    [16, 8]
}

fn default_init() -> InitScheme {
    InitScheme::IdentityHe { noise: 0.1 }
}

/// Experiment description as read from JSON. Relative paths resolve against
/// the plan file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: PathBuf,
    pub eval_dir: PathBuf,
    pub arms: Vec<ArmSpec>,
    pub steps: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "default_widths")]
    pub widths: [usize; 2],
    #[serde(default = "default_init")]
    pub init: InitScheme,
    /// Where each arm's trained weights are written, if set.
    #[serde(default)]
    pub weights_dir: Option<PathBuf>,
    #[serde(default)]
    pub checks: Vec<Constraint>,
}

impl ExperimentPlan {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut plan: Self = util::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut plan.dataset);
        resolve(&mut plan.eval_dir);
        for arm in &mut plan.arms {
            if let Some(m) = arm.manifest.as_mut() {
                resolve(m);
            }
        }
        if let Some(d) = plan.weights_dir.as_mut() {
            resolve(d);
        }
        Ok(plan)
    }
}

/// An arm with its manifest loaded.
#[derive(Clone, Debug)]
pub struct Arm {
    pub label: String,
    pub manifest: Option<CoreSetManifest>,
    pub steps: usize,
}

/// Settings shared by every arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub architecture: Architecture,
    pub init: InitScheme,
    pub seed: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Protocol {
    fn train_config(&self, steps: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            steps,
            seed: self.seed,
        }
    }

    fn initial_weights(&self) -> SrcnnWeights {
        SrcnnWeights::init(self.architecture, self.init, self.seed)
    }
}

/// A held-out image: bicubically upscaled LR luminance and HR luminance.
#[derive(Clone, Debug)]
pub struct EvalImage {
    pub name: String,
    pub pair: TrainPair,
}

/// Degrades each HR image in `dir` the same way the dataset was prepared.
pub fn load_eval_set(dir: &Path, scale: u32, antialias: bool) -> Result<Vec<EvalImage>> {
    let files = list_pngs(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus(dir.to_path_buf()));
    }
    files
        .iter()
        .map(|p| {
            let hr = read_png(p)?.crop_to_multiple(scale as usize)?;
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok(EvalImage {
                name,
                pair: degrade(&hr, scale, antialias)?,
            })
        })
        .collect()
}

/// Builds an evaluation pair from an HR image whose dims are multiples of `scale`.
pub fn degrade(hr: &ImageBuffer, scale: u32, antialias: bool) -> Result<TrainPair> {
    let target = to_luma(hr)?;
    let lr = synthesize_lr(&target, scale, antialias)?.quantized();
    let input = bicubic_resize(&lr, &ResampleSpec::new(ScaleFactor::up(scale)?, false))?;
    TrainPair::new(input, target)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(with = "util::f64_17")]
    pub psnr: f64,
    #[serde(with = "util::f64_17")]
    pub ssim: f64,
}

fn mean_metrics(eval: &[EvalImage], border: usize, output: impl Fn(&TrainPair) -> Result<ImageBuffer>) -> Result<Metrics> {
    ensure!(!eval.is_empty(), "evaluation set is empty");
    let mut p = 0.0;
    let mut s = 0.0;
    for e in eval {
        let out = output(&e.pair)?;
        p += psnr(&e.pair.target, &out, border)?;
        s += ssim(&e.pair.target, &out, border)?;
    }
    let n = eval.len() as f64;
    Ok(Metrics { psnr: p / n, ssim: s / n })
}

/// Mean Y-channel PSNR/SSIM of the network output, border cropped by `border`.
pub fn evaluate(w: &SrcnnWeights, eval: &[EvalImage], border: usize) -> Result<Metrics> {
    mean_metrics(eval, border, |p| srcnn_forward(w, &p.input))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub label: String,
    pub manifest_hash: Option<String>,
    pub train_size: usize,
    pub steps: usize,
    pub metrics: Metrics,
    #[serde(with = "util::f64_17")]
    pub first_loss: f64,
    #[serde(with = "util::f64_17")]
    pub final_loss: f64,
    /// Mean batch loss over the last (up to) 100 steps.
    #[serde(with = "util::f64_17")]
    pub tail_loss: f64,
    pub weights_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub dataset_fingerprint: String,
    pub protocol: Protocol,
    pub init_hash: String,
    pub border_crop: usize,
    pub eval_images: Vec<String>,
    pub bicubic: Metrics,
    pub init_metrics: Metrics,
    pub arms: Vec<ArmReport>,
    #[serde(default)]
    pub checks: Vec<ConstraintResult>,
}

impl ExperimentReport {
    pub fn arm(&self, label: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.label == label)
    }

    /// PSNR of an arm, or of the `bicubic`/`init` baselines.
    pub fn psnr_of(&self, label: &str) -> Result<f64> {
        if let Some(a) = self.arm(label) {
            return Ok(a.metrics.psnr);
        }
        match label {
            BICUBIC => Ok(self.bicubic.psnr),
            INIT => Ok(self.init_metrics.psnr),
            _ => Err(Error::UnknownLabel(label.to_string())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json("<report>", e))?;
        text.push('\n');
        Ok(text)
    }

    /// One row per arm: `arm,psnr,ssim,steps,manifest_hash`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,psnr,ssim,steps,manifest_hash\n");
        for a in &self.arms {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{},{}\n",
                a.label,
                a.metrics.psnr,
                a.metrics.ssim,
                a.steps,
                a.manifest_hash.as_deref().unwrap_or("full")
            ));
        }
        out
    }
}

fn tail_mean(losses: &[f64]) -> f64 {
    let tail = &losses[losses.len().saturating_sub(100)..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

fn check_disjoint(ds: &PreparedDataset, eval: &[EvalImage]) -> Result<()> {
    let stems: HashSet<&str> = ds
        .samples
        .iter()
        .filter_map(|s| s.id.rsplitn(4, '_').nth(3))
        .collect();
    for e in eval {
        ensure!(
            !stems.contains(e.name.as_str()),
            "evaluation image {} also appears in the training corpus",
            e.name
        );
    }
    Ok(())
}

/// Trains every arm from the same initial weights and evaluates it.
/// Weights are returned in arm order.
pub fn run_arms(
    ds: &PreparedDataset,
    arms: &[Arm],
    eval: &[EvalImage],
    protocol: &Protocol,
) -> Result<(ExperimentReport, Vec<SrcnnWeights>)> {
    ensure!(!arms.is_empty(), "experiment has no arms");
    let mut labels = HashSet::new();
    for a in arms {
        ensure!(labels.insert(a.label.as_str()), "duplicate arm label {}", a.label);
        ensure!(
            a.label != BICUBIC && a.label != INIT,
            "arm label {} is reserved",
            a.label
        );
    }
    check_disjoint(ds, eval)?;
    let border = ds.spec.scale as usize;
    let pairs = train_pairs(&ds.samples)?;
    let position: HashMap<&str, usize> = ds.samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let w0 = protocol.initial_weights();
    let bicubic = mean_metrics(eval, border, |p| Ok(p.input.clone()))?;
    let init_metrics = evaluate(&w0, eval, border)?;

    let results: Vec<(ArmReport, SrcnnWeights)> = arms
        .par_iter()
        .map(|arm| {
            let (data, manifest_hash) = match &arm.manifest {
                None => (pairs.clone(), None),
                Some(m) => {
                    let picked = ds.subset(m)?;
                    let data: Vec<TrainPair> = picked.iter().map(|s| pairs[position[s.id.as_str()]].clone()).collect();
                    (data, Some(m.content_hash()?))
                }
            };
            ensure!(!data.is_empty(), "arm {} has no training samples", arm.label);
            info!("arm {}: {} samples, {} steps", arm.label, data.len(), arm.steps);
            let out = train(&w0, &data, &protocol.train_config(arm.steps))?;
            let metrics = evaluate(&out.weights, eval, border)?;
            let report = ArmReport {
                label: arm.label.clone(),
                manifest_hash,
                train_size: data.len(),
                steps: out.losses.len(),
                metrics,
                first_loss: out.losses.first().copied().unwrap_or(0.0),
                final_loss: out.losses.last().copied().unwrap_or(0.0),
                tail_loss: tail_mean(&out.losses),
                weights_hash: weights_hash(&out.weights),
            };
            Ok((report, out.weights))
        })
        .collect::<Result<_>>()?;

    let (arm_reports, weights): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = ExperimentReport {
        version: REPORT_VERSION,
        dataset_fingerprint: ds.fingerprint.clone(),
        protocol: protocol.clone(),
        init_hash: weights_hash(&w0),
        border_crop: border,
        eval_images: eval.iter().map(|e| e.name.clone()).collect(),
        bicubic,
        init_metrics,
        arms: arm_reports,
        checks: Vec::new(),
    };
    Ok((report, weights))
}

/// Loads everything a plan references, runs it and evaluates its checks.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    ensure!(plan.steps >= 1 || plan.arms.iter().all(|a| a.steps.is_some()), "plan needs a step count");
    let ds = PreparedDataset::load(&plan.dataset)?;
    let eval = load_eval_set(&plan.eval_dir, ds.spec.scale, ds.spec.antialias)?;
    let arms = plan
        .arms
        .iter()
        .map(|a| {
            let manifest = a.manifest.as_ref().map(CoreSetManifest::load).transpose()?;
            Ok(Arm {
                label: a.label.clone(),
                manifest,
                steps: a.steps.unwrap_or(plan.steps),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let protocol = Protocol {
        architecture: Architecture::reduced(plan.widths[0], plan.widths[1])?,
        init: plan.init,
        seed: plan.seed,
        batch_size: plan.batch_size,
        learning_rate: plan.learning_rate,
    };
    let (mut report, weights) = run_arms(&ds, &arms, &eval, &protocol)?;
    if let Some(dir) = &plan.weights_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (a, w) in report.arms.iter().zip(&weights) {
            save_weights(w, dir.join(format!("{}.srcw", a.label)))?;
        }
    }
    report.checks = compare_report(&report, &plan.checks)?;
    Ok(report)
}

/// `PSNR(a) >= PSNR(b) - delta`, or `>` when `strict`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub strict: bool,
}

impl Constraint {
    pub fn at_least(a: &str, b: &str, delta: f64) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            delta,
            strict: false,
        }
    }

    pub fn greater(a: &str, b: &str) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            delta: 0.0,
            strict: true,
        }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = if self.strict { ">" } else { ">=" };
        write!(f, "PSNR({}) {op} PSNR({}) - {}", self.a, self.b, self.delta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub constraint: Constraint,
    #[serde(with = "util::f64_17")]
    pub psnr_a: f64,
    #[serde(with = "util::f64_17")]
    pub psnr_b: f64,
    pub pass: bool,
}

pub fn compare_report(rep: &ExperimentReport, constraints: &[Constraint]) -> Result<Vec<ConstraintResult>> {
    constraints
        .iter()
        .map(|c| {
            let psnr_a = rep.psnr_of(&c.a)?;
            let psnr_b = rep.psnr_of(&c.b)?;
            let bound = psnr_b - c.delta;
            let pass = if c.strict { psnr_a > bound } else { psnr_a >= bound };
            Ok(ConstraintResult {
                constraint: c.clone(),
                psnr_a,
                psnr_b,
                pass,
            })
        })
        .collect()
}
