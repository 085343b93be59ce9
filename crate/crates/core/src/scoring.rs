//! Per-sample difficulty scores: SRCNN reconstruction loss and the Sobel
//! texture baseline.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::imgcore::{bicubic_resize, mse, sobel_magnitude, to_luma, ImageBuffer, ResampleSpec, ScaleFactor};
use crate::pipeline::PreparedDataset;
use crate::srcnn::{
    forward_raw, train, weights_hash, Architecture, InitScheme, SrcnnWeights, TrainConfig, TrainPair,
};
use crate::util;

pub const SCORE_TABLE_VERSION: u32 = 1;
pub const SRCNN_MSE: &str = "srcnn-mse";
pub const SOBEL: &str = "sobel";

/// One HR patch with its synthesized LR counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub id: String,
    pub hr: ImageBuffer,
    pub lr: ImageBuffer,
    pub scale: u32,
}

impl SamplePair {
    pub fn new(id: impl Into<String>, hr: ImageBuffer, lr: ImageBuffer, scale: u32) -> Result<Self> {
        let id = id.into();
        ensure!(scale >= 1, "sample {id}: scale must be >= 1");
        let s = scale as usize;
        ensure!(
            hr.height() == lr.height() * s && hr.width() == lr.width() * s && hr.channels() == lr.channels(),
            "sample {id}: hr {:?} is not lr {:?} x {scale}",
            hr.dims(),
            lr.dims()
        );
        Ok(Self { id, hr, lr, scale })
    }
}

/// Scorer input and target: bicubically upscaled LR luminance and HR luminance.
pub fn luma_pair(s: &SamplePair) -> Result<TrainPair> {
    let target = to_luma(&s.hr)?;
    let lr_y = to_luma(&s.lr)?;
    let input = bicubic_resize(&lr_y, &ResampleSpec::new(ScaleFactor::up(s.scale)?, false))?;
    TrainPair::new(input, target)
}

/// Luminance training pairs for every sample, in order.
pub fn train_pairs<'a>(samples: impl IntoParallelIterator<Item = &'a SamplePair>) -> Result<Vec<TrainPair>> {
    samples.into_par_iter().map(luma_pair).collect()
}

pub const SCORER_INFO_VERSION: u32 = 1;

/// Sidecar metadata written next to a scorer weights file as `<weights>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerInfo {
    pub version: u32,
    pub architecture: Architecture,
    pub scale: u32,
    pub init: InitScheme,
    pub train: TrainConfig,
    pub dataset_fingerprint: String,
    pub weights_hash: String,
    #[serde(with = "util::f64_17")]
    pub final_loss: f64,
}

impl ScorerInfo {
    pub fn sidecar_path(weights: &Path) -> PathBuf {
        let mut name = weights.as_os_str().to_os_string();
        name.push(".json");
        PathBuf::from(name)
    }

    pub fn save_for(&self, weights: &Path) -> Result<()> {
        util::write_json(&Self::sidecar_path(weights), self)
    }

    /// The sidecar of `weights`, if one exists.
    pub fn load_for(weights: &Path) -> Result<Option<Self>> {
        let p = Self::sidecar_path(weights);
        if !p.exists() {
            return Ok(None);
        }
        let info: Self = util::read_json(&p)?;
        ensure!(
            info.version == SCORER_INFO_VERSION,
            "{}: unsupported scorer info version {}",
            p.display(),
            info.version
        );
        Ok(Some(info))
    }
}

/// Trains a scorer on every sample of `ds`.
pub fn train_scorer(
    ds: &PreparedDataset,
    arch: Architecture,
    init: InitScheme,
    cfg: &TrainConfig,
) -> Result<(SrcnnWeights, ScorerInfo)> {
    ensure!(!ds.is_empty(), "cannot train a scorer on an empty dataset");
    let pairs = train_pairs(&ds.samples)?;
    let w0 = SrcnnWeights::init(arch, init, cfg.seed);
    let out = train(&w0, &pairs, cfg)?;
    let info = ScorerInfo {
        version: SCORER_INFO_VERSION,
        architecture: arch,
        scale: ds.spec.scale,
        init,
        train: cfg.clone(),
        dataset_fingerprint: ds.fingerprint.clone(),
        weights_hash: weights_hash(&out.weights),
        final_loss: out.losses.last().copied().unwrap_or(0.0),
    };
    Ok((out.weights, info))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub id: String,
    #[serde(with = "util::f64_17")]
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub version: u32,
    pub fingerprint: String,
    pub scorer: String,
    pub scorer_hash: String,
    pub scale: u32,
    pub entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    pub fn new(
        fingerprint: impl Into<String>,
        scorer: impl Into<String>,
        scorer_hash: impl Into<String>,
        scale: u32,
        entries: Vec<ScoreEntry>,
    ) -> Result<Self> {
        let table = Self {
            version: SCORE_TABLE_VERSION,
            fingerprint: fingerprint.into(),
            scorer: scorer.into(),
            scorer_hash: scorer_hash.into(),
            scale,
            entries,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.version == SCORE_TABLE_VERSION,
            "unsupported score table version {}",
            self.version
        );
        ensure!(!self.entries.is_empty(), "score table is empty");
        let mut seen = std::collections::HashSet::with_capacity(self.entries.len());
        for e in &self.entries {
            ensure!(
                e.score.is_finite() && e.score >= 0.0,
                "score of {} is {}, expected a finite value >= 0",
                e.id,
                e.score
            );
            ensure!(seen.insert(e.id.as_str()), "duplicate id {} in score table", e.id);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_map(&self) -> HashMap<&str, f64> {
        self.entries.iter().map(|e| (e.id.as_str(), e.score)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json("<score table>", e))?;
        text.push('\n');
        Ok(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::imgcore::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let table: Self = util::read_json(path.as_ref())?;
        table.validate()?;
        Ok(table)
    }
}

/// MSE between the unclamped scorer output on the upscaled LR luminance and
/// the HR luminance.
pub fn score_sample_loss(w: &SrcnnWeights, s: &SamplePair) -> Result<f64> {
    let pair = luma_pair(s)?;
    let out = forward_raw(w, &pair.input)?;
    mse(&out, &pair.target)
}

/// Mean Sobel magnitude of the HR luminance.
pub fn score_sample_sobel(s: &SamplePair) -> Result<f64> {
    sobel_magnitude(&to_luma(&s.hr)?)
}

fn dataset_scale(samples: &[SamplePair]) -> Result<u32> {
    ensure!(!samples.is_empty(), "cannot score an empty dataset");
    let scale = samples[0].scale;
    ensure!(
        samples.iter().all(|s| s.scale == scale),
        "dataset mixes scale factors"
    );
    Ok(scale)
}

fn score_all(samples: &[SamplePair], f: impl Fn(&SamplePair) -> Result<f64> + Sync) -> Result<Vec<ScoreEntry>> {
    samples
        .par_iter()
        .map(|s| {
            f(s).map(|score| ScoreEntry {
                id: s.id.clone(),
                score,
            })
            .map_err(|e| Error::Sample {
                id: s.id.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Scores every sample with the SRCNN loss; entries follow dataset order.
pub fn score_dataset(w: &SrcnnWeights, ds: &PreparedDataset) -> Result<ScoreTable> {
    let scale = dataset_scale(&ds.samples)?;
    let entries = score_all(&ds.samples, |s| score_sample_loss(w, s))?;
    ScoreTable::new(ds.fingerprint.clone(), SRCNN_MSE, weights_hash(w), scale, entries)
}

/// Scores every sample by Sobel texture; same table shape as [`score_dataset`].
pub fn score_dataset_sobel(ds: &PreparedDataset) -> Result<ScoreTable> {
    let scale = dataset_scale(&ds.samples)?;
    let entries = score_all(&ds.samples, score_sample_sobel)?;
    ScoreTable::new(ds.fingerprint.clone(), SOBEL, "-", scale, entries)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation between two tables over the same id set.
pub fn rank_correlation(a: &ScoreTable, b: &ScoreTable) -> Result<f64> {
    ensure!(a.len() == b.len(), "tables have different sizes");
    ensure!(a.len() >= 2, "rank correlation needs at least two samples");
    let bmap = b.score_map();
    let mut xs = Vec::with_capacity(a.len());
    let mut ys = Vec::with_capacity(a.len());
    for e in &a.entries {
        let y = bmap
            .get(e.id.as_str())
            .ok_or_else(|| Error::contract(format!("id {} missing from second table", e.id)))?;
        xs.push(e.score);
        ys.push(*y);
    }
    let (rx, ry) = (average_ranks(&xs), average_ranks(&ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    ensure!(vx > 0.0 && vy > 0.0, "rank correlation undefined for constant scores");
    Ok(cov / (vx * vy).sqrt())
}
