//! Core-set construction from a [`ScoreTable`].
//!
//! The summed-score objective is separable, so keeping the `floor(r * N)`
//! highest (DES) or lowest (ASC) scores is optimal. Ties are broken by
//! ascending id.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::scoring::{ScoreEntry, ScoreTable};
use crate::util;

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_EXCLUSION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Lowest scores first.
    Asc,
    /// Highest scores first.
    Des,
    /// Highest scores after skipping the top `k` fraction.
    Refined,
    Random,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asc" => Ok(Strategy::Asc),
            "des" => Ok(Strategy::Des),
            "refined" => Ok(Strategy::Refined),
            "random" => Ok(Strategy::Random),
            other => Err(Error::contract(format!(
                "unknown strategy {other:?} (expected asc, des, refined or random)"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Asc => "asc",
            Strategy::Des => "des",
            Strategy::Refined => "refined",
            Strategy::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub strategy: Strategy,
    pub r: f64,
    /// Exclusion fraction; only meaningful for `Refined`.
    pub k: Option<f64>,
    /// Only meaningful for `Random`.
    pub seed: Option<u64>,
}

impl SelectionSpec {
    pub fn asc(r: f64) -> Self {
        Self::plain(Strategy::Asc, r)
    }

    pub fn des(r: f64) -> Self {
        Self::plain(Strategy::Des, r)
    }

    pub fn refined(r: f64, k: f64) -> Self {
        Self {
            strategy: Strategy::Refined,
            r,
            k: Some(k),
            seed: None,
        }
    }

    pub fn random(r: f64, seed: u64) -> Self {
        Self {
            strategy: Strategy::Random,
            r,
            k: None,
            seed: Some(seed),
        }
    }

    fn plain(strategy: Strategy, r: f64) -> Self {
        Self {
            strategy,
            r,
            k: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.r > 0.0 && self.r < 1.0, "r must lie in (0, 1), got {}", self.r);
        if self.strategy == Strategy::Refined {
            let k = self.k.unwrap_or(DEFAULT_EXCLUSION);
            ensure!((0.0..1.0).contains(&k), "k must lie in [0, 1), got {k}");
            ensure!(k + self.r <= 1.0 + 1e-12, "k + r must be <= 1, got {k} + {}", self.r);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreSetManifest {
    pub version: u32,
    pub spec: SelectionSpec,
    pub source_fingerprint: String,
    pub scorer: String,
    pub scorer_hash: String,
    pub size: usize,
    pub selected: Vec<String>,
}

impl CoreSetManifest {
    fn from_table(t: &ScoreTable, spec: SelectionSpec, selected: Vec<String>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            spec,
            source_fingerprint: t.fingerprint.clone(),
            scorer: t.scorer.clone(),
            scorer_hash: t.scorer_hash.clone(),
            size: selected.len(),
            selected,
        }
    }

    /// Indicator of the core-set.
    pub fn contains(&self, id: &str) -> bool {
        self.selected.iter().any(|s| s == id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json("<manifest>", e))?;
        text.push('\n');
        Ok(text)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> Result<String> {
        Ok(util::sha256_hex(self.to_json()?.as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::imgcore::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = util::read_json(path.as_ref())?;
        ensure!(m.version == MANIFEST_VERSION, "unsupported manifest version {}", m.version);
        ensure!(m.size == m.selected.len(), "manifest size field disagrees with its id list");
        Ok(m)
    }
}

/// `floor(r * n)`, rejecting empty core-sets.
pub fn coreset_size(n: usize, r: f64) -> Result<usize> {
    ensure!(n >= 1, "dataset is empty");
    ensure!(r > 0.0 && r < 1.0, "r must lie in (0, 1), got {r}");
    let size = snap(r * n as f64).floor() as usize;
    if size == 0 {
        return Err(Error::DegenerateSelection { n, r });
    }
    Ok(size)
}

/// Refined exclusion count `ceil(k * n)`.
pub fn exclusion_count(n: usize, k: f64) -> usize {
    snap(k * n as f64).ceil() as usize
}

/// Rounds products that sit within representation error of an integer, so
/// `0.29 * 100` floors to 29 and `0.07 * 100` ceils to 7.
fn snap(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-12 * nearest.abs().max(1.0) {
        nearest
    } else {
        x
    }
}

fn by_score_desc(a: &ScoreEntry, b: &ScoreEntry) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

fn by_score_asc(a: &ScoreEntry, b: &ScoreEntry) -> Ordering {
    a.score.total_cmp(&b.score).then_with(|| a.id.cmp(&b.id))
}

/// Entries ordered by descending score, ties by ascending id.
pub fn descending_ranking(t: &ScoreTable) -> Vec<&ScoreEntry> {
    let mut v: Vec<&ScoreEntry> = t.entries.iter().collect();
    v.sort_by(|a, b| by_score_desc(a, b));
    v
}

fn take_ids(ranked: &[&ScoreEntry]) -> Vec<String> {
    ranked.iter().map(|e| e.id.clone()).collect()
}

pub fn select_descending(t: &ScoreTable, r: f64) -> Result<CoreSetManifest> {
    t.validate()?;
    let size = coreset_size(t.len(), r)?;
    let ranked = descending_ranking(t);
    Ok(CoreSetManifest::from_table(t, SelectionSpec::des(r), take_ids(&ranked[..size])))
}

pub fn select_ascending(t: &ScoreTable, r: f64) -> Result<CoreSetManifest> {
    t.validate()?;
    let size = coreset_size(t.len(), r)?;
    let mut ranked: Vec<&ScoreEntry> = t.entries.iter().collect();
    ranked.sort_by(|a, b| by_score_asc(a, b));
    Ok(CoreSetManifest::from_table(t, SelectionSpec::asc(r), take_ids(&ranked[..size])))
}

/// Descending ranks `[ceil(k N), ceil(k N) + floor(r N))`.
pub fn select_refined(t: &ScoreTable, r: f64, k: f64) -> Result<CoreSetManifest> {
    t.validate()?;
    let spec = SelectionSpec::refined(r, k);
    spec.validate()?;
    let n = t.len();
    let size = coreset_size(n, r)?;
    let skip = exclusion_count(n, k);
    ensure!(
        skip + size <= n,
        "refined selection needs {skip} + {size} ranks but the table has {n}"
    );
    let ranked = descending_ranking(t);
    Ok(CoreSetManifest::from_table(t, spec, take_ids(&ranked[skip..skip + size])))
}

/// Uniform sample without replacement; ids listed in dataset order.
pub fn select_random(t: &ScoreTable, r: f64, seed: u64) -> Result<CoreSetManifest> {
    t.validate()?;
    let n = t.len();
    let size = coreset_size(n, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    let ids = picked.into_iter().map(|i| t.entries[i].id.clone()).collect();
    Ok(CoreSetManifest::from_table(t, SelectionSpec::random(r, seed), ids))
}

pub fn select(t: &ScoreTable, spec: &SelectionSpec) -> Result<CoreSetManifest> {
    spec.validate()?;
    match spec.strategy {
        Strategy::Asc => select_ascending(t, spec.r),
        Strategy::Des => select_descending(t, spec.r),
        Strategy::Refined => select_refined(t, spec.r, spec.k.unwrap_or(DEFAULT_EXCLUSION)),
        Strategy::Random => select_random(t, spec.r, spec.seed.unwrap_or(0)),
    }
}

/// Sorted cumulative score curve: point `i` (1-based) is
/// `(i / N, sum of the i largest scores / total)`.
pub fn cdf_export(t: &ScoreTable) -> Result<Vec<(f64, f64)>> {
    t.validate()?;
    let mut scores: Vec<f64> = t.entries.iter().map(|e| e.score).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    let n = scores.len() as f64;
    let mut running = 0.0;
    Ok(scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            running += s;
            ((i + 1) as f64 / n, running / total)
        })
        .collect())
}

pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("rank_fraction,cumulative_loss_fraction\n");
    for (x, y) in points {
        out.push_str(&format!("{x:.16e},{y:.16e}\n"));
    }
    out
}
