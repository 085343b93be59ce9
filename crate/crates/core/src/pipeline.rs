//! Corpus preparation: sub-image extraction, LR synthesis, fingerprinting and
//! core-set materialization.
//!
//! On-disk layout of a prepared dataset:
//!
//! ```text
//! out/index.json
//! out/HR/<id>.png
//! out/LRx<scale>/<id>.png
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure, Error, Result};
use crate::imgcore::io::{encode_png, read_png, write_atomic};
use crate::imgcore::{bicubic_resize, ImageBuffer, ResampleSpec, ScaleFactor};
use crate::scoring::SamplePair;
use crate::selection::CoreSetManifest;
use crate::util;

pub const INDEX_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUPPORTED_SCALES: [u32; 3] = [2, 3, 4];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Source directory of HR images. Not part of the fingerprint.
    pub hr_dir: PathBuf,
    pub patch_size: usize,
    pub stride: usize,
    pub scale: u32,
    pub antialias: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            hr_dir: PathBuf::new(),
            patch_size: 480,
            stride: 240,
            scale: 2,
            antialias: true,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            SUPPORTED_SCALES.contains(&self.scale),
            "scale must be one of 2, 3 or 4, got {}",
            self.scale
        );
        ensure!(self.patch_size >= 1, "patch size must be >= 1");
        ensure!(
            self.patch_size % self.scale as usize == 0,
            "patch size {} is not divisible by scale {}",
            self.patch_size,
            self.scale
        );
        ensure!(self.stride >= 1, "stride must be >= 1");
        Ok(())
    }

    fn lr_dir_name(&self) -> String {
        format!("LRx{}", self.scale)
    }
}

/// One entry of the dataset index. Paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub hr_path: String,
    pub lr_path: String,
    pub content_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    pub spec: DatasetSpec,
    pub samples: Vec<SampleRecord>,
    pub fingerprint: String,
}

#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub spec: DatasetSpec,
    pub samples: Vec<SamplePair>,
    pub records: Vec<SampleRecord>,
    pub fingerprint: String,
    /// Directory holding the index and patch files, if persisted.
    pub root: Option<PathBuf>,
}

/// SHA-256 over the dims and 8-bit contents of both images of a pair.
pub fn content_hash(s: &SamplePair) -> String {
    let mut h = Sha256::new();
    for img in [&s.hr, &s.lr] {
        let (y, x, c) = img.dims();
        for d in [y, x, c] {
            h.update((d as u64).to_le_bytes());
        }
        h.update(img.to_u8());
    }
    hex::encode(h.finalize())
}

/// Hash over the geometry fields of the spec and the ordered `(id, content_hash)` list.
pub fn dataset_fingerprint(spec: &DatasetSpec, records: &[SampleRecord]) -> String {
    let mut h = Sha256::new();
    h.update(
        format!(
            "srprune-dataset v{INDEX_VERSION}\npatch={}\nstride={}\nscale={}\nantialias={}\n",
            spec.patch_size, spec.stride, spec.scale, spec.antialias
        )
        .as_bytes(),
    );
    for r in records {
        h.update(r.id.as_bytes());
        h.update(b"\t");
        h.update(r.content_hash.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn record_for(spec: &DatasetSpec, s: &SamplePair) -> SampleRecord {
    SampleRecord {
        id: s.id.clone(),
        hr_path: format!("HR/{}.png", s.id),
        lr_path: format!("{}/{}.png", spec.lr_dir_name(), s.id),
        content_hash: content_hash(s),
    }
}

impl PreparedDataset {
    /// Builds an in-memory dataset. Samples are used as given, ids must be unique.
    pub fn from_samples(spec: DatasetSpec, samples: Vec<SamplePair>) -> Result<Self> {
        ensure!(spec.stride >= 1 && spec.patch_size >= 1, "invalid dataset geometry");
        let mut seen = std::collections::HashSet::new();
        for s in &samples {
            ensure!(seen.insert(s.id.as_str()), "duplicate sample id {}", s.id);
            ensure!(
                s.scale == spec.scale,
                "sample {} has scale {}, dataset has {}",
                s.id,
                s.scale,
                spec.scale
            );
        }
        let records: Vec<SampleRecord> = samples.iter().map(|s| record_for(&spec, s)).collect();
        let fingerprint = dataset_fingerprint(&spec, &records);
        Ok(Self {
            spec,
            samples,
            records,
            fingerprint,
            root: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn index(&self) -> DatasetIndex {
        DatasetIndex {
            version: INDEX_VERSION,
            spec: self.spec.clone(),
            samples: self.records.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Samples whose ids appear in `m`, in dataset order.
    pub fn subset(&self, m: &CoreSetManifest) -> Result<Vec<&SamplePair>> {
        check_fingerprint(&self.fingerprint, &m.source_fingerprint)?;
        let wanted: std::collections::HashSet<&str> = m.selected.iter().map(String::as_str).collect();
        ensure!(wanted.len() == m.selected.len(), "manifest lists duplicate ids");
        let picked: Vec<&SamplePair> = self
            .samples
            .iter()
            .filter(|s| wanted.contains(s.id.as_str()))
            .collect();
        if picked.len() != wanted.len() {
            let have: std::collections::HashSet<&str> = self.samples.iter().map(|s| s.id.as_str()).collect();
            let missing = m.selected.iter().find(|id| !have.contains(id.as_str())).unwrap();
            return Err(Error::Integrity(format!("manifest id {missing} is not in the dataset")));
        }
        Ok(picked)
    }

    /// Loads a prepared dataset from its directory or index file and verifies
    /// every content hash and the fingerprint.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (root, index_path) = if path.is_dir() {
            (path.to_path_buf(), path.join(INDEX_FILE))
        } else {
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (root, path.to_path_buf())
        };
        let index: DatasetIndex = util::read_json(&index_path)?;
        ensure!(
            index.version == INDEX_VERSION,
            "{}: unsupported index version {}",
            index_path.display(),
            index.version
        );
        let spec = index.spec.clone();
        spec.validate()?;
        let samples: Vec<SamplePair> = index
            .samples
            .par_iter()
            .map(|r| {
                let hr = read_png(root.join(&r.hr_path))?;
                let lr = read_png(root.join(&r.lr_path))?;
                let s = SamplePair::new(r.id.clone(), hr, lr, spec.scale)?;
                let hash = content_hash(&s);
                if hash != r.content_hash {
                    return Err(Error::Integrity(format!(
                        "sample {}: content hash {hash} does not match index {}",
                        r.id, r.content_hash
                    )));
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        let mut ds = Self::from_samples(spec, samples)?;
        if ds.fingerprint != index.fingerprint {
            return Err(Error::Integrity(format!(
                "{}: recorded fingerprint {} does not match contents {}",
                index_path.display(),
                index.fingerprint,
                ds.fingerprint
            )));
        }
        ds.records = index.samples;
        ds.root = Some(root);
        Ok(ds)
    }
}

pub(crate) fn check_fingerprint(expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::StaleManifest {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Top-left anchored grid of `patch`-sized crops, row-major. Empty when the
/// image is smaller than one patch.
pub fn extract_subimages(img: &ImageBuffer, patch: usize, stride: usize) -> Result<Vec<(usize, usize, ImageBuffer)>> {
    ensure!(patch >= 1 && stride >= 1, "patch and stride must be >= 1");
    let (h, w, _) = img.dims();
    if h < patch || w < patch {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(((h - patch) / stride + 1) * ((w - patch) / stride + 1));
    for row in (0..=h - patch).step_by(stride) {
        for col in (0..=w - patch).step_by(stride) {
            out.push((row, col, img.crop(row, col, patch, patch)?));
        }
    }
    Ok(out)
}

/// Expected patch count for an `h × w` image.
pub fn patch_count(h: usize, w: usize, patch: usize, stride: usize) -> usize {
    if h < patch || w < patch {
        0
    } else {
        ((h - patch) / stride + 1) * ((w - patch) / stride + 1)
    }
}

/// Bicubic downscale by `1/scale`.
pub fn synthesize_lr(hr: &ImageBuffer, scale: u32, antialias: bool) -> Result<ImageBuffer> {
    ensure!(scale >= 1, "scale must be >= 1");
    let s = scale as usize;
    ensure!(
        hr.height() % s == 0 && hr.width() % s == 0,
        "image {}x{} is not divisible by scale {scale}",
        hr.height(),
        hr.width()
    );
    bicubic_resize(hr, &ResampleSpec::new(ScaleFactor::down(scale)?, antialias))
}

fn sample_id(stem: &str, row: usize, col: usize, scale: u32) -> String {
    format!("{stem}_r{row:05}_c{col:05}_x{scale}")
}

/// PNG files of `dir` sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn samples_from_image(spec: &DatasetSpec, path: &Path) -> Result<Vec<SamplePair>> {
    let img = read_png(path)?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Image {
            path: path.to_path_buf(),
            message: "file name is not valid UTF-8".into(),
        })?;
    let patches = extract_subimages(&img, spec.patch_size, spec.stride)?;
    if patches.is_empty() {
        warn!(
            "skipping {}: {}x{} is smaller than patch size {}",
            path.display(),
            img.height(),
            img.width(),
            spec.patch_size
        );
    }
    patches
        .into_iter()
        .map(|(row, col, hr)| {
            let lr = synthesize_lr(&hr, spec.scale, spec.antialias)?.quantized();
            SamplePair::new(sample_id(stem, row, col, spec.scale), hr, lr, spec.scale)
        })
        .collect()
}

fn write_pair(root: &Path, rec: &SampleRecord, s: &SamplePair) -> Result<()> {
    write_atomic(&root.join(&rec.hr_path), &encode_png(&s.hr)?)?;
    write_atomic(&root.join(&rec.lr_path), &encode_png(&s.lr)?)
}

fn create_layout(root: &Path, spec: &DatasetSpec) -> Result<()> {
    for dir in [root.join("HR"), root.join(spec.lr_dir_name())] {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    Ok(())
}

/// Extracts patches from every PNG in `spec.hr_dir`, synthesizes their LR
/// counterparts and writes the dataset to `out_dir`.
pub fn prepare(spec: &DatasetSpec, out_dir: impl AsRef<Path>) -> Result<PreparedDataset> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let files = list_pngs(&spec.hr_dir)?;
    let per_image: Vec<Vec<SamplePair>> = files
        .par_iter()
        .map(|p| samples_from_image(spec, p))
        .collect::<Result<_>>()?;
    let samples: Vec<SamplePair> = per_image.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::EmptyCorpus(spec.hr_dir.clone()));
    }
    let mut ds = PreparedDataset::from_samples(spec.clone(), samples)?;
    create_layout(out_dir, spec)?;
    ds.samples
        .par_iter()
        .zip(&ds.records)
        .try_for_each(|(s, r)| write_pair(out_dir, r, s))?;
    util::write_json(&out_dir.join(INDEX_FILE), &ds.index())?;
    info!(
        "prepared {} samples from {} images, fingerprint {}",
        ds.len(),
        files.len(),
        ds.fingerprint
    );
    ds.root = Some(out_dir.to_path_buf());
    Ok(ds)
}

/// Writes the selected pairs of `m` to `out_dir` as a self-contained dataset,
/// with the manifest alongside. Returns the number of pairs written.
pub fn materialize_coreset(ds: &PreparedDataset, m: &CoreSetManifest, out_dir: impl AsRef<Path>) -> Result<usize> {
    let out_dir = out_dir.as_ref();
    let picked = ds.subset(m)?;
    let samples: Vec<SamplePair> = picked.into_iter().cloned().collect();
    let mut sub = PreparedDataset::from_samples(ds.spec.clone(), samples)?;
    create_layout(out_dir, &sub.spec)?;
    let by_id: std::collections::HashMap<&str, &SampleRecord> =
        ds.records.iter().map(|r| (r.id.as_str(), r)).collect();
    for (s, r) in sub.samples.iter().zip(&sub.records) {
        match &ds.root {
            Some(src_root) => {
                let src = by_id[s.id.as_str()];
                for (from, to) in [(&src.hr_path, &r.hr_path), (&src.lr_path, &r.lr_path)] {
                    let from = src_root.join(from);
                    let bytes = fs::read(&from).map_err(|e| Error::io(&from, e))?;
                    write_atomic(&out_dir.join(to), &bytes)?;
                }
            }
            None => write_pair(out_dir, r, s)?,
        }
    }
    util::write_json(&out_dir.join(INDEX_FILE), &sub.index())?;
    m.save(out_dir.join(MANIFEST_FILE))?;
    sub.root = Some(out_dir.to_path_buf());
    Ok(sub.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(h: usize, w: usize) -> ImageBuffer {
        ImageBuffer::from_fn(h, w, 1, |_, y, x| ((y * 7 + x * 3) % 256) as f64 / 255.0).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(DatasetSpec::default().validate().is_ok());
        let bad = DatasetSpec {
            patch_size: 100,
            scale: 3,
            ..DatasetSpec::default()
        };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("not divisible"), "{msg}");
        assert!(DatasetSpec {
            stride: 0,
            ..DatasetSpec::default()
        }
        .validate()
        .is_err());
        assert!(DatasetSpec {
            scale: 5,
            patch_size: 500,
            ..DatasetSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn patch_grid_counts() {
        let one = extract_subimages(&gradient(480, 480), 480, 240).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].0, one[0].1), (0, 0));
        assert_eq!(extract_subimages(&gradient(720, 960), 480, 240).unwrap().len(), 6);
        assert_eq!(patch_count(1356, 2040, 480, 240), 28);
        assert!(extract_subimages(&gradient(10, 40), 16, 8).unwrap().is_empty());
    }

    #[test]
    fn patch_grid_is_row_major() {
        let img = gradient(20, 30);
        let p = extract_subimages(&img, 10, 10).unwrap();
        let anchors: Vec<_> = p.iter().map(|(r, c, _)| (*r, *c)).collect();
        assert_eq!(anchors, vec![(0, 0), (0, 10), (0, 20), (10, 0), (10, 10), (10, 20)]);
        assert_eq!(p[4].2.get(0, 0, 0), img.get(0, 10, 10));
    }

    #[test]
    fn lr_synthesis() {
        let c = ImageBuffer::filled(12, 12, 3, 0.4).unwrap();
        let lr = synthesize_lr(&c, 2, true).unwrap();
        assert_eq!(lr.dims(), (6, 6, 3));
        assert!(lr.data().iter().all(|v| (v - 0.4).abs() < 1e-12));
        let big = ImageBuffer::filled(480, 480, 1, 0.5).unwrap();
        assert_eq!(synthesize_lr(&big, 3, true).unwrap().dims(), (160, 160, 1));
        assert!(synthesize_lr(&gradient(10, 10), 3, true).is_err());
    }

    #[test]
    fn fingerprint_tracks_every_field() {
        let s = |id: &str, v: f64| {
            let hr = ImageBuffer::filled(8, 8, 1, v).unwrap();
            let lr = synthesize_lr(&hr, 2, true).unwrap();
            SamplePair::new(id, hr, lr, 2).unwrap()
        };
        let spec = DatasetSpec {
            patch_size: 8,
            stride: 8,
            ..DatasetSpec::default()
        };
        let base = PreparedDataset::from_samples(spec.clone(), vec![s("a", 0.2), s("b", 0.6)]).unwrap();
        let again = PreparedDataset::from_samples(spec.clone(), vec![s("a", 0.2), s("b", 0.6)]).unwrap();
        assert_eq!(base.fingerprint, again.fingerprint);
        let renamed = PreparedDataset::from_samples(spec.clone(), vec![s("a", 0.2), s("c", 0.6)]).unwrap();
        let pixel = PreparedDataset::from_samples(spec.clone(), vec![s("a", 0.2), s("b", 0.8)]).unwrap();
        let other_spec = PreparedDataset::from_samples(
            DatasetSpec {
                stride: 4,
                ..spec.clone()
            },
            vec![s("a", 0.2), s("b", 0.6)],
        )
        .unwrap();
        let moved = PreparedDataset::from_samples(
            DatasetSpec {
                hr_dir: "/elsewhere".into(),
                ..spec
            },
            vec![s("a", 0.2), s("b", 0.6)],
        )
        .unwrap();
        for other in [&renamed, &pixel, &other_spec] {
            assert_ne!(base.fingerprint, other.fingerprint);
        }
        assert_eq!(base.fingerprint, moved.fingerprint);
    }
}
