//! Command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::error::{ensure, Error, Result};
use crate::imgcore::io::{read_png, write_atomic};
use crate::imgcore::{psnr, ssim, to_luma};
use crate::pipeline::{self, list_pngs, DatasetSpec, PreparedDataset};
use crate::scoring::{self, ScoreTable, ScorerInfo};
use crate::selection::{self, cdf_csv, cdf_export, CoreSetManifest, SelectionSpec, Strategy, DEFAULT_EXCLUSION};
use crate::srcnn::{load_weights_as, save_weights, Architecture, InitScheme, TrainConfig};
use crate::toytrain::{run_experiment, ExperimentPlan};
use crate::util;

#[derive(Debug, Parser)]
#[command(name = "srprune", version, about = "Loss-based core-set selection for super-resolution corpora")]
pub struct Cli {
    /// Worker threads (default: number of logical CPUs).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Default seed for commands that take one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract HR/LR patch pairs from a directory of PNG images.
    Prepare(PrepareArgs),
    /// Train a scorer SRCNN on a prepared dataset.
    TrainScorer(TrainScorerArgs),
    /// Score every sample of a prepared dataset.
    Score(ScoreArgs),
    /// Build a core-set manifest from a score table.
    Select(SelectArgs),
    /// Write the sorted cumulative score curve as CSV.
    Stats(StatsArgs),
    /// Copy the samples of a manifest into a standalone dataset.
    Materialize(MaterializeArgs),
    /// PSNR/SSIM between two directories of same-named images.
    Eval(EvalArgs),
    /// Run a desk-scale training experiment from a plan file.
    Toy(ToyArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub hr_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 480)]
    pub patch: usize,
    #[arg(long, default_value_t = 240)]
    pub stride: usize,
    #[arg(long, default_value_t = 2)]
    pub scale: u32,
    #[arg(long)]
    pub no_antialias: bool,
}

#[derive(Debug, Args)]
pub struct TrainScorerArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out_weights: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden widths n1,n2 of the 9-5-5 network.
    #[arg(long, default_value = "64,32", value_parser = parse_widths)]
    pub widths: [usize; 2],
    /// identity-he, he or gaussian.
    #[arg(long, default_value = "identity-he")]
    pub init: String,
    /// Noise scale for identity-he, standard deviation for gaussian.
    #[arg(long)]
    pub init_scale: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("scorer").required(true).args(["weights", "sobel"]))]
pub struct ScoreArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Score by mean Sobel magnitude instead of scorer loss.
    #[arg(long)]
    pub sobel: bool,
    #[arg(long)]
    pub out_table: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// asc, des, refined or random.
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub r: f64,
    /// Exclusion fraction for refined selection.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Verify the table against this prepared dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out_manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaterializeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ref_dir: PathBuf,
    #[arg(long)]
    pub test_dir: PathBuf,
    /// Border crop in pixels, by SR convention the scale factor.
    #[arg(long, default_value_t = 2)]
    pub scale: u32,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub plan_file: PathBuf,
    /// Report JSON; a CSV with the same stem is written next to it.
    #[arg(long)]
    pub out_report: PathBuf,
}

fn parse_widths(s: &str) -> std::result::Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let a = a.parse().map_err(|e| format!("{e}"))?;
            let b = b.parse().map_err(|e| format!("{e}"))?;
            Ok([a, b])
        }
        _ => Err("expected two comma-separated widths, e.g. 64,32".into()),
    }
}

fn parse_init(name: &str, scale: Option<f64>) -> Result<InitScheme> {
    match name {
        "identity-he" => Ok(InitScheme::IdentityHe {
            noise: scale.unwrap_or(0.1),
        }),
        "he" => Ok(InitScheme::He),
        "gaussian" => Ok(InitScheme::Gaussian {
            std: scale.unwrap_or(crate::srcnn::INIT_STD),
        }),
        other => Err(Error::contract(format!(
            "unknown init {other:?} (expected identity-he, he or gaussian)"
        ))),
    }
}

/// Output streams for a command; the binary forwards them to stdout.
pub type Output = String;

/// Runs a parsed command line. Returns the text to print on success.
pub fn run(cli: &Cli) -> Result<Output> {
    info!("config: {cli:?}");
    util::with_workers(cli.workers, || dispatch(cli))?
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::TrainScorer(a) => cmd_train_scorer(a, cli.seed),
        Command::Score(a) => cmd_score(a),
        Command::Select(a) => cmd_select(a, cli.seed),
        Command::Stats(a) => cmd_stats(a),
        Command::Materialize(a) => cmd_materialize(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Toy(a) => cmd_toy(a),
    }
}

/// Hint printed after errors caused by bad flag values.
pub fn usage_hint(cli: &Cli) -> Option<&'static str> {
    match cli.command {
        Command::Select(_) => Some("usage: select --table T --strategy {asc,des,refined,random} --r R [--k K] [--seed S] --out-manifest M  (0 < r < 1, k + r <= 1)"),
        Command::Prepare(_) => Some("usage: prepare --hr-dir D --out O [--patch P] [--stride S] [--scale {2,3,4}] [--no-antialias]  (patch divisible by scale)"),
        _ => None,
    }
}

fn load_dataset(path: &Path) -> Result<PreparedDataset> {
    let ds = PreparedDataset::load(path)?;
    info!("dataset {}: {} samples, fingerprint {}", path.display(), ds.len(), ds.fingerprint);
    Ok(ds)
}

fn load_table(path: &Path) -> Result<ScoreTable> {
    let t = ScoreTable::load(path)?;
    info!("table {}: {} entries, fingerprint {}", path.display(), t.len(), t.fingerprint);
    Ok(t)
}

fn cmd_prepare(a: &PrepareArgs) -> Result<Output> {
    let spec = DatasetSpec {
        hr_dir: a.hr_dir.clone(),
        patch_size: a.patch,
        stride: a.stride,
        scale: a.scale,
        antialias: !a.no_antialias,
    };
    let ds = pipeline::prepare(&spec, &a.out)?;
    Ok(format!("fingerprint {}\nsamples {}\n", ds.fingerprint, ds.len()))
}

fn cmd_train_scorer(a: &TrainScorerArgs, global_seed: Option<u64>) -> Result<Output> {
    let ds = load_dataset(&a.dataset)?;
    let arch = Architecture::reduced(a.widths[0], a.widths[1])?;
    let init = parse_init(&a.init, a.init_scale)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        steps: a.steps,
        seed: a.seed.or(global_seed).unwrap_or(0),
    };
    cfg.validate()?;
    let (w, info) = scoring::train_scorer(&ds, arch, init, &cfg)?;
    save_weights(&w, &a.out_weights)?;
    info.save_for(&a.out_weights)?;
    Ok(format!(
        "weights {}\nweights_hash {}\nfinal_loss {:e}\n",
        a.out_weights.display(),
        info.weights_hash,
        info.final_loss
    ))
}

fn cmd_score(a: &ScoreArgs) -> Result<Output> {
    let ds = load_dataset(&a.dataset)?;
    let table = if a.sobel {
        scoring::score_dataset_sobel(&ds)?
    } else {
        let path = a.weights.as_ref().expect("clap enforces the scorer group");
        let info = ScorerInfo::load_for(path)?;
        let arch = match &info {
            Some(i) => {
                ensure!(
                    i.scale == ds.spec.scale,
                    "scorer {} was trained at scale {}, dataset is scale {}",
                    path.display(),
                    i.scale,
                    ds.spec.scale
                );
                Some(i.architecture)
            }
            None => None,
        };
        let w = load_weights_as(path, arch)?;
        info!("scorer {}: hash {}", path.display(), crate::srcnn::weights_hash(&w));
        scoring::score_dataset(&w, &ds)?
    };
    table.save(&a.out_table)?;
    Ok(format!(
        "table {}\nentries {}\nscorer {}\n",
        a.out_table.display(),
        table.len(),
        table.scorer
    ))
}

fn cmd_select(a: &SelectArgs, global_seed: Option<u64>) -> Result<Output> {
    let strategy: Strategy = a.strategy.parse()?;
    let table = load_table(&a.table)?;
    if let Some(d) = &a.dataset {
        let ds = load_dataset(d)?;
        pipeline::check_fingerprint(&ds.fingerprint, &table.fingerprint)?;
    }
    let spec = SelectionSpec {
        strategy,
        r: a.r,
        k: (strategy == Strategy::Refined).then(|| a.k.unwrap_or(DEFAULT_EXCLUSION)),
        seed: (strategy == Strategy::Random).then(|| a.seed.or(global_seed).unwrap_or(0)),
    };
    let m = selection::select(&table, &spec)?;
    m.save(&a.out_manifest)?;
    Ok(format!("manifest {}\nsize {}\n", a.out_manifest.display(), m.size))
}

fn cmd_stats(a: &StatsArgs) -> Result<Output> {
    let table = load_table(&a.table)?;
    let points = cdf_export(&table)?;
    write_atomic(&a.out_csv, cdf_csv(&points).as_bytes())?;
    let mut out = format!("csv {}\nsamples {}\n", a.out_csv.display(), points.len());
    for frac in [0.25, 0.5, 0.75] {
        let idx = ((frac * points.len() as f64).ceil() as usize).clamp(1, points.len()) - 1;
        let _ = writeln!(out, "top {:.0}% holds {:.4} of total score", frac * 100.0, points[idx].1);
    }
    Ok(out)
}

fn cmd_materialize(a: &MaterializeArgs) -> Result<Output> {
    let ds = load_dataset(&a.dataset)?;
    let m = CoreSetManifest::load(&a.manifest)?;
    let n = pipeline::materialize_coreset(&ds, &m, &a.out)?;
    Ok(format!("written {n}\n"))
}

/// PSNR as printed by the CLI: `inf` for identical images.
pub fn format_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<Output> {
    let refs = list_pngs(&a.ref_dir)?;
    if refs.is_empty() {
        return Err(Error::EmptyCorpus(a.ref_dir.clone()));
    }
    let border = a.scale as usize;
    let mut rows = BTreeMap::new();
    for r in &refs {
        let name = r.file_name().expect("listed files have names");
        let t = a.test_dir.join(name);
        let reference = to_luma(&read_png(r)?)?;
        let test = to_luma(&read_png(&t)?)?;
        ensure!(
            reference.dims() == test.dims(),
            "{} and {} differ in size",
            r.display(),
            t.display()
        );
        let p = psnr(&reference, &test, border)?;
        let s = ssim(&reference, &test, border)?;
        rows.insert(name.to_string_lossy().into_owned(), (p, s));
    }
    let n = rows.len() as f64;
    let mut out = String::new();
    for (name, (p, s)) in &rows {
        let _ = writeln!(out, "{name} psnr {} ssim {s:.6}", format_psnr(*p));
    }
    let mean_p = rows.values().map(|v| v.0).sum::<f64>() / n;
    let mean_s = rows.values().map(|v| v.1).sum::<f64>() / n;
    let _ = writeln!(out, "mean psnr {} ssim {mean_s:.6}", format_psnr(mean_p));
    Ok(out)
}

fn cmd_toy(a: &ToyArgs) -> Result<Output> {
    let plan = ExperimentPlan::load(&a.plan_file)?;
    let report = run_experiment(&plan)?;
    write_atomic(&a.out_report, report.to_json()?.as_bytes())?;
    let csv_path = a.out_report.with_extension("csv");
    write_atomic(&csv_path, report.to_csv().as_bytes())?;
    let mut out = format!(
        "bicubic psnr {:.4} ssim {:.6}\ninit psnr {:.4} ssim {:.6}\n",
        report.bicubic.psnr, report.bicubic.ssim, report.init_metrics.psnr, report.init_metrics.ssim
    );
    for arm in &report.arms {
        let _ = writeln!(
            out,
            "{} psnr {:.4} ssim {:.6} steps {} samples {}",
            arm.label, arm.metrics.psnr, arm.metrics.ssim, arm.steps, arm.train_size
        );
    }
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{verdict} {}", c.constraint);
    }
    Ok(out)
}
