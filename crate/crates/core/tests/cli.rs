mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srprune::imgcore::io::write_png;
use srprune::scoring::ScoreTable;
use srprune::selection::{descending_ranking, CoreSetManifest};

fn srprune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srprune"))
        .args(["--log-level", "warn"])
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    fs::create_dir_all(dir).unwrap();
    // 18 + 12 patches of 12x12 at stride 6.
    write_png(dir.join("one.png"), &common::random_image(&mut rng, 24, 42, 3)).unwrap();
    write_png(dir.join("two.png"), &common::random_image(&mut rng, 30, 24, 1)).unwrap();
}

#[test]
fn end_to_end_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    corpus(&t.join("src"));
    let ds = t.join("ds");
    let o = srprune(&["prepare", "--hr-dir", p(&t.join("src")), "--out", p(&ds), "--patch", "12", "--stride", "6", "--scale", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fingerprint "));
    assert!(stdout(&o).contains("samples 30"), "{}", stdout(&o));

    let w = t.join("scorer.srcw");
    let o = srprune(&[
        "train-scorer", "--dataset", p(&ds), "--out-weights", p(&w), "--steps", "5", "--lr", "0.01", "--batch", "2",
        "--widths", "4,2", "--seed", "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t.join("scorer.srcw.json").exists());

    let loss = t.join("loss.json");
    let o = srprune(&["score", "--dataset", p(&ds), "--weights", p(&w), "--out-table", p(&loss)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sobel = t.join("sobel.json");
    let o = srprune(&["score", "--dataset", p(&ds), "--sobel", "--out-table", p(&sobel)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = srprune(&["score", "--dataset", p(&ds), "--out-table", p(&sobel)]);
    assert_eq!(o.status.code(), Some(2));

    let des = t.join("des.json");
    let o = srprune(&["select", "--table", p(&loss), "--strategy", "des", "--r", "0.5", "--out-manifest", p(&des), "--dataset", p(&ds)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(CoreSetManifest::load(&des).unwrap().size, 15);

    let refined = t.join("refined.json");
    let o = srprune(&["select", "--table", p(&loss), "--strategy", "refined", "--r", "0.5", "--k", "0.05", "--out-manifest", p(&refined)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = ScoreTable::load(&loss).unwrap();
    let m = CoreSetManifest::load(&refined).unwrap();
    let top: Vec<String> = descending_ranking(&table)[..2].iter().map(|e| e.id.clone()).collect();
    assert!(top.iter().all(|id| !m.contains(id)));

    let scratch = t.join("x.json");
    for bad in [
        vec!["--strategy", "median", "--r", "0.5"],
        vec!["--strategy", "des", "--r", "1.5"],
        vec!["--strategy", "refined", "--r", "0.6", "--k", "0.5"],
    ] {
        let mut args = vec!["select", "--table", p(&loss), "--out-manifest", p(&scratch)];
        args.extend(bad);
        let o = srprune(&args);
        assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
        assert!(stderr(&o).contains("usage: select"), "{}", stderr(&o));
    }

    let csv = t.join("cdf.csv");
    let o = srprune(&["stats", "--table", p(&loss), "--out-csv", p(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("rank_fraction,cumulative_loss_fraction\n"));
    assert_eq!(text.lines().count(), 31);
    assert!(text.lines().last().unwrap().starts_with("1.0000000000000000e0,1.0000000000000000e0"));

    let core = t.join("core");
    let o = srprune(&["materialize", "--dataset", p(&ds), "--manifest", p(&des), "--out", p(&core)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("written 15"));

    // A table for a different dataset is refused.
    let other = t.join("other");
    let o = srprune(&["prepare", "--hr-dir", p(&t.join("src")), "--out", p(&other), "--patch", "12", "--stride", "12", "--scale", "2"]);
    assert!(o.status.success());
    let o = srprune(&["select", "--table", p(&loss), "--strategy", "des", "--r", "0.5", "--out-manifest", p(&t.join("y.json")), "--dataset", p(&other)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fingerprint mismatch"), "{}", stderr(&o));
    let o = srprune(&["materialize", "--dataset", p(&other), "--manifest", p(&des), "--out", p(&t.join("z"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!t.join("z").exists());
}

#[test]
fn prepare_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("does-not-exist");
    let o = srprune(&["prepare", "--hr-dir", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does-not-exist"), "{}", stderr(&o));

    corpus(&tmp.path().join("src"));
    let o = srprune(&["prepare", "--hr-dir", p(&tmp.path().join("src")), "--out", p(&tmp.path().join("o")), "--patch", "100", "--scale", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("divisible"), "{}", stderr(&o));

    let o = srprune(&["prepare", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_identical_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(&tmp.path().join("a"));
    let o = srprune(&["eval", "--ref-dir", p(&tmp.path().join("a")), "--test-dir", p(&tmp.path().join("a")), "--scale", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("mean psnr inf ssim 1.000000"), "{out}");
}

#[test]
fn toy_plan_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    corpus(&t.join("src"));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    fs::create_dir_all(t.join("eval")).unwrap();
    write_png(t.join("eval/held.png"), &common::random_image(&mut rng, 26, 30, 3)).unwrap();
    let ds = t.join("ds");
    assert!(srprune(&["prepare", "--hr-dir", p(&t.join("src")), "--out", p(&ds), "--patch", "12", "--stride", "6"]).status.success());
    assert!(srprune(&["score", "--dataset", p(&ds), "--sobel", "--out-table", p(&t.join("s.json"))]).status.success());
    assert!(srprune(&["select", "--table", p(&t.join("s.json")), "--strategy", "des", "--r", "0.5", "--out-manifest", p(&t.join("des.json"))]).status.success());
    let plan = r#"{"dataset": "ds", "eval_dir": "eval", "steps": 3, "seed": 1, "batch_size": 2, "learning_rate": 0.01,
        "widths": [3, 2], "weights_dir": "weights",
        "arms": [{"label": "full"}, {"label": "des", "manifest": "des.json"}],
        "checks": [{"a": "des", "b": "des"}]}"#;
    fs::write(t.join("plan.json"), plan).unwrap();
    let report = t.join("report.json");
    let o = srprune(&["toy", "--plan-file", p(&t.join("plan.json")), "--out-report", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS PSNR(des) >= PSNR(des) - 0"), "{}", stdout(&o));
    let csv = fs::read_to_string(t.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(t.join("weights/des.srcw").exists());

    let first = fs::read(&report).unwrap();
    let o = srprune(&["toy", "--plan-file", p(&t.join("plan.json")), "--out-report", p(&report)]);
    assert!(o.status.success());
    assert_eq!(fs::read(&report).unwrap(), first);
}
