use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prnu_core::dataset::write_png;
use prnu_core::fingerprint::CameraFingerprint;
use prnu_core::image::{Image, ImageMeta};

fn prnu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prnu")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    prnu(&args)
}

/// Corpus with a strong pattern so a handful of images gives a confident fingerprint.
fn strong_corpus(dir: &Path) {
    let o = simulate(
        dir,
        &["--cameras", "2", "--scenes", "10", "--size", "128", "--k-strength", "0.06", "--seed", "5"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

fn auto_images(dir: &Path, cam: &str, n: usize) -> Vec<PathBuf> {
    (0..n).map(|s| dir.join(format!("images/{cam}/scene-{s:04}_auto.png"))).collect()
}

#[test]
fn missing_out_is_usage_error() {
    let o = prnu(&["simulate", "--cameras", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[usage]:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn bad_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[match]\ntreshold = 5\n").unwrap();
    let o = prnu(&["simulate", "--out", dir.path().to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulate_counts_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--cameras", "2", "--scenes", "4", "--size", "64", "--seed", "7"];
    assert!(simulate(a.path(), &args).status.success());
    assert!(simulate(b.path(), &args).status.success());
    let ma = fs::read(a.path().join("manifest.csv")).unwrap();
    let mb = fs::read(b.path().join("manifest.csv")).unwrap();
    assert_eq!(ma, mb);
    // Header (plus optional version line) and 2 cameras x 4 scenes x 3 exposures.
    let rows = String::from_utf8(ma).unwrap().lines().filter(|l| l.starts_with("images/")).count();
    assert_eq!(rows, 24);
    assert!(a.path().join("run.json").is_file());
    let img = a.path().join("images/cam-01/scene-0003_under.png");
    assert_eq!(fs::read(&img).unwrap(), fs::read(b.path().join("images/cam-01/scene-0003_under.png")).unwrap());
}

#[test]
fn fingerprint_match_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    strong_corpus(dir.path());
    let fp_path = dir.path().join("cam-00.fp");
    let mut args = vec!["fingerprint".to_string(), "--out".into(), fp_path.display().to_string(), "--camera".into(), "cam-00".into(), "--images".into()];
    args.extend(auto_images(dir.path(), "cam-00", 8).iter().map(|p| p.display().to_string()));
    let o = prnu(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    let fp = CameraFingerprint::load(&fp_path).unwrap();
    assert_eq!(fp.n_images(), 8);
    assert_eq!(fp.camera_id, "cam-00");
    assert!(dir.path().join("cam-00.fp.run.json").is_file());

    let score = |cam: &str, extra: &[&str]| {
        let q = dir.path().join(format!("images/{cam}/scene-0009_auto.png"));
        let mut a = vec!["match", "--image", q.to_str().unwrap(), "--fingerprint", fp_path.to_str().unwrap()];
        a.extend_from_slice(extra);
        let o = prnu(&a);
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap()
    };
    let same = score("cam-00", &[]);
    assert_eq!(same["decision"], true, "{same}");
    assert_eq!(same["threshold"], 60.0);
    let other = score("cam-01", &[]);
    assert_eq!(other["decision"], false, "{other}");
    let strict = score("cam-00", &["--threshold", "442"]);
    assert_eq!(strict["threshold"], 442.0);
    assert_eq!(strict["pce"], same["pce"]);
}

#[test]
fn fingerprint_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    strong_corpus(dir.path());
    let fp_path = dir.path().join("m.fp");
    let manifest = dir.path().join("manifest.csv");
    let o = prnu(&[
        "fingerprint", "--out", fp_path.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
        "--camera", "cam-01", "--exposure", "over", "--count", "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fp = CameraFingerprint::load(&fp_path).unwrap();
    assert_eq!((fp.n_images(), fp.camera_id.as_str()), (4, "cam-01"));
}

#[test]
fn fingerprint_rejects_single_image() {
    let dir = tempfile::tempdir().unwrap();
    strong_corpus(dir.path());
    let img = auto_images(dir.path(), "cam-00", 1).remove(0);
    let out = dir.path().join("x.fp");
    let o = prnu(&["fingerprint", "--out", out.to_str().unwrap(), "--images", img.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n >= 2"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn fingerprint_names_mismatched_file() {
    let dir = tempfile::tempdir().unwrap();
    strong_corpus(dir.path());
    let odd = dir.path().join("odd.png");
    write_png(&Image::new(ndarray::Array2::from_elem((64, 96), 100.0), ImageMeta::unknown()).unwrap(), &odd).unwrap();
    let mut args = vec!["fingerprint".to_string(), "--out".into(), dir.path().join("x.fp").display().to_string(), "--images".into()];
    args.extend(auto_images(dir.path(), "cam-00", 3).iter().map(|p| p.display().to_string()));
    args.push(odd.display().to_string());
    let o = prnu(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[shape_mismatch]:") && err.contains("odd.png"), "{err}");
}

const SMALL_EVAL: [&str; 13] = [
    "--synthetic", "--cameras", "3", "--scenes", "8", "--size", "64", "--fingerprint-count", "3",
    "--questioned-count", "5", "--resamples", "10",
];

fn evaluate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["evaluate", "--out", out.to_str().unwrap()];
    args.extend_from_slice(&SMALL_EVAL);
    args.extend_from_slice(extra);
    prnu(&args)
}

#[test]
fn evaluate_writes_five_trial_report_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = evaluate(dir.path(), &["--experiment", "auto_over", "--sweep", "1:1000", "--mixing", "under"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("auto_over.json")).unwrap()).unwrap();
    assert_eq!(report["trials"].as_array().unwrap().len(), 5);
    assert_eq!(report["seeds"].as_array().unwrap().len(), 5);
    assert!(report["manifest_hash"].as_str().unwrap().len() == 64);
    let csv_rows = fs::read_to_string(dir.path().join("auto_over.csv")).unwrap().lines().count();
    assert_eq!(csv_rows, 1 + 5 + 1);

    let sweep = fs::read_to_string(dir.path().join("auto_over_sweep.csv")).unwrap();
    let pts: Vec<(f64, f64)> = sweep
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect();
    assert_eq!(pts.len(), 1000);
    assert!(pts.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 >= w[0].1));

    let mixing = fs::read_to_string(dir.path().join("mixing_under.csv")).unwrap();
    assert_eq!(mixing.lines().count(), 1 + 101);
    assert!(dir.path().join("run.json").is_file());
}

#[test]
fn evaluate_is_independent_of_jobs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(a.path(), "1"), (b.path(), "4")] {
        let o = evaluate(dir, &["--trials", "2", "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["auto_auto.json", "auto_auto.csv", "run.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn evaluate_shortfall_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = prnu(&[
        "evaluate", "--out", dir.path().to_str().unwrap(), "--synthetic", "--cameras", "2", "--scenes", "8",
        "--size", "64", "--fingerprint-count", "3", "--questioned-count", "50",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[insufficient_images]"), "{}", stderr(&o));
}

#[test]
fn kappa_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    fs::write(&path, "a,b,c\nyes,yes,yes\nno,no,no\nyes,yes,yes\n").unwrap();
    let o = prnu(&["kappa", "--ratings", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kappa"], 1.0);
    assert_eq!(v["n_subjects"], 3);
}
