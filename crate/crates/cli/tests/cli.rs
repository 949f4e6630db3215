use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn terraseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_terraseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = terraseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small frames keep the end-to-end runs quick.
const SMALL: [&str; 6] = [
    "--set",
    "mosaic.width=96",
    "--set",
    "mosaic.height=96",
    "--set",
    "mosaic.wobble=4.0",
];

fn gen(dir: &Path, extra: &[&str]) -> Vec<PathBuf> {
    let mut args = vec!["gen-mosaic", "--out-dir", s(dir)];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    ok(&args);
    let mut pgms: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pgm") && !s(p).ends_with("_labels.pgm"))
        .collect();
    pgms.sort();
    pgms
}

fn labels_of(p: &Path) -> PathBuf {
    p.with_file_name(format!("{}_labels.pgm", p.file_stem().unwrap().to_str().unwrap()))
}

#[test]
fn gen_mosaic_is_byte_identical_for_a_seed() {
    let t = TempDir::new().unwrap();
    let a = gen(&t.path().join("a"), &["--count", "2", "--seed", "5"]);
    let b = gen(&t.path().join("b"), &["--count", "2", "--seed", "5"]);
    let c = gen(&t.path().join("c"), &["--count", "2", "--seed", "6"]);
    assert_eq!(a.len(), 2);
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        assert_eq!(fs::read(labels_of(x)).unwrap(), fs::read(labels_of(y)).unwrap());
        assert_ne!(fs::read(x).unwrap(), fs::read(z).unwrap());
    }
    // raw label samples are classes 1..=3 covering the frame
    let raw = fs::read(labels_of(&a[0])).unwrap();
    let body = &raw[raw.len() - 96 * 96..];
    assert!(body.iter().all(|v| (1..=3).contains(v)));
}

#[test]
fn full_pipeline() {
    let t = TempDir::new().unwrap();
    let root = t.path();
    let imgs = gen(&root.join("m"), &["--count", "3"]);
    let mut args: Vec<String> = vec!["extract".into()];
    args.extend(imgs.iter().map(|p| s(p).to_string()));
    args.push("--labels".into());
    args.extend(imgs.iter().map(|p| s(&labels_of(p)).to_string()));
    for a in ["--out-dir", s(&root.join("f")), "--aggregate", s(&root.join("all.csv"))] {
        args.push(a.into());
    }
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let csv = fs::read_to_string(root.join("all.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let label_col = header.iter().position(|h| *h == "label").expect("label column");
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for r in &rows {
        let l: u8 = r.split(',').nth(label_col).unwrap().parse().unwrap();
        assert!((1..=3).contains(&l));
    }

    let all = s(&root.join("all.csv")).to_string();
    ok(&["train", &all, "--out-dir", s(&root.join("nn"))]);
    ok(&[
        "train",
        &all,
        "--classifier",
        "mlp",
        "--set",
        "train.max_epochs=40",
        "--set",
        "train.layers=[36, 8, 4, 3]",
        "--out-dir",
        s(&root.join("mlp")),
    ]);
    for f in ["model.csv", "variability.csv", "pca.csv", "config.toml"] {
        assert!(root.join("nn").join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(root.join("mlp/training_log.csv")).unwrap();
    let losses: Vec<f64> = log.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(losses.last().unwrap() < &losses[0]);
    let var = fs::read_to_string(root.join("nn/variability.csv")).unwrap();
    let m: Vec<Vec<String>> = var.lines().skip(1).map(|l| l.split(',').skip(1).map(String::from).collect()).collect();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m[i][j], m[j][i]);
        }
    }

    let seg_dir = root.join("seg");
    let out = ok(&[
        "segment",
        s(&imgs[0]),
        s(&imgs[1]),
        "--model",
        s(&root.join("nn/model.csv")),
        "--truth",
        s(&labels_of(&imgs[0])),
        s(&labels_of(&imgs[1])),
        "--out-dir",
        s(&seg_dir),
        "--set-name",
        "training",
    ]);
    let stats: Vec<&str> = out.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(stats, ["statistic", "mean", "std", "min", "max"]);
    assert!(seg_dir.join(format!("{}_seg.ppm", imgs[0].file_stem().unwrap().to_str().unwrap())).exists());
    let mean: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    // detector borders cover much of a 96-px frame; full-size accuracy is
    // checked by the acceptance suite
    assert!(mean <= 30.0, "training-image error {mean}%");

    // eval over the written maps reproduces the block
    let pred: Vec<PathBuf> = imgs[..2]
        .iter()
        .map(|p| seg_dir.join(format!("{}_seg.pgm", p.file_stem().unwrap().to_str().unwrap())))
        .collect();
    let ev = ok(&[
        "eval",
        "--pred",
        s(&pred[0]),
        s(&pred[1]),
        "--truth",
        s(&labels_of(&imgs[0])),
        s(&labels_of(&imgs[1])),
        "--name",
        "NN",
        "--set-name",
        "training",
    ]);
    assert_eq!(ev, out);

    let seq = gen(&root.join("seq"), &["--sequence", "3", "--step", "16", "--prefix", "frame"]);
    let tr = root.join("tr");
    ok(&[
        "track",
        s(&seq[0]),
        s(&seq[1]),
        s(&seq[2]),
        "--model",
        s(&root.join("mlp/model.json")),
        "--out-dir",
        s(&tr),
    ]);
    let track = fs::read_to_string(tr.join("track.csv")).unwrap();
    assert!(track.starts_with("frame,detected,matched,inliers,ratio"));
    assert_eq!(track.lines().count(), 4);
    assert_eq!(fs::read_to_string(tr.join("pose.csv")).unwrap().lines().count(), 4);
    assert!(tr.join("frame_002_seg.pgm").exists());
}

#[test]
fn bench_match_schema() {
    let t = TempDir::new().unwrap();
    let imgs = gen(&t.path().join("m"), &["--count", "1"]);
    let out = ok(&[
        "bench-match",
        s(&imgs[0]),
        s(&imgs[0]),
        "--variant",
        "a",
        "--variant",
        "b:threshold=3e-4",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "impl,detected1,detected2,matched,inliers,ratio");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("a,") && lines[2].starts_with("b,"));
    let ratio: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!(ratio > 0.99);
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    let dir = s(t.path());
    assert_eq!(terraseg(&[]).status.code(), Some(1));
    assert_eq!(terraseg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(terraseg(&["eval"]).status.code(), Some(1));
    assert_eq!(terraseg(&["--help"]).status.code(), Some(0));
    assert_eq!(terraseg(&["gen-mosaic", "--out-dir", dir, "--set", "oops"]).status.code(), Some(1));
    assert_eq!(
        terraseg(&["bench-match", "a.pgm", "b.pgm", "c.pgm"]).status.code(),
        Some(1),
        "odd image count"
    );

    let missing = terraseg(&["segment", "/nonexistent.pgm", "--model", "/nonexistent.csv", "--out-dir", dir]);
    assert_eq!(missing.status.code(), Some(2));
    let bad = t.path().join("bad.pgm");
    fs::write(&bad, b"P5\n4 4\n255\n\x00\x01").unwrap();
    let out = terraseg(&["extract", s(&bad), "--out-dir", dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.pgm"));
    let cfg = t.path().join("cfg.toml");
    fs::write(&cfg, "[segment]\nsigma = -2.0\n").unwrap();
    assert_eq!(terraseg(&["--config", s(&cfg), "gen-mosaic", "--out-dir", dir]).status.code(), Some(2));
}

#[test]
fn config_file_and_flags() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("cfg.toml");
    fs::write(&cfg, "seed = 9\n[mosaic]\nwidth = 64\nheight = 64\nwobble = 3.0\n").unwrap();
    let a = t.path().join("a");
    ok(&["--config", s(&cfg), "gen-mosaic", "--out-dir", s(&a)]);
    let raw = fs::read(a.join("mosaic_000.pgm")).unwrap();
    assert!(raw.starts_with(b"P5\n64 64\n"));
    // flags win over the file
    let b = t.path().join("b");
    ok(&["--config", s(&cfg), "--set", "mosaic.width=80", "gen-mosaic", "--out-dir", s(&b)]);
    assert!(fs::read(b.join("mosaic_000.pgm")).unwrap().starts_with(b"P5\n80 64\n"));
    let written = fs::read_to_string(b.join("mosaic_config.toml")).unwrap();
    assert!(written.contains("seed = 9"));
}
