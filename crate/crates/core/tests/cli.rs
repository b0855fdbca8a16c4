//! End-to-end runs of the `kfmot` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kfmot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfmot"))
        .args(args)
        .env("KFMOT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    let o = kfmot(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_one() {
    let o = kfmot(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_flag_exits_one() {
    let o = kfmot(&["synth", "--kind", "occlusion", "--out-dir", "x", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_input_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere-det.txt");
    let o = kfmot(&[
        "segment",
        "--dets",
        p(&missing),
        "--feats",
        p(&missing),
        "--out",
        p(&dir.path().join("s.txt")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere-det.txt"), "{}", stderr(&o));
}

#[test]
fn invalid_range_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = kfmot(&["synth", "--kind", "random_walk", "--objects", "0", "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

/// synth, segment, fuse, track and eval chained through files.
#[test]
fn pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("scene");
    let o = kfmot(&[
        "synth", "--kind", "occlusion", "--objects", "4", "--frames", "40", "--seed", "3", "--out-dir", p(&data),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["det.txt", "gt.txt", "feat.txt", "scenario.txt"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let (det, feat, gt) = (data.join("det.txt"), data.join("feat.txt"), data.join("gt.txt"));
    let strat = d.join("strategy.txt");
    let o = kfmot(&[
        "segment", "--dets", p(&det), "--feats", p(&feat), "--frames", "40", "--min-len", "2", "--max-len", "10",
        "--episodes", "2000", "--seed", "1", "--out", p(&strat),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let fused = d.join("fused.txt");
    let o = kfmot(&["fuse", "--dets", p(&det), "--feats", p(&feat), "--mode", "average", "--out", p(&fused)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let results = d.join("res.txt");
    let o = kfmot(&[
        "track", "--dets", p(&det), "--feats", p(&fused), "--frames", "40", "--strategy", p(&strat), "--out",
        p(&results),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let report = d.join("report.csv");
    let o = kfmot(&["eval", "--results", p(&results), "--gt", p(&gt), "--out", p(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.lines().count() >= 3, "{text}");
    assert!(text.lines().last().unwrap().starts_with("COMBINED"), "{text}");

    let o = kfmot(&["report", "--input", p(&report), "--format", "markdown"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("| "));
}

#[test]
fn train_then_track_with_gcn() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("scene");
    assert_eq!(
        kfmot(&["synth", "--kind", "lookalike", "--objects", "4", "--frames", "30", "--seed", "5", "--out-dir", p(&data)])
            .status
            .code(),
        Some(0)
    );
    let (det, feat, gt) = (data.join("det.txt"), data.join("feat.txt"), data.join("gt.txt"));
    let strat = d.join("strategy.txt");
    fs::write(&strat, "1,1,10\n2,11,20\n3,21,30\n").unwrap();
    let (scorer, weights) = (d.join("scorer.txt"), d.join("gcn.txt"));
    let o = kfmot(&[
        "train", "--dets", p(&det), "--feats", p(&feat), "--gt", p(&gt), "--strategy", p(&strat), "--fusion", "gcn",
        "--iterations", "50", "--out", p(&scorer), "--gcn-out", p(&weights),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let res = d.join("res.txt");
    let o = kfmot(&[
        "track", "--dets", p(&det), "--feats", p(&feat), "--frames", "30", "--strategy", p(&strat), "--scorer",
        p(&scorer), "--gcn-weights", p(&weights), "--out", p(&res),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!fs::read_to_string(&res).unwrap().is_empty());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.cfg");
    fs::write(&cfg, "# synth defaults\nkind=crossing\nobjects=3\nframes=20\n").unwrap();
    let out = d.join("a");
    let o = kfmot(&["synth", "--config", p(&cfg), "--frames", "25", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let scenario = fs::read_to_string(out.join("scenario.txt")).unwrap();
    assert!(scenario.contains("kind=crossing"), "{scenario}");
    assert!(scenario.contains("objects=3"), "{scenario}");
    assert!(scenario.contains("frames=25"), "{scenario}");
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = kfmot(&["synth", "--kind", "random_walk", "--seed", "9", "--box-noise", "1.5", "--out-dir", p(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["det.txt", "gt.txt", "feat.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn ablate_single_noise_free_row() {
    let o = kfmot(&[
        "ablate", "--kinds", "random_walk", "--variants", "baseline", "--seeds", "1", "--objects", "1", "--frames",
        "20", "--feature-noise", "0", "--box-noise", "0", "--drop-rate", "0", "--train-sequences", "1",
        "--iterations", "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let hota = header.iter().position(|h| *h == "HOTA").unwrap();
    assert_eq!(row[hota], "1.000000", "{text}");
}
