use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tactile");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

/// Every file under `root`, relative path to contents, sorted.
fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

const FAST: &[&str] = &["--epochs", "3", "--test-per-class", "1"];

#[test]
fn synth_counts_and_digest_are_stable() {
    let t = tempfile::tempdir().unwrap();
    let a = ok(t.path(), &["--seed", "9", "synth", "--users", "1", "--reps", "1", "--out", "a"]);
    let b = ok(t.path(), &["--seed", "9", "synth", "--users", "1", "--reps", "1", "--out", "b"]);
    assert!(a.starts_with("5 samples"), "{a}");
    let digest = |s: &str| s.lines().last().unwrap().to_string();
    assert_eq!(digest(&a), digest(&b));
    assert_eq!(snapshot(&t.path().join("a")), snapshot(&t.path().join("b")));
    let c = ok(t.path(), &["--seed", "10", "synth", "--users", "1", "--reps", "1", "--out", "c"]);
    assert_ne!(digest(&a), digest(&c));
}

#[test]
fn full_scale_synth_has_1900_samples() {
    let t = tempfile::tempdir().unwrap();
    let out = ok(t.path(), &["synth", "--users", "38", "--reps", "10", "--out", "d"]);
    assert!(out.starts_with("1900 samples"), "{out}");
    assert_eq!(fs::read_dir(t.path().join("d/samples")).unwrap().count(), 1900);
}

#[test]
fn usage_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(t.path(), &["synth", "--bogus"]), 2);
    assert_eq!(code(t.path(), &["synth", "--users", "0", "--out", "x"]), 2);
    assert_eq!(code(t.path(), &["synth", "--default-layout", "4y4"]), 2);
    assert_eq!(code(t.path(), &["sweep", "--dataset", "x", "--L", "0,1"]), 2);
    assert_eq!(code(t.path(), &["frobnicate"]), 2);
}

#[test]
fn empty_dataset_exits_2_and_missing_files_exit_3() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "--users", "1", "--reps", "1", "--out", "ds"]);
    assert_eq!(code(t.path(), &["process", "--dataset", "nowhere"]), 3);

    let manifest = t.path().join("ds/manifest.json");
    let mut m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    let keep = m.clone();
    m["samples"] = serde_json::json!([]);
    m["class_counts"] = serde_json::json!([0, 0, 0, 0, 0]);
    fs::write(&manifest, serde_json::to_vec(&m).unwrap()).unwrap();
    assert_eq!(code(t.path(), &["process", "--dataset", "ds"]), 2);

    fs::write(&manifest, serde_json::to_vec(&keep).unwrap()).unwrap();
    fs::remove_file(t.path().join("ds/samples/000002.txsq")).unwrap();
    let out = run(t.path(), &["process", "--dataset", "ds"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("000002.txsq"));
}

#[test]
fn process_renders_ceil_frames_over_k() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["--seed", "2", "synth", "--users", "1", "--reps", "1", "--out", "ds"]);
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(t.path().join("ds/manifest.json")).unwrap()).unwrap();
    for (mode, ext, k) in [("augmented", "ppm", 3usize), ("raw", "pgm", 4)] {
        let out = format!("o-{mode}");
        ok(t.path(), &["--out-dir", &out, "process", "--dataset", "ds", "--mode", mode, "--render-every", &k.to_string()]);
        for (i, s) in m["samples"].as_array().unwrap().iter().enumerate() {
            let frames = s["frames"].as_u64().unwrap() as usize;
            let dir = t.path().join(&out).join(format!("render/{i:06}"));
            let files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
            assert_eq!(files.len(), frames.div_ceil(k), "sample {i}");
            assert!(files.iter().all(|p| p.extension().unwrap() == ext));
        }
    }
    assert_eq!(fs::read_dir(t.path().join("ds/cache")).unwrap().count(), 2);
}

#[test]
fn diverging_training_exits_4() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "--users", "1", "--reps", "3", "--out", "ds"]);
    let out = run(
        t.path(),
        &["train", "--dataset", "ds", "--lr", "1e308", "--dropout", "0", "--epochs", "3", "--test-per-class", "1", "--variant", "raw"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn every_command_is_byte_reproducible() {
    let t = tempfile::tempdir().unwrap();
    for run_dir in ["r1", "r2"] {
        let ds = format!("{run_dir}/ds");
        let out = format!("{run_dir}/out");
        ok(t.path(), &["--seed", "4", "synth", "--users", "1", "--reps", "3", "--out", &ds]);
        ok(t.path(), &["--out-dir", &out, "process", "--dataset", &ds, "--render-every", "5"]);
        let mut train = vec!["--out-dir", &out, "--seed", "1", "train", "--dataset", &ds, "--L", "3"];
        train.extend(FAST);
        ok(t.path(), &train);
        let model = format!("{out}/model-augmented-L3-seed1.json");
        let mut eval = vec!["--out-dir", &out, "--seed", "1", "eval", "--dataset", &ds, "--model", &model];
        eval.extend(FAST);
        ok(t.path(), &eval);
        fs::rename(t.path().join(&out).join("report.json"), t.path().join(&out).join("model-report.json")).unwrap();
        let mut eval = vec!["--out-dir", &out, "eval", "--dataset", &ds, "--seeds", "1", "--L", "2"];
        eval.extend(FAST);
        ok(t.path(), &eval);
        let mut sweep = vec!["--out-dir", &out, "sweep", "--dataset", &ds, "--seeds", "2", "--L", "1,3"];
        sweep.extend(FAST);
        ok(t.path(), &sweep);
        ok(t.path(), &["--out-dir", &out, "oracle-export", "--dataset", &ds, "--pairs", "3"]);
    }
    let a = snapshot(&t.path().join("r1"));
    let b = snapshot(&t.path().join("r2"));
    assert!(a.len() > 20);
    assert_eq!(a.len(), b.len());
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{} differs between runs", pa.display());
    }
    // threads do not change results
    let mut eval = vec!["--threads", "1", "--out-dir", "r3", "eval", "--dataset", "r1/ds", "--seeds", "1", "--L", "2"];
    eval.extend(FAST);
    ok(t.path(), &eval);
    assert_eq!(
        fs::read(t.path().join("r3/report.json")).unwrap(),
        fs::read(t.path().join("r1/out/report.json")).unwrap()
    );
}

#[test]
fn sweep_csv_has_one_row_per_length_variant_seed() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "--users", "1", "--reps", "3", "--out", "ds"]);
    let mut sweep = vec!["--out-dir", "o", "sweep", "--dataset", "ds", "--seeds", "3"];
    sweep.extend(FAST);
    ok(t.path(), &sweep);
    let csv = fs::read_to_string(t.path().join("o/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("L,variant,seed,accuracy"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 36);
    let mut expected = Vec::new();
    for l in 1..=6 {
        for v in ["raw", "augmented"] {
            for s in 0..3 {
                expected.push(format!("{l},{v},{s}"));
            }
        }
    }
    let keys: Vec<String> = rows.iter().map(|r| r.rsplit_once(',').unwrap().0.to_string()).collect();
    assert_eq!(keys, expected);
    let summary = fs::read_to_string(t.path().join("o/sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 13);
}

#[test]
fn eval_report_rows_sum_to_test_per_class() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "--users", "1", "--reps", "6", "--out", "ds"]);
    ok(t.path(), &["--out-dir", "o", "eval", "--dataset", "ds", "--seeds", "3", "--test-per-class", "4", "--epochs", "2"]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(t.path().join("o/report.json")).unwrap()).unwrap();
    let variants = r["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    for v in variants {
        assert_eq!(v["accuracies"].as_array().unwrap().len(), 3);
        for run in v["runs"].as_array().unwrap() {
            for row in run["report"]["confusion"].as_array().unwrap() {
                let s: u64 = row.as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
                assert_eq!(s, 4);
            }
        }
    }
}

#[test]
fn oracle_export_lists_ten_triples() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "--users", "2", "--reps", "2", "--out", "ds"]);
    ok(t.path(), &["--out-dir", "o", "oracle-export", "--dataset", "ds", "--pairs", "10"]);
    let idx: serde_json::Value =
        serde_json::from_slice(&fs::read(t.path().join("o/oracle/index.json")).unwrap()).unwrap();
    let pairs = idx["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 10);
    for p in pairs {
        for key in ["prev", "curr", "ours"] {
            assert!(t.path().join("o/oracle").join(p[key].as_str().unwrap()).is_file());
        }
    }
    assert_eq!(idx["flow"]["poly_n"], 5);
}
