use std::path::Path;
use std::process::{Command, Output};

use knnvis_cli::manifest::sha256_file;
use knnvis_cli::RunManifest;

fn knnvis(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knnvis"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn gen(dir: &Path, n: &str) {
    ok(&knnvis(
        &[
            "gen",
            "--n",
            n,
            "--d",
            "20",
            "--clusters",
            "3",
            "--seed",
            "5",
            "--output",
            "v.txt",
        ],
        dir,
    ));
}

const FAST: [&str; 4] = ["--samples-per-node", "200", "--workers", "1"];

#[test]
fn input_and_output_alone_are_enough() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "300");
    ok(&knnvis(
        &["run", "--input", "v.txt", "--output", "e.txt"],
        dir.path(),
    ));
    let text = std::fs::read_to_string(dir.path().join("e.txt")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("300 2"));
    let first: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first.len(), 3);
    assert!(first[1].split('.').nth(1).is_some_and(|d| d.len() == 6));
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn full_run_writes_every_output_and_a_verifiable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "500");
    let mut args = vec![
        "run",
        "--input",
        "v.txt",
        "--output",
        "e.txt",
        "--labels",
        "v.txt.labels",
        "--svg",
        "plot.svg",
        "--exact-recall",
        "--metrics-out",
        "m.json",
        "--k",
        "10",
        "--trees",
        "4",
        "--iters",
        "2",
        "--perplexity",
        "4",
        "--negatives",
        "3",
        "--gamma",
        "5",
        "--rate",
        "0.5",
        "--link",
        "sigmoid",
        "--seed",
        "3",
    ];
    args.extend(FAST);
    ok(&knnvis(&args, dir.path()));

    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(
        doc.descendants()
            .filter(|n| n.has_tag_name("circle"))
            .count(),
        500
    );

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(metrics["n"], 500);
    assert_eq!(metrics["k"], 10);
    assert!(metrics["mean_recall"].as_f64().unwrap() > 0.5);
    assert!(metrics["knn_accuracy"].as_f64().unwrap() > 0.5);

    let first_label = std::fs::read_to_string(dir.path().join("v.txt.labels")).unwrap();
    let embedding = std::fs::read_to_string(dir.path().join("e.txt")).unwrap();
    assert_eq!(
        embedding.lines().nth(1).unwrap().split(' ').next(),
        first_label.lines().next()
    );

    let manifest_text = std::fs::read_to_string(dir.path().join("e.txt.manifest.json")).unwrap();
    let m = RunManifest::from_json(&manifest_text).unwrap();
    assert_eq!(m.config.k, 10);
    assert_eq!(m.config.trees, 4);
    assert_eq!(m.config.samples_per_node, 200);
    for d in m.inputs.values() {
        let (hex, bytes) = sha256_file(&dir.path().join(&d.path)).unwrap();
        assert_eq!((hex, bytes), (d.sha256.clone(), d.bytes));
    }
    assert_eq!(m.inputs.len(), 2);
    assert_eq!(m.outputs.len(), 3);
    for stage in ["graph", "weighting", "layout", "eval"] {
        assert!(m.timings_ms.contains_key(stage), "{stage}");
    }
}

#[test]
fn replay_reproduces_a_single_worker_run() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "400");
    let mut args = vec![
        "run", "--input", "v.txt", "--output", "e.txt", "--seed", "11",
    ];
    args.extend(FAST);
    ok(&knnvis(&args, dir.path()));
    ok(&knnvis(
        &[
            "replay",
            "--manifest",
            "e.txt.manifest.json",
            "--output",
            "again.txt",
        ],
        dir.path(),
    ));
    assert_eq!(
        std::fs::read(dir.path().join("e.txt")).unwrap(),
        std::fs::read(dir.path().join("again.txt")).unwrap()
    );

    std::fs::write(dir.path().join("v.txt"), "2 1\n0\n1\n").unwrap();
    let out = knnvis(
        &[
            "replay",
            "--manifest",
            "e.txt.manifest.json",
            "--output",
            "x.txt",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed"));
}

#[test]
fn three_dimensional_layout() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "200");
    let mut args = vec!["run", "--input", "v.txt", "--output", "e.txt", "--dim", "3"];
    args.extend(FAST);
    ok(&knnvis(&args, dir.path()));
    let text = std::fs::read_to_string(dir.path().join("e.txt")).unwrap();
    assert_eq!(text.lines().next(), Some("200 3"));
    assert!(text.lines().skip(1).all(|l| l.split(' ').count() == 4));
}

#[test]
fn failures_exit_nonzero_with_a_located_message() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("short.txt"), "3 2\n0 0\n1 1\n").unwrap();
    let out = knnvis(
        &["run", "--input", "short.txt", "--output", "e.txt"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("short.txt:4:"));
    assert!(!dir.path().join("e.txt").exists());

    gen(dir.path(), "100");
    let cases: [&[&str]; 5] = [
        &["run", "--input", "missing.txt", "--output", "e.txt"],
        &[
            "run", "--input", "v.txt", "--output", "e.txt", "--dim", "3", "--svg", "p.svg",
        ],
        &[
            "run",
            "--input",
            "v.txt",
            "--output",
            "e.txt",
            "--metrics-out",
            "m.json",
        ],
        &[
            "run", "--input", "v.txt", "--output", "e.txt", "--link", "cauchy",
        ],
        &[
            "run", "--input", "v.txt", "--output", "e.txt", "--trees", "0",
        ],
    ];
    for args in cases {
        let out = knnvis(args, dir.path());
        assert!(!out.status.success(), "{args:?} succeeded");
    }
    let out = knnvis(
        &[
            "run",
            "--input",
            "v.txt",
            "--output",
            "no/such/dir/e.txt",
            "--samples-per-node",
            "10",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let out = knnvis(
        &[
            "run", "--input", "v.txt", "--output", "e.txt", "--trees", "0",
        ],
        dir.path(),
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph:"));
}
