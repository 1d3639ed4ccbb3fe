//! End-to-end checks of the command-line workflow: artifact generation,
//! experiment runs, rerun determinism, exit codes, sweeps and overhead
//! pairing, all through the installed binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vialab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vialab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// gen-corpus + gen-trends feed a file-based run; rerunning the identical
/// config yields byte-identical CSV tables.
#[test]
fn generate_run_rerun_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let corpus = root.join("corpus.json");
    let out = vialab(&[
        "gen-corpus",
        "--docs",
        "80",
        "--universe",
        "16",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert_success(&out, "gen-corpus");
    assert!(corpus.exists());

    let trends = root.join("trends.csv");
    let out = vialab(&[
        "gen-trends",
        "--windows",
        "6",
        "--universe",
        "16",
        "--mode",
        "zipf",
        "--s",
        "1.0",
        "--seed",
        "7",
        "--out",
        trends.to_str().unwrap(),
    ]);
    assert_success(&out, "gen-trends");
    let text = fs::read_to_string(&trends).unwrap();
    assert_eq!(text.lines().count(), 7, "header plus one row per window");
    assert_eq!(text.lines().next().unwrap().split(',').count(), 16);

    let config = root.join("config.json");
    write(
        &config,
        &format!(
            r#"{{
                "name": "cli-smoke",
                "corpus": {{"kind": "file", "path": {corpus:?}}},
                "trend": {{"mode": "csv", "path": {trends:?}}},
                "windows": {{"baseline": 2, "target": 4, "per_window": 60}},
                "attack": {{"kind": "bva"}},
                "trials": 2,
                "seed": 9
            }}"#,
            corpus = corpus.to_str().unwrap(),
            trends = trends.to_str().unwrap(),
        ),
    );

    let run_into = |name: &str| {
        let out_dir = root.join(name);
        let out = vialab(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_success(&out, "run");
        for file in ["results.csv", "aggregate.csv", "report.json"] {
            assert!(out_dir.join(file).exists(), "{name}/{file} missing");
        }
        out_dir
    };
    let first = run_into("first");
    let second = run_into("second");

    for file in ["results.csv", "aggregate.csv"] {
        assert_eq!(
            fs::read(first.join(file)).unwrap(),
            fs::read(second.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["attack"], "bva");
    assert_eq!(report["universe"], 16);
    assert_eq!(report["aggregate"]["completed"], 2);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let missing_fields = root.join("missing.json");
    write(&missing_fields, r#"{"name": "broken"}"#);
    let out = vialab(&[
        "run",
        "--config",
        missing_fields.to_str().unwrap(),
        "--out",
        root.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "parse error should exit 2");

    // Parses but is semantically inconsistent: the cluster attack without
    // a clustering defense to read through.
    let inconsistent = root.join("inconsistent.json");
    write(
        &inconsistent,
        r#"{
            "name": "no-clusters",
            "corpus": {"kind": "synth", "docs": 40, "universe": 8},
            "attack": {"kind": "shielddb_opt", "t_groups": 2},
            "seed": 1
        }"#,
    );
    let out = vialab(&[
        "run",
        "--config",
        inconsistent.to_str().unwrap(),
        "--out",
        root.join("out2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "validation error should exit 2");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("shielddb"),
        "stderr should name the inconsistency"
    );
}

/// A sweep with one healthy row and one row that fails at run time finishes
/// the healthy row, records the failure, and exits 3.
#[test]
fn sweep_partial_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let grid = root.join("grid.json");
    write(
        &grid,
        &format!(
            r#"{{
                "experiments": [
                    {{
                        "name": "healthy",
                        "corpus": {{"kind": "synth", "docs": 40, "universe": 8}},
                        "windows": {{"baseline": 1, "target": 2, "per_window": 30}},
                        "attack": {{"kind": "bva"}},
                        "trials": 1,
                        "seed": 3
                    }},
                    {{
                        "name": "broken-corpus",
                        "corpus": {{"kind": "file", "path": {missing:?}}},
                        "windows": {{"baseline": 1, "target": 2, "per_window": 30}},
                        "attack": {{"kind": "bva"}},
                        "trials": 1,
                        "seed": 3
                    }}
                ]
            }}"#,
            missing = root.join("nowhere.json").to_str().unwrap(),
        ),
    );

    let out_dir = root.join("sweep");
    let out = vialab(&[
        "sweep",
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "partial failure should exit 3");
    assert!(out_dir.join("results.csv").exists());
    assert!(out_dir.join("healthy").join("report.json").exists());
    let aggregate = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert!(aggregate.contains("healthy"));
    assert!(
        aggregate.contains("broken-corpus"),
        "failed row should appear in the aggregate table: {aggregate}"
    );
}

/// Report pairs a defended run with its undefended reference when corpus
/// fingerprint, seed, attack and universe all line up.
#[test]
fn report_pairs_defended_and_reference_runs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let corpus = root.join("corpus.json");
    let out = vialab(&[
        "gen-corpus",
        "--docs",
        "60",
        "--universe",
        "8",
        "--seed",
        "11",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert_success(&out, "gen-corpus");

    let runs = root.join("runs");
    for (name, defense) in [
        ("plain", "{}"),
        ("capped", r#"{"tc": {"threshold": 100000}}"#),
    ] {
        let config = root.join(format!("{name}.json"));
        write(
            &config,
            &format!(
                r#"{{
                    "name": "{name}",
                    "corpus": {{"kind": "file", "path": {corpus:?}}},
                    "windows": {{"baseline": 1, "target": 2, "per_window": 40}},
                    "attack": {{"kind": "bva"}},
                    "defense": {defense},
                    "trials": 1,
                    "seed": 13
                }}"#,
                corpus = corpus.to_str().unwrap(),
            ),
        );
        let out = vialab(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            runs.join(name).to_str().unwrap(),
        ]);
        assert_success(&out, name);
    }

    let out = vialab(&["report", "--dir", runs.to_str().unwrap()]);
    assert_success(&out, "report");
    let overheads = fs::read_to_string(runs.join("overheads.csv")).unwrap();
    let mut lines = overheads.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("defended"), "header: {header}");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1, "exactly one defended/reference pair: {rows:?}");
    assert!(rows[0].contains("capped"));
    assert!(runs.join("overheads.json").exists());
}
