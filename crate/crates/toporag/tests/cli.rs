//! End-to-end tests of the `toporag` binary: artifact flow, exit codes,
//! determinism, and the quality ordering the bundled fixture is built for.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use toporag::evaluation::EvalReport;
use toporag::fixture::write_mini_dataset;

fn run_in<I, S>(dir: &Path, args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_toporag"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn expect_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn expect_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Run the whole pipeline against the bundled mini dataset into `out`.
fn run_pipeline(work: &Path, out: &str, seed: &str) {
    let (nodes, edges) = write_mini_dataset(work).unwrap();
    let nodes = nodes.to_str().unwrap().to_owned();
    let edges = edges.to_str().unwrap().to_owned();
    let base = ["--out", out, "--seed", seed];
    let with = |extra: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        v.extend(base.iter().map(|s| s.to_string()));
        v
    };
    expect_ok(&run_in(
        work,
        &with(&[
            "ingest",
            "--nodes",
            &nodes,
            "--edges",
            &edges,
            "--fraction",
            "0.2",
            "--starting-words",
            "10",
        ]),
    ));
    expect_ok(&run_in(work, &with(&["embed", "--kind", "topo-proximity"])));
    expect_ok(&run_in(work, &with(&["embed", "--kind", "topo-role"])));
    expect_ok(&run_in(
        work,
        &with(&["embed", "--kind", "text", "--dimension", "64"]),
    ));
    expect_ok(&run_in(work, &with(&["index", "--k", "8"])));
    expect_ok(&run_in(
        work,
        &with(&["correlate", "--pairs", "unordered", "--layer-sweep", "3"]),
    ));
    for strategy in ["none", "random", "text", "topo"] {
        expect_ok(&run_in(
            work,
            &with(&["generate", "--strategy", strategy, "--k", "2"]),
        ));
    }
    expect_ok(&run_in(work, &with(&["evaluate", "--dimension", "64"])));
    expect_ok(&run_in(
        work,
        &with(&[
            "impute",
            "--plan-key",
            "topo:k=2:offset=0",
            "--epochs",
            "200",
        ]),
    ));
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_str().unwrap().to_owned();
            (name, fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn full_pipeline_produces_identical_artifacts_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(tmp.path(), "a", "7");
    run_pipeline(tmp.path(), "b", "7");

    let a = artifact_bytes(&tmp.path().join("a"));
    let b = artifact_bytes(&tmp.path().join("b"));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "graph.nodes.jsonl",
        "graph.edges.tsv",
        "reindex.jsonl",
        "split.json",
        "pruned.edges.tsv",
        "proximity.emb",
        "proximity.emb.json",
        "role.emb",
        "role.emb.json",
        "text.emb",
        "text.emb.json",
        "index.jsonl",
        "correlate.json",
        "records.jsonl",
        "eval.json",
        "eval.csv",
        "impute.json",
    ] {
        assert!(names.contains(&expected), "missing artifact {expected}");
    }
    assert_eq!(a.len(), b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between identical runs");
    }
}

#[test]
fn topo_strategy_beats_no_retrieval_on_the_mini_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(tmp.path(), "out", "7");

    let report = EvalReport::read_json(&tmp.path().join("out/eval.json")).unwrap();
    let mean_bleu = |prefix: &str| {
        report
            .summaries
            .iter()
            .find(|s| s.strategy.starts_with(prefix))
            .unwrap_or_else(|| panic!("no {prefix} summary"))
            .mean_bleu4
    };
    let topo = mean_bleu("topo:");
    let none = mean_bleu("none");
    assert!(
        topo > none,
        "expected topo retrieval to beat no retrieval, got {topo} vs {none}"
    );

    // the fixture's generated text carries community vocabulary, so imputed
    // features should separate the labels far better than zero imputation
    let impute: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/impute.json")).unwrap())
            .unwrap();
    let accuracy = |name: &str| {
        impute["strategies"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["name"] == name)
            .unwrap()["accuracy_mean"]
            .as_f64()
            .unwrap()
    };
    assert!(
        accuracy("toporag_text") > accuracy("zero"),
        "text imputation {} should beat zero imputation {}",
        accuracy("toporag_text"),
        accuracy("zero")
    );
}

#[test]
fn bad_edge_line_exits_2_and_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, _) = write_mini_dataset(tmp.path()).unwrap();
    let bad_edges = tmp.path().join("bad.tsv");
    fs::write(&bad_edges, "0\t1\n0\tpotato\n").unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "ingest",
            "--nodes",
            nodes.to_str().unwrap(),
            "--edges",
            bad_edges.to_str().unwrap(),
            "--out",
            "o",
        ],
    );
    expect_code(&out, 2);
    let err = stderr_of(&out);
    assert!(err.contains(":2"), "stderr should name line 2: {err}");
    assert!(err.contains("potato"), "stderr should quote the bad id: {err}");
}

#[test]
fn stale_index_fingerprint_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, edges) = write_mini_dataset(tmp.path()).unwrap();
    let ingest = |seed: &str| {
        run_in(
            tmp.path(),
            &[
                "ingest",
                "--nodes",
                nodes.to_str().unwrap(),
                "--edges",
                edges.to_str().unwrap(),
                "--starting-words",
                "10",
                "--out",
                "o",
                "--seed",
                seed,
            ],
        )
    };
    expect_ok(&ingest("1"));
    expect_ok(&run_in(
        tmp.path(),
        &["embed", "--kind", "topo-proximity", "--out", "o", "--seed", "1"],
    ));
    expect_ok(&run_in(tmp.path(), &["index", "--out", "o", "--seed", "1"]));
    // a different global seed changes the projection, so the embedding file
    // no longer matches what the index was built from
    expect_ok(&run_in(
        tmp.path(),
        &["embed", "--kind", "topo-proximity", "--out", "o", "--seed", "2"],
    ));
    let out = run_in(
        tmp.path(),
        &["generate", "--strategy", "topo", "--out", "o", "--seed", "1"],
    );
    expect_code(&out, 2);
    assert!(
        stderr_of(&out).contains("fingerprint mismatch"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn eigensolver_cap_exits_2_with_explanation() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, edges) = write_mini_dataset(tmp.path()).unwrap();
    expect_ok(&run_in(
        tmp.path(),
        &[
            "ingest",
            "--nodes",
            nodes.to_str().unwrap(),
            "--edges",
            edges.to_str().unwrap(),
            "--starting-words",
            "10",
            "--out",
            "o",
        ],
    ));
    let out = run_in(
        tmp.path(),
        &[
            "embed",
            "--kind",
            "topo-role",
            "--eigensolver-cap",
            "10",
            "--out",
            "o",
        ],
    );
    expect_code(&out, 2);
    let err = stderr_of(&out);
    assert!(err.contains("eigensolver cap"), "stderr: {err}");
}

#[test]
fn missing_artifacts_point_at_the_producing_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["generate", "--out", "empty"]);
    expect_code(&out, 2);
    assert!(stderr_of(&out).contains("toporag ingest"), "{}", stderr_of(&out));

    let out = run_in(tmp.path(), &["evaluate", "--out", "empty"]);
    expect_code(&out, 2);
    assert!(stderr_of(&out).contains("toporag generate"), "{}", stderr_of(&out));
}

#[test]
fn missing_input_file_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, _) = write_mini_dataset(tmp.path()).unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "ingest",
            "--nodes",
            nodes.to_str().unwrap(),
            "--edges",
            "nowhere.tsv",
            "--out",
            "o",
        ],
    );
    expect_code(&out, 3);
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, edges) = write_mini_dataset(tmp.path()).unwrap();
    let config = tmp.path().join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{
                "out": "from-config",
                "seed": 11,
                "dataset": {{"nodes": {:?}, "edges": {:?}}},
                "split": {{"fraction": 0.3, "starting_words": 10}}
            }}"#,
            nodes.to_str().unwrap(),
            edges.to_str().unwrap()
        ),
    )
    .unwrap();
    expect_ok(&run_in(
        tmp.path(),
        &["ingest", "--config", config.to_str().unwrap()],
    ));
    let split: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("from-config/split.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(split["fraction"], 0.3);

    // flag beats config for the same field, into a different directory
    expect_ok(&run_in(
        tmp.path(),
        &[
            "ingest",
            "--config",
            config.to_str().unwrap(),
            "--fraction",
            "0.5",
            "--out",
            "flag-wins",
        ],
    ));
    let split: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("flag-wins/split.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(split["fraction"], 0.5);

    let out = run_in(tmp.path(), &["ingest", "--config", "no-such.json"]);
    expect_code(&out, 2);
}

#[test]
fn starting_words_grid_writes_one_store_per_width() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, edges) = write_mini_dataset(tmp.path()).unwrap();
    expect_ok(&run_in(
        tmp.path(),
        &[
            "ingest",
            "--nodes",
            nodes.to_str().unwrap(),
            "--edges",
            edges.to_str().unwrap(),
            "--starting-words",
            "10",
            "--out",
            "o",
        ],
    ));
    expect_ok(&run_in(
        tmp.path(),
        &[
            "generate",
            "--strategy",
            "random",
            "--starting-words-grid",
            "5,10,15",
            "--out",
            "o",
        ],
    ));
    for w in [5, 10, 15] {
        let path = tmp.path().join(format!("o/records.sw{w}.jsonl"));
        assert!(path.exists(), "missing {}", path.display());
    }
    assert!(
        !tmp.path().join("o/records.jsonl").exists(),
        "grid mode should not write the default store"
    );
    // each store can be scored independently
    expect_ok(&run_in(
        tmp.path(),
        &[
            "evaluate",
            "--records",
            "o/records.sw15.jsonl",
            "--out",
            "o",
        ],
    ));
}

#[test]
fn help_and_version_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    expect_ok(&run_in(tmp.path(), &["--help"]));
    expect_ok(&run_in(tmp.path(), &["--version"]));
    let out = run_in(tmp.path(), &["no-such-command"]);
    expect_code(&out, 2);
}
