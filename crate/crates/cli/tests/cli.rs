use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const METHOD_ASK: &str = "Track how methods evolved in this cluster";
const EXPERIMENT_ASK: &str = "Compare benchmark results over time";

fn e2e() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e")
}

/// Run the binary from `cwd` so no stray `pulse.toml` is picked up.
fn pulsechain(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulsechain"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("spawn pulsechain")
}

fn ok(output: &Output) -> String {
    assert!(
        output.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        output.status,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_reports_split_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("parse_report.json");
    let manifest = e2e().join("corpus.json");
    let stdout = ok(&pulsechain(dir.path(), &["ingest", arg(&manifest), "--report", arg(&report)]));
    assert!(stdout.contains("documents: 5  citation edges: 6"), "{stdout}");
    assert!(stdout.contains("train clusters=1 documents=4 papers/cluster mean=4.00"), "{stdout}");
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(parsed.is_object());
}

#[test]
fn replayed_runs_reproduce_the_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let manifest = e2e().join("corpus.json");
    let transcript = e2e().join("transcript.jsonl");
    for (ask, file) in [(METHOD_ASK, "method_tracking/chain.md"), (EXPERIMENT_ASK, "experimental_analysis/echain.json")] {
        let stdout = ok(&pulsechain(
            dir.path(),
            &[
                "run", "--cluster", "c-vision", "--ask", ask,
                "--manifest", arg(&manifest),
                "--backend", "replay", "--transcript", arg(&transcript),
                "--out", arg(&out),
            ],
        ));
        assert!(stdout.contains("figure.svg"), "{stdout}");
        let golden = e2e().join("golden/c-vision");
        let dir_name = file.split('/').next().unwrap();
        for name in [file.rsplit('/').next().unwrap(), "figure.svg", "figure.pgm", "report.json"] {
            let path = format!("{dir_name}/{name}");
            assert_eq!(
                fs::read(out.join("c-vision").join(&path)).unwrap(),
                fs::read(golden.join(&path)).unwrap(),
                "{path} differs from golden"
            );
        }
    }
}

#[test]
fn ambiguous_ask_is_rejected_without_a_plan_reply() {
    let dir = tempfile::tempdir().unwrap();
    let output = pulsechain(
        dir.path(),
        &[
            "run", "--cluster", "c-vision", "--ask", "summarise this cluster",
            "--manifest", arg(&e2e().join("corpus.json")),
            "--backend", "replay", "--transcript", arg(&e2e().join("transcript.jsonl")),
            "--out", arg(&dir.path().join("out")),
        ],
    );
    assert!(!output.status.success());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_transcript_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = pulsechain(
        dir.path(),
        &[
            "run", "--cluster", "c-vision", "--ask", METHOD_ASK,
            "--manifest", arg(&e2e().join("corpus.json")),
            "--backend", "replay", "--transcript", arg(&dir.path().join("none.jsonl")),
        ],
    );
    assert!(!output.status.success());
}

#[test]
fn cluster_writes_a_loadable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clusters_out.json");
    let stdout = ok(&pulsechain(
        dir.path(),
        &[
            "cluster", "--manifest", arg(&e2e().join("corpus.json")),
            "--k", "2", "--seed", "0",
            "--backend", "replay", "--transcript", arg(&e2e().join("transcript.jsonl")),
            "--out", arg(&out),
        ],
    ));
    assert!(stdout.starts_with("k=2 seed=0 inertia="), "{stdout}");
    let first = fs::read_to_string(&out).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&first).unwrap();
    let docs: usize = manifest["clusters"].as_array().unwrap().iter().map(|c| c["docs"].as_array().unwrap().len()).sum();
    assert_eq!(docs, 5);

    ok(&pulsechain(
        dir.path(),
        &[
            "cluster", "--manifest", arg(&e2e().join("corpus.json")),
            "--k", "2", "--seed", "0",
            "--backend", "replay", "--transcript", arg(&e2e().join("transcript.jsonl")),
            "--out", arg(&out),
        ],
    ));
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn eval_scores_goldens_against_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let golden = e2e().join("golden");
    let report = dir.path().join("eval_report.json");
    let stdout = ok(&pulsechain(
        dir.path(),
        &["eval", "--golden", arg(&golden), "--actual", arg(&golden), "--out", arg(&report)],
    ));
    assert!(stdout.contains("0 missing"), "{stdout}");
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(parsed["pass_at_1"], 1.0);
    for pair in parsed["pairs"].as_array().unwrap() {
        if let Some(ssim) = pair["ssim"].as_f64() {
            assert_eq!(ssim, 1.0, "{pair}");
        }
    }
}
