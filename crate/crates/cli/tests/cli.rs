use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabinstruct")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "registry = {:?}\n\n[build]\nn_rows = 20\ntrain_instances_per_table = 500\neval_instances_per_table = 30\nseed = 4\n",
        fixture("two_table_registry.toml")
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn offline_flow_from_build_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d);
    let cfg = cfg.to_str().unwrap();
    let data = d.join("data");

    let summary: serde_json::Value = serde_json::from_str(&ok(&["build-dataset", "--config", cfg, "--out", data.to_str().unwrap()])).unwrap();
    assert_eq!(summary["train"], 1000);
    assert_eq!(lines(&data.join("train.jsonl")), 1000);
    assert_eq!(lines(&data.join("eval.jsonl")), 60);
    let manifest: serde_json::Value = serde_json::from_str(std::fs::read_to_string(data.join("manifest.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(manifest["command"], "build-dataset");
    assert_eq!(manifest["seeds"]["build"], 4);

    let gens = d.join("gen.jsonl");
    ok(&["generate", "--config", cfg, "--input", data.join("eval.jsonl").to_str().unwrap(), "--out", gens.to_str().unwrap(), "--mock", "resample-rows"]);
    assert_eq!(lines(&gens), 60);

    let parsed = d.join("parsed");
    ok(&["parse", "--config", cfg, "--generations", gens.to_str().unwrap(), "--out-dir", parsed.to_str().unwrap()]);
    assert_eq!(std::fs::read_dir(parsed.join("iris_like")).unwrap().count(), 30);

    let results = d.join("results");
    std::fs::create_dir_all(&results).unwrap();
    for id in ["iris_like", "mixed"] {
        let synth = parsed.join(id);
        let out = results.join(format!("{id}.json"));
        ok(&["eval-fidelity", "--config", cfg, "--dataset", id, "--synth-dir", synth.to_str().unwrap(), "--algorithm", "mock", "--out", out.to_str().unwrap()]);
        let e: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(e["shape"].as_f64().unwrap() > 90.0, "{e}");
    }
    let report = ok(&["report", "--config", cfg, "--in", results.to_str().unwrap()]);
    assert!(report.starts_with("## Fidelity\n\n| Dataset | mock Shape | mock Trends |\n"), "{report}");
    assert!(report.contains("| iris_like | ") && report.contains("| mixed | "));
    let latex = ok(&["report", "--in", results.to_str().unwrap(), "--format", "latex"]);
    assert!(latex.contains("iris\\_like & "), "{latex}");
}

#[test]
fn fidelity_of_a_table_against_itself() {
    let t = fixture("mixed.csv");
    let out = ok(&["eval-fidelity", "--real", t.to_str().unwrap(), "--synth", t.to_str().unwrap()]);
    let e: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(e["kind"], "fidelity");
    assert_eq!(e["shape"], 100.0);
    assert!((e["trend"].as_f64().unwrap() - 100.0).abs() < 1e-9);
}

#[test]
fn utility_reports_baseline() {
    let t = fixture("blobs.csv");
    let out = ok(&["eval-utility", "--real", t.to_str().unwrap(), "--synth", t.to_str().unwrap(), "--target", "label", "--task", "classification"]);
    let e: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(e["kind"], "utility");
    assert_eq!(e["metric"], "auc");
    assert!(e["baseline_real"].as_f64().unwrap() > 0.95);
}

#[test]
fn parse_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tabinstruct"))
        .args(["parse", "--schema-csv", fixture("iris_like.csv").to_str().unwrap(), "--rows", "5"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(std::fs::read(fixture("responses/salvage_2.txt")).unwrap().as_slice()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "salvaged");
    assert_eq!(v["rows_recovered"], 5);
}

fn error_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn exit_codes_and_json_errors() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"]["kind"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[build]\nnot_a_field = 1\n").unwrap();
    let out = run(&["build-dataset", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"]["exit_code"], 1);

    let missing = dir.path().join("missing.csv");
    let out = run(&["eval-fidelity", "--real", missing.to_str().unwrap(), "--synth", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"]["exit_code"], 2);

    assert!(run(&["--help"]).status.success());
}
