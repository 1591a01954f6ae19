use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lacunary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lacunary")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("c.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const GAPS: &str = r#"
seed = 11
[sequence]
family = "geometric"
base = "1.5"
[experiment]
n_ladder = [128, 256]
samples_per_n = 6
"#;

#[test]
fn gaps_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAPS);
    let out = dir.path().join("d");
    let o = lacunary(&["gaps", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("gaps.csv").exists());
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rungs"].as_array().unwrap().len(), 2);
    assert_eq!(summary["manifest"]["seed"], 11);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["manifest"]["subcommand"], "gaps");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAPS);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = lacunary(&["gaps", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["gaps.csv", "summary.json", "gaps_plot.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = lacunary(&["bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &GAPS.replace("samples_per_n", "samples"));
    let o = lacunary(&["gaps", "--config", &cfg, "--out", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn count_ladder_appends_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[sequence]\nfamily = \"geometric\"\nbase = \"2\"\n[count]\nfamily = \"quadruple\"\nsizes = [4, 6, 8]\n",
    );
    let out = dir.path().join("d");
    let o = lacunary(&["count", "--ladder", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("counts.csv")).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("slope,"), "{last}");
    assert!(text.contains("quadruple,2,4,0.1,384,0"));
}

#[test]
fn verify_quick_reports_forced_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\neta_slack = -10.0\n");
    let out = dir.path().join("v");
    let o = lacunary(&["verify", "--quick", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    let failed: Vec<u64> = report["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert_eq!(failed, vec![5]);
}
