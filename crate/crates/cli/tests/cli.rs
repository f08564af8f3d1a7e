use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixlimit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn mixlimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixlimit")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

const CONSTANT: &str = r#"
experiment = "plain_dlt"
seed = 5

[system]
kind = "torus_automorphism"
matrix = [[2, 1], [1, 1]]

[observable]
kind = "constant"
value = 1.5

[scheme]
averaging = "mean"
normalizing = "linear"
law = "dirac"

[run]
n = [10, 100]
n_samples = 200
"#;

#[test]
fn unknown_keys_exit_with_config_error() {
    let dir = scratch("unknown");
    let path = write_config(&dir, "bad", &CONSTANT.replace("value = 1.5", "value = 1.5\nscale = 2"));
    let out = mixlimit(&["run", &path, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scale"));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = mixlimit(&["run", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_observable_has_zero_deviation() {
    let dir = scratch("constant");
    let path = write_config(&dir, "constant", CONSTANT);
    let out = mixlimit(&["run", &path, "--out", dir.to_str().unwrap(), "--seed", "77"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = report(&dir, "constant");
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["seed"], 77);
    assert_eq!(doc["config"]["seed"], 77);
    assert_eq!(doc["config"]["observable"]["value"], 1.5);
    assert_eq!(doc["version"], mixlimit::VERSION);
    for r in doc["results"]["ks"].as_array().unwrap() {
        assert_eq!(r["deviation"], 0.0);
        assert_eq!(r["seed"], 77);
    }
}

#[test]
fn samples_are_dumped_with_the_right_header() {
    let dir = scratch("dump");
    let out = mixlimit(&["run", "preset/c02_dirac_dlt", "--out", dir.to_str().unwrap(), "--dump-samples"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("c02_dirac_dlt.samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sample_index,sigma"));
    assert_eq!(lines.count(), 10_000);

    let path = write_config(&dir, "constant", CONSTANT);
    mixlimit(&["run", &path, "--out", dir.to_str().unwrap(), "--dump-samples"]);
    let csv = std::fs::read_to_string(dir.join("constant.samples.csv")).unwrap();
    assert!(csv.starts_with("sample_index,S_N\n0,0.0\n"));
}

#[test]
fn identity_companion_contracts_trivially() {
    let dir = scratch("identity");
    let text = CONSTANT.replace("[observable]", "[companion]\nkind = \"identity\"\n\n[observable]");
    let path = write_config(&dir, "identity", &text);
    let out = mixlimit(&["check", &path, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report(&dir, "identity.check");
    let section = &doc["results"]["sections"][0];
    assert_eq!(section["hypothesis"], "contracting_pair");
    assert_eq!(section["status"], "pass");
    assert_eq!(section["summary"]["identically_zero"], true);
}

#[test]
fn isometric_companion_does_not_contract() {
    let dir = scratch("isometry");
    let text = r#"
experiment = "hypothesis_check"
seed = 9

[system]
kind = "torus_translation"
vector = [0.41421356237309503, 0.7320508075688772]

[companion]
kind = "torus_translation"
vector = [0.1, 0.0]
"#;
    let path = write_config(&dir, "isometry", text);
    let out = mixlimit(&["check", &path, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let doc = report(&dir, "isometry.check");
    let section = &doc["results"]["sections"][0];
    assert_eq!(section["status"], "fail");
    assert_eq!(section["summary"]["first_distance"], section["summary"]["last_distance"]);
}

#[test]
fn non_decaying_correlations_are_a_diagnostic_failure() {
    let dir = scratch("green-kubo");
    let text = r#"
experiment = "plain_dlt"
seed = 10

[system]
kind = "torus_translation"
vector = [0.41421356237309503, 0.7320508075688772]

[observable]
kind = "coordinate_cosine"
frequency = [1, 0]

[scheme]
averaging = "mean"
normalizing = "sqrt"
law = "gaussian"
variance = "green_kubo"

[run]
n = [100]
n_samples = 200
"#;
    let path = write_config(&dir, "translation", text);
    let out = mixlimit(&["run", &path, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Green-Kubo"));
}

#[test]
fn presets_are_listed() {
    let out = mixlimit(&["presets"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "preset/bernoulli_clt"));
    assert_eq!(text.lines().count(), mixlimit_cli::presets::PRESETS.len());
}
