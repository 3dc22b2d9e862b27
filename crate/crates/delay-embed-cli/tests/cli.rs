use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use delay_embed::delay_solver::{DelayModel, DelayModelJson};
use delay_embed::signals::read_csv;
use delay_embed_cli::config::ExperimentConfig;
use delay_embed_cli::presets::{preset, PRESETS};
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delay-embed")).args(args).output().expect("spawn binary")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn zero_csv(dir: &Path, n: usize) -> PathBuf {
    let mut s = String::from("t,x1,x2\n");
    for k in 0..n {
        s.push_str(&format!("{k},0,0\n"));
    }
    let p = dir.join("zero.csv");
    fs::write(&p, s).unwrap();
    p
}

fn hodmd_config(dir: &Path, csv: &Path, r: &str, l: &str) -> PathBuf {
    let text = format!(
        "experiment = \"t\"\n[signal]\nkind = \"csv\"\npath = {:?}\n[hodmd]\nr = {r}\nL = {l}\n",
        csv.display().to_string()
    );
    let p = dir.join("hodmd.toml");
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn empty_csv_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("empty.csv");
    fs::write(&p, "t,x1\n").unwrap();
    let out = dir.path().join("out");
    let o = bin(&["spectrum", "--input", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn empty_sweep_list_is_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = zero_csv(dir.path(), 20);
    let cfg = hodmd_config(dir.path(), &csv, "[]", "[1]");
    let o = bin(&["hodmd", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hodmd.r"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_is_rejected() {
    let o = bin(&["--preset", "no-such-preset", "fit"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));
}

#[test]
fn too_many_delays_for_hodmd() {
    let dir = TempDir::new().unwrap();
    let csv = zero_csv(dir.path(), 20);
    let cfg = hodmd_config(dir.path(), &csv, "[1]", "[19]");
    let o = bin(&["hodmd", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("M-2"), "{}", stderr(&o));
}

#[test]
fn zero_signal_hodmd_is_numerical() {
    let dir = TempDir::new().unwrap();
    let csv = zero_csv(dir.path(), 20);
    let cfg = hodmd_config(dir.path(), &csv, "[1]", "[1]");
    let o = bin(&["hodmd", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(bin(&["fit", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for cmd in ["fit", "spectrum", "cond"] {
        let preset = if cmd == "cond" { "fig-result-5" } else { "fig-result-1" };
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        for d in [&a, &b] {
            let o = bin(&["--preset", preset, cmd, "--out", d.to_str().unwrap()]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
        let (fa, fb) = (files(&a), files(&b));
        assert!(fa.len() > 1);
        assert_eq!(fa, fb, "{cmd} outputs differ between runs");
    }
}

#[test]
fn outputs_round_trip() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fit");
    let o = bin(&["--preset", "fig-result-1", "fit", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let js: DelayModelJson = serde_json::from_str(&fs::read_to_string(out.join("model_L9.json")).unwrap()).unwrap();
    let model = DelayModel::try_from(js.clone()).unwrap();
    assert_eq!(model.l(), 9);
    assert_eq!(serde_json::to_string(&model.to_json()).unwrap(), serde_json::to_string(&js).unwrap());

    let pred = read_csv(&out.join("prediction_L9.csv")).unwrap();
    assert_eq!(pred.len(), 200);

    // A saved model predicts the same series through `predict`.
    let gen = dir.path().join("gen");
    assert!(bin(&["--preset", "fig-result-1", "gen", "--out", gen.to_str().unwrap()]).status.success());
    let signal = gen.join("signal.csv");
    let p = dir.path().join("predict");
    let o = bin(&[
        "predict",
        "--model",
        out.join("model_L9.json").to_str().unwrap(),
        "--input",
        signal.to_str().unwrap(),
        "--out",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["nmse"].as_f64().unwrap() < 1e-6);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(listed.contains(&"model_L9.json") && listed.contains(&"config.toml"));
    let cfg = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(manifest["config_sha256"], delay_embed_cli::config_hash(&cfg));
}

#[test]
fn presets_round_trip_through_toml() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        assert_eq!(&ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), &cfg, "{name}");
        let file = ExperimentConfig::load(&dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(file, cfg, "presets/{name}.toml is stale");
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let mut text = preset("fig-result-1").unwrap().to_toml();
    text.push_str("\n[extra]\nx = 1\n");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

#[test]
fn schema_covers_config_sections() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for name in PRESETS {
        let cfg: toml::Table = toml::from_str(&preset(name).unwrap().to_toml()).unwrap();
        for key in cfg.keys() {
            assert!(props.contains_key(key), "schema lacks top-level key {key}");
        }
    }
    let kinds = schema["$defs"]["signal"]["oneOf"].as_array().unwrap();
    assert_eq!(kinds.len(), 5);
}
