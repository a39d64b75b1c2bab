use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn passage(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passage")).arg("--out").arg(out).args(args).output().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<(f64, f64)> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[i])
        })
        .collect()
}

fn preset_json(name: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let o = passage(dir.path(), &["run", name]);
    assert!(o.status.code().unwrap() <= 1);
    let prov: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(name).join("provenance.json")).unwrap()).unwrap();
    prov["config"].clone()
}

#[test]
fn run_writes_bundle_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = passage(dir.path(), &["run", "fig5", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let run = dir.path().join("fig5-lambda1");
    for f in ["timeseries.csv", "provenance.json", "checkpoints.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(run.join("timeseries.csv")).unwrap();
    let f = column(&csv, "F_0_5");
    let at = f.iter().find(|(t, _)| (t - 0.1).abs() < 1e-12).unwrap().1;
    assert!((at - 0.601).abs() < 0.02, "{at}");
    for c in ["S21_re", "S12_im", "Re_E_plus", "J", "Delta"] {
        assert_eq!(column(&csv, c).len(), f.len());
    }
}

#[test]
fn output_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_passage")).env("PASSAGE_OUT_DIR", dir.path()).args(["run", "fig3b"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("fig3b/timeseries.csv").is_file());
}

#[test]
fn runs_are_deterministic_and_replay_from_provenance() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    passage(a.path(), &["run", "fig3a"]);
    passage(b.path(), &["run", "fig3a"]);
    let first = std::fs::read(a.path().join("fig3a/timeseries.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.path().join("fig3a/timeseries.csv")).unwrap());
    let c = tempfile::tempdir().unwrap();
    let prov = a.path().join("fig3a/provenance.json");
    passage(c.path(), &["run", prov.to_str().unwrap()]);
    assert_eq!(first, std::fs::read(c.path().join("fig3a/timeseries.csv")).unwrap());
}

#[test]
fn reversed_dissipative_sign_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let ok = passage(dir.path(), &["verify", "fig3b"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = passage(dir.path(), &["--gamma-sign", "reversed", "verify", "fig3b"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("final F_0_5")), "{text}");
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset_json("fig3b");
    cfg["space"]["cutofs"] = cfg["space"]["cutoffs"].take();
    cfg["space"].as_object_mut().unwrap().remove("cutoffs");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let o = passage(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("space"));
    assert_eq!(passage(dir.path(), &["run", "no-such-preset"]).status.code(), Some(2));
    assert_eq!(passage(dir.path(), &["sweep", "--param", "mass", "--values", "1"]).status.code(), Some(2));
}

#[test]
fn singular_pulses_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset_json("fig3b");
    cfg["schedule"] = serde_json::json!({
        "form": "explicit",
        "tau": 1.0,
        "theta": {"kind": "linear", "start": 0.0, "end": std::f64::consts::FRAC_PI_2, "tau": 1.0},
        "alpha": {"kind": "constant", "value": 0.0},
        "phi": 0.0, "phi_a": 0.0,
        "gamma_a": 0.1, "gamma_b": 0.1, "Gamma": 0.0, "Theta": 0.0
    });
    let path = dir.path().join("singular.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let o = passage(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lambda_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = passage(dir.path(), &["sweep", "--param", "lambda", "--values", "0,0.5,1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("sweep-lambda/sweep.csv")).unwrap();
    let nr = column(&csv, "nonreciprocity");
    assert_eq!(nr.len(), 3);
    assert!(nr[0].1.abs() < 1e-12);
    assert!(nr[1].1 < nr[2].1);
    assert!(dir.path().join("sweep-lambda/lambda-0.5/timeseries.csv").is_file());
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = passage(dir.path(), &["presets"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for p in ["fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig4c", "fig4d", "fig5", "lindblad-check"] {
        assert!(text.lines().any(|l| l.starts_with(p)), "{p}");
    }
}
