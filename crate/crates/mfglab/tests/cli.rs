//! Exit codes, messages and output files of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfglab::commands::{load_states, FIELD_FILES};
use mfglab::RunConfig;
use mfglab_core::grid::{read_field, read_vector_field};
use mfglab_core::{ScalarField, VectorField};

const UNIFORM: &str = "d = 1\nNx = 32\nNt = 32\nT = 1.0\nmodel = \"quadratic\"\ntol = 1e-9\npsi = 0.2\ntrajectories = 3\noutput = \"out\"\n";
const COSINE: &str = "d = 1\nNx = 32\nNt = 32\nT = 1.0\nmodel = \"quadratic\"\nr = 0.1\npsi = { c0 = 0.0, terms = [{ k = [1], a = 0.5, b = 0.0 }] }\noutput = \"out\"\n";

fn mfglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfglab")).args(args).output().expect("mfglab binary")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn uniform_solve_and_analyze_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), UNIFORM);
    let out = tmp.path().join("out");
    let solved = mfglab(&["solve", s(&cfg)]);
    assert_eq!(solved.status.code(), Some(0), "{}", stderr(&solved));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("solve_report.json")).unwrap()).unwrap();
    assert!(report["report"]["gap"].as_f64().unwrap() < 1e-5);
    assert_eq!(report["config"]["Nx"], 32);

    let analyzed = mfglab(&["analyze", s(&out), s(&cfg)]);
    assert_eq!(analyzed.status.code(), Some(0), "{}", stderr(&analyzed));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("analysis_report.json")).unwrap()).unwrap();
    assert!(rep["analysis"]["terminal"]["margin"].as_f64().unwrap().abs() < 1e-6);
    assert!((rep["analysis"]["d_series"]["mean"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    for (file, header) in [("translation.csv", "delta,M"), ("time_translation.csv", "eps,B"), ("d_series.csv", "t,D"), ("trajectories/traj_002.csv", "t,x1")] {
        let text = std::fs::read_to_string(out.join(file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header), "{file}");
        for l in lines {
            assert!(l.split(',').all(|x| x.parse::<f64>().is_ok()), "{file}: {l}");
        }
    }
}

#[test]
fn dumps_round_trip_through_the_loaders() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), UNIFORM);
    assert_eq!(mfglab(&["solve", s(&cfg_path)]).status.code(), Some(0));
    let out = tmp.path().join("out");
    for name in ["m.mfg", "u.mfg", "p.mfg"] {
        let bytes = std::fs::read(out.join(name)).unwrap();
        let f: ScalarField = read_field(&bytes[..]).unwrap();
        let mut again = Vec::new();
        mfglab_core::grid::write_field(&mut again, &f).unwrap();
        assert_eq!(again, bytes, "{name}");
        assert!(bytes.starts_with(b"MFGGRID 1 32 32 1.0 "));
    }
    let bytes = std::fs::read(out.join("w.mfg")).unwrap();
    let w: VectorField = read_vector_field(&bytes[..]).unwrap();
    assert_eq!(w.data().len(), 32 * 32);
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let (primal, dual) = load_states(&out, &cfg.problem().unwrap()).unwrap();
    assert_eq!(primal.m.slices(), 33);
    assert_eq!(dual.p.slices(), 32);
}

#[test]
fn config_errors_exit_one_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [(UNIFORM.replace("Nx = 32", "Nx = 2"), "Nx ≥ 4"), (format!("{UNIFORM}speed = 3\n"), "speed"), (UNIFORM.replace("psi = 0.2\n", ""), "psi")];
    for (text, key) in cases {
        let cfg = write_config(tmp.path(), &text);
        let o = mfglab(&["solve", s(&cfg)]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains(key), "{key}: {}", stderr(&o));
        assert!(!tmp.path().join("out").exists(), "nothing is computed before validation");
    }
    let missing = mfglab(&["solve", s(&tmp.path().join("absent.toml"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two_and_still_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{COSINE}max_iter = 1\ntol = 1e-12\n"));
    let o = mfglab(&["solve", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    for f in FIELD_FILES.iter().chain(&["solve_report.json"]) {
        assert!(tmp.path().join("out").join(f).is_file(), "{f}");
    }
}

#[test]
fn analyze_reports_bad_dumps_and_failing_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COSINE);
    let out = tmp.path().join("out");

    let o = mfglab(&["analyze", s(&out), s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing dump"), "{}", stderr(&o));

    assert_eq!(mfglab(&["solve", s(&cfg)]).status.code(), Some(0));
    // margin 0 on the dispersion of D cannot hold on a discrete run
    let strict = write_config(tmp.path(), &format!("{COSINE}[analysis]\ndispersion_max = 0.0\n"));
    let o = mfglab(&["analyze", s(&out), s(&strict)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("d_dispersion"), "{}", stderr(&o));

    let m = out.join("m.mfg");
    let bytes = std::fs::read(&m).unwrap();
    std::fs::write(&m, &bytes[..bytes.len() - 5]).unwrap();
    let o = mfglab(&["analyze", s(&out), s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("malformed field file"), "{}", stderr(&o));

    let other = write_config(tmp.path(), &COSINE.replace("Nx = 32", "Nx = 40"));
    std::fs::write(&m, &bytes).unwrap();
    let o = mfglab(&["analyze", s(&out), s(&other)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not match"), "{}", stderr(&o));
}

#[test]
fn check_models_prints_constants() {
    let o = mfglab(&["check-models", "--model", "quadratic", "--samples", "2000", "--prox-samples", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("quadratic: PASS (c = 0.5,"), "{text}");

    let verdicts: Vec<_> = ["1", "99"]
        .iter()
        .map(|seed| {
            let o = mfglab(&["check-models", "--model", "entropy", "--model", "power:1.5", "--seed", seed, "--samples", "2000", "--prox-samples", "50"]);
            let text = String::from_utf8_lossy(&o.stdout).into_owned();
            assert!(text.contains("c0 = 0."), "{text}");
            (o.status.code(), text.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split(' ').take(2).collect::<Vec<_>>().join(" ")).collect::<Vec<_>>())
        })
        .collect();
    assert_eq!(verdicts[0], verdicts[1]);
    assert_eq!(verdicts[0].0, Some(0));

    let bad = mfglab(&["check-models", "--model", "power"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("requires key q"));
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_mfglab"))
        .args(["check-models", "--model", "quadratic", "--samples", "100", "--prox-samples", "10"])
        .env("MFGLAB_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MFGLAB_THREADS"));
}
