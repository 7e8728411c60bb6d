use std::path::Path;
use std::process::Command;

use kreinscat_cli::{run, CliError, RunConfig};
use serde_json::Value;

fn config(text: &str, out: &Path) -> RunConfig {
    RunConfig::parse(text).unwrap().with("output.dir", &out.display().to_string()).unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn config_key(err: CliError) -> String {
    match err {
        CliError::Solver(kreinscat::Error::Config { path, .. }) => path,
        e => panic!("expected a configuration error, got {e}"),
    }
}

#[test]
fn abstract_check_with_fixed_seed_is_tight() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("mode = abstract-check\nnumerics.seed = 7\n", dir.path());
    let report = run(&cfg).unwrap();
    assert!(report.passed);
    let s = summary(dir.path());
    assert_eq!(s["results"]["systems"], 100);
    let max = s["results"]["max_residual"].as_f64().unwrap();
    assert!(max <= 1e-9, "max residual {max}");
    assert!(dir.path().join("residuals.csv").exists());
}

#[test]
fn empty_config_runs_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config("", dir.path())).unwrap();
    assert!(report.passed);
    assert_eq!(summary(dir.path())["mode"], "abstract-check");
}

#[test]
fn abstract_check_summary_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = "numerics.seed = 11\nabstract.count = 20\n";
    for d in [&a, &b] {
        let cfg = RunConfig::parse(text).unwrap().with("output.dir", &d.path().join("run").display().to_string()).unwrap();
        run(&cfg).unwrap();
    }
    let mut sa = summary(&a.path().join("run"));
    let mut sb = summary(&b.path().join("run"));
    sa["config"]["output.dir"] = Value::Null;
    sb["config"]["output.dir"] = Value::Null;
    assert_eq!(sa, sb);
    let ra = std::fs::read(a.path().join("run/residuals.csv")).unwrap();
    let rb = std::fs::read(b.path().join("run/residuals.csv")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn dirichlet_sphere_smatrix_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = smatrix\nmodel.kind = dirichlet\ngeometry.level = 2\nenergy.lambda = -1\ndirections.n_polar = 6\n";
    let cfg = config(text, dir.path());
    let first = run(&cfg).unwrap();
    assert!(first.passed);
    let s = summary(dir.path());
    let e = &s["results"]["energies"][0];
    assert!((e["k"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    let u = e["unitarity_defect"].as_f64().unwrap();
    assert!(u <= 0.05, "unitarity defect {u}");
    let shifts = e["phase_shifts"].as_array().expect("sphere is rotationally invariant");
    assert!(!shifts.is_empty());

    let matrix = std::fs::read_to_string(dir.path().join("smatrix.csv")).unwrap();
    let n = e["directions"].as_u64().unwrap() as usize;
    assert_eq!(matrix.lines().next().unwrap(), "i,j,re,im");
    assert_eq!(matrix.lines().count(), 1 + n * n);

    let before = std::fs::read(dir.path().join("summary.json")).unwrap();
    run(&cfg).unwrap();
    let after = std::fs::read(dir.path().join("summary.json")).unwrap();
    assert_eq!(before, after, "summary.json differs between identical runs");
}

#[test]
fn multiple_energies_get_indexed_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = cross-section\nmodel.kind = delta\nmodel.strength = 0.5\ngeometry.level = 1\nenergy.lambda = -0.25, -1\ndirections.n_polar = 4\n";
    run(&config(text, dir.path())).unwrap();
    for name in ["smatrix_0.csv", "smatrix_1.csv", "cross_section_0.csv", "cross_section_1.csv", "directions.csv"] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let s = summary(dir.path());
    assert_eq!(s["results"]["energies"].as_array().unwrap().len(), 2);
    assert!(s["results"]["energies"][1]["sigma_total_optical"].as_f64().unwrap() > 0.0);
}

#[test]
fn convergence_rejects_bad_level_lists() {
    let dir = tempfile::tempdir().unwrap();
    for levels in ["1,2", "1,1,2", "2"] {
        let text = format!("mode = convergence\nmodel.kind = dirichlet\ngeometry.levels = {levels}\n");
        let err = run(&config(&text, dir.path())).unwrap_err();
        assert_eq!(config_key(err), "geometry.levels", "levels {levels}");
    }
}

#[test]
fn oracle_compare_needs_a_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = oracle-compare\ngeometry.shape = ellipsoid\ngeometry.semi_axes = 1,1,1.5\nmodel.kind = dirichlet\n";
    let err = run(&config(text, dir.path())).unwrap_err();
    assert_eq!(config_key(err), "geometry.shape");
}

#[test]
fn convergence_orders_on_dirichlet_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = convergence\nmodel.kind = dirichlet\ngeometry.levels = 0,1,2\ndirections.n_polar = 6\n";
    run(&config(text, dir.path())).unwrap();
    let s = summary(dir.path());
    let orders = &s["results"]["orders"];
    for key in ["jump0_sl", "jump0_dl"] {
        let p = orders[key].as_f64().unwrap();
        assert!(p >= 0.9, "{key} order {p}");
    }
    let p = orders["s_error"].as_f64().unwrap();
    assert!(p >= 1.0, "S_0 error order {p}");
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kreinscat"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    let status = binary().args(["--seed", "3", "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("summary.json").exists());
    assert!(out.join("timing.json").exists());

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "geometry.radius = 1\nbogus.key = 3\n").unwrap();
    let o = binary().arg("--config").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus.key"));

    let o = binary().args(["--mode", "nonsense"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let strict = dir.path().join("strict.cfg");
    std::fs::write(&strict, "abstract.count = 5\nabstract.tol = 0\n").unwrap();
    let o = binary().arg("--config").arg(&strict).arg("--out").arg(dir.path().join("strict")).output().unwrap();
    assert_eq!(o.status.code(), Some(4));

    let o = binary().arg("--schema").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("numerics.h_vol = 0.2"));
}
