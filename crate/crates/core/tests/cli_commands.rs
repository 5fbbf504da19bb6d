use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechspde")).args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let o = run(&["simulate-field", "--preset", "fig7"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));

    let o = run(&["mc-study", "--preset", "table2", "--reps", "29"], &out);
    assert_eq!(o.status.code(), Some(2));

    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"version": 1, "specs": [], "lags": {"kind": "LogSpaced", "min": 0.1, "max": 1.0, "n": 5}}"#,
    )
    .unwrap();
    let o = run(&["covariance", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no specs"));

    std::fs::write(&cfg, r#"{"version": 1, "study": {}, "seed": 1}"#).unwrap();
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `theta`"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"version": 2, "specs": [], "lags": {"kind": "List", "values": [1.0]}}"#).unwrap();
    let o = run(&["covariance", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("version"));

    let o = run(&["covariance"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn custom_covariance_config_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{
  "version": 1,
  "specs": [
    {"name": "matern", "spec": {"family": {"kind": "DampedFractional", "alpha": 1.5}, "kappa": 1.0, "d": 1}},
    {"name": "expkernel", "spec": {"family": {"kind": "ConvolutionKernel", "dispersal": 1.0,
      "kernel": {"shape": "Exponential", "beta": 1.0}}, "kappa": 1.0, "d": 1}}
  ],
  "lags": {"kind": "List", "values": [0.5, 1.0, 2.0]}
}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["covariance", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("covariance_matern.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,family,value");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("5.0000000000000000e-1,matern,"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "covariance");
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["covariance_matern.csv", "covariance_expkernel.csv"]);
    let mut on_disk: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(on_disk, ["covariance_expkernel.csv", "covariance_matern.csv"]);
    assert!(m["metadata"]["expkernel"]["nugget"].as_f64().unwrap() > 0.0);
}

#[test]
fn small_field_config_writes_one_dimensional_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f.json");
    std::fs::write(
        &cfg,
        r#"{
  "version": 1,
  "grid": {"d": 1, "low": 0.0, "high": 1.0, "n": 16},
  "operator": {"kind": "Laplacian", "diffusivity": 0.01},
  "reaction": {"kind": "Linear", "kappa2": 0.5},
  "drift": {"kind": "None"},
  "sigma_noise": 0.1,
  "bc": "Periodic",
  "dt": null,
  "t_end": 1.0,
  "snapshot_times": [0.5, 1.0],
  "initial_value": 1.0,
  "seed": 3
}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["simulate-field", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..2 {
        let csv = std::fs::read_to_string(out.join(format!("snapshot_{k:03}.csv"))).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "x,t,value");
        assert_eq!(csv.lines().count(), 17);
    }
}
