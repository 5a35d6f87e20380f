use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const SMALL_OPTIMIZER: &str = r#"{ "s": 16, "t": 32, "iterations": 10 }"#;

fn nfsa(args: &[&str], dir: &Path, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nfsa"));
    cmd.args(args)
        .current_dir(dir)
        .env_remove("NFSA_THREADS")
        .env_remove("RUST_LOG");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_ok(dir: &Path, config: &Value, extra: &[&str]) -> PathBuf {
    let cfg = write_config(dir, "cfg.json", config);
    let out = dir.join("out");
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = nfsa(&args, dir, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn beam_map_peaks_at_the_focus() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": "beam-map",
        "seed": 0,
        "array": { "kind": "usa", "n": 33, "p": 5, "wavelength": 0.01 },
        "focus": { "b": 0.05, "theta": 0.0 },
        "b_range": [0.0, 0.1], "b_points": 21,
        "theta_range": [-1.0, 1.0], "theta_points": 41
    });
    let out = run_ok(tmp.path(), &cfg, &[]);
    let (header, rows) = read_csv(&out.join("beam_map.csv"));
    assert_eq!(header, ["b", "theta", "abs_gain"]);
    assert_eq!(rows.len(), 21 * 41);
    let parsed: Vec<[f64; 3]> = rows
        .iter()
        .map(|r| [r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()])
        .collect();
    let max = parsed.iter().map(|r| r[2]).fold(0.0, f64::max);
    assert!((max - 33.0).abs() < 1e-9);
    let at_focus = parsed.iter().find(|r| r[0] == 0.05 && r[1] == 0.0).unwrap();
    assert!((at_focus[2] - max).abs() < 1e-12);
    assert_eq!(manifest(&out)["figure"], "Fig. 2");
}

#[test]
fn nmse_sweep_reports_every_estimator() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": "nmse-sweep",
        "seed": 3,
        "optimizer": serde_json::from_str::<Value>(SMALL_OPTIMIZER).unwrap(),
        "snr_db": [10]
    });
    let out = run_ok(tmp.path(), &cfg, &["--trials", "4"]);
    let (header, rows) = read_csv(&out.join("nmse.csv"));
    assert_eq!(header, ["snr_db", "method", "nmse_db", "trials"]);
    let methods: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(methods, ["sda-omp", "sda-isrce", "farfield-omp", "ls", "genie-ls"]);
    assert!(rows.iter().all(|r| r[3] == "4"));
    let m = manifest(&out);
    assert_eq!(m["trials"], 4);
    assert_eq!(m["figure"], "Fig. 5");
}

fn small_sum_rate() -> Value {
    json!({
        "experiment": "sumrate-snr",
        "seed": 11,
        "trials": 6,
        "optimizer": serde_json::from_str::<Value>(SMALL_OPTIMIZER).unwrap(),
        "arrays": [
            { "kind": "nsa", "n": 17, "p": 4 },
            { "kind": "usa", "n": 17, "p": 4 },
            { "kind": "uca", "n": 17 }
        ],
        "users": 5,
        "snr_db": [0, 20]
    })
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &small_sum_rate());
    let c = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "4"), ("b", "4"), ("c", "1")] {
        let o = nfsa(&["run", c, "--out", name], tmp.path(), &[("NFSA_THREADS", threads)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(dir_bytes(&tmp.path().join(name)));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["layout_nsa.json", "manifest.json", "sum_rate.csv"]);
}

#[test]
fn manifest_records_hashes_of_config_and_files() {
    let tmp = TempDir::new().unwrap();
    let out = run_ok(tmp.path(), &small_sum_rate(), &[]);
    let m = manifest(&out);
    assert_eq!(m["tool"], "nfsa");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["figure"], "Fig. 6");
    assert_eq!(m["sweep_variable"], "snr_db");
    let config_text = serde_json::to_string(&m["config"]).unwrap();
    assert_eq!(m["config_sha256"], nfsa_cli::sha256_hex(config_text.as_bytes()));
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], nfsa_cli::sha256_hex(&bytes));
        assert_eq!(f["bytes"], bytes.len());
    }
    let (header, rows) = read_csv(&out.join("sum_rate.csv"));
    assert_eq!(
        header,
        ["sweep_value", "array_kind", "metric", "mean", "stderr", "trials"]
    );
    assert_eq!(rows.len(), 2 * 3);
    let text = fs::read_to_string(out.join("sum_rate.csv")).unwrap();
    assert!(!text.contains('\r'));
}

#[test]
fn command_line_overrides_seed_and_trials() {
    let tmp = TempDir::new().unwrap();
    let base = run_ok(tmp.path(), &small_sum_rate(), &[]);
    let base_csv = fs::read(base.join("sum_rate.csv")).unwrap();
    let seeded = tmp.path().join("seeded");
    let cfg = tmp.path().join("cfg.json");
    let o = nfsa(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--seed",
            "12",
            "--trials",
            "3",
            "--out",
            seeded.to_str().unwrap(),
        ],
        tmp.path(),
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_ne!(fs::read(seeded.join("sum_rate.csv")).unwrap(), base_csv);
    let (_, rows) = read_csv(&seeded.join("sum_rate.csv"));
    assert!(rows.iter().all(|r| r[5] == "3"));
    assert_eq!(manifest(&seeded)["seed"], 12);
}

#[test]
fn validate_prints_derived_geometry() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &json!({
            "experiment": "nmse-sweep",
            "seed": 1,
            "array": { "kind": "usa", "n": 33, "p": 10, "wavelength": 0.01 }
        }),
    );
    let o = nfsa(&["validate", cfg.to_str().unwrap()], tmp.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("Rayleigh distance = 512 m"), "{text}");
    assert!(text.contains("D = 1.6 m"), "{text}");
    assert!(text.contains("b_max = 0.05 1/m"), "{text}");
    assert!(text.contains("dictionary: minimum S x T"), "{text}");
    // Validation is a dry run.
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn infeasible_panel_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &json!({
            "experiment": "optimize-positions",
            "seed": 0,
            "array": { "kind": "nsa", "n": 33, "p": 10, "wavelength": 0.01, "panel_length": 1.0 }
        }),
    );
    for cmd in ["validate", "run"] {
        let o = nfsa(&[cmd, cfg.to_str().unwrap()], tmp.path(), &[]);
        assert_eq!(o.status.code(), Some(2));
        let err = stderr(&o);
        assert!(
            err.contains("array.panel_length") && err.contains("infeasible panel"),
            "{err}"
        );
    }
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn missing_seed_defaults_to_zero_with_a_warning() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": "beam-cross-section",
        "b_points": 5
    });
    let path = write_config(tmp.path(), "cfg.json", &cfg);
    let o = nfsa(&["run", path.to_str().unwrap(), "--out", "out"], tmp.path(), &[]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("defaulting to seed 0"), "{}", stderr(&o));
    assert_eq!(manifest(&tmp.path().join("out"))["seed"], 0);
}

#[test]
fn invalid_fields_are_reported_by_path() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (
            json!({ "experiment": "sumrate-snr", "seed": 0, "arrays": [{ "kind": "usa" }, { "kind": "usa", "n": "many" }] }),
            "arrays[1].n",
        ),
        (
            json!({ "experiment": "beam-map", "seed": 0, "array": { "kind": "usa", "pp": 3 } }),
            "array",
        ),
        (
            json!({ "experiment": "beam-map", "seed": 0, "array": { "kind": "usa", "n": 32 } }),
            "array",
        ),
        (
            json!({ "experiment": "beam-map", "seed": 0, "theta_range": [0.5, -0.5] }),
            "theta_range",
        ),
        (
            json!({ "experiment": "sumrate-users", "seed": 0, "users": [4, 0] }),
            "users[1]",
        ),
        (json!({ "experiment": "no-such-thing" }), "experiment"),
        (json!({ "seed": 0 }), "experiment"),
        (json!({ "experiment": "nmse-sweep", "seed": -1 }), "seed"),
        (
            json!({ "experiment": "nmse-sweep", "seed": 0, "array": { "kind": "uca" } }),
            "methods[0]",
        ),
        (
            json!({ "experiment": "nmse-sweep", "seed": 0, "estimator": { "oversample": 0 } }),
            "estimator.oversample",
        ),
    ];
    for (cfg, field) in cases {
        let path = write_config(tmp.path(), "cfg.json", &cfg);
        let o = nfsa(&["run", path.to_str().unwrap(), "--out", "out"], tmp.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        let err = stderr(&o);
        assert!(err.contains(&format!("  {field}")), "{cfg}: {err}");
        assert!(!tmp.path().join("out").exists());
    }
    let o = nfsa(&["validate", "missing.json"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_runs_leave_no_output() {
    let tmp = TempDir::new().unwrap();
    // Passes validation (the file exists) but is not a layout.
    fs::write(tmp.path().join("bad_layout.json"), "{\"kind\": \"nsa\"}").unwrap();
    let cfg = json!({
        "experiment": "beam-map",
        "seed": 0,
        "array": { "kind": "nsa", "layout_file": "bad_layout.json" }
    });
    let path = write_config(tmp.path(), "cfg.json", &cfg);
    let o = nfsa(&["run", path.to_str().unwrap(), "--out", "out"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn zero_threads_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(
        tmp.path(),
        "cfg.json",
        &json!({ "experiment": "beam-cross-section", "seed": 0 }),
    );
    let o = nfsa(&["run", path.to_str().unwrap()], tmp.path(), &[("NFSA_THREADS", "0")]);
    assert!(!o.status.success());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn optimized_layout_round_trips_through_a_layout_file() {
    let tmp = TempDir::new().unwrap();
    let opt = json!({
        "experiment": "optimize-positions",
        "seed": 5,
        "optimizer": serde_json::from_str::<Value>(SMALL_OPTIMIZER).unwrap(),
        "array": { "kind": "nsa", "n": 17, "p": 6 }
    });
    let out = run_ok(tmp.path(), &opt, &[]);
    let (header, rows) = read_csv(&out.join("run_log.csv"));
    assert_eq!(header, ["q", "h", "chi"]);
    assert_eq!(rows.len(), 11);
    let h: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let summary = &manifest(&out)["summary"];
    assert!(summary["h_final"].as_f64().unwrap() <= summary["h_initial"].as_f64().unwrap());

    let map = json!({
        "experiment": "beam-map",
        "seed": 0,
        "array": { "kind": "nsa", "layout_file": "out/layout.json" },
        "focus": { "b": 0.02, "theta": 0.1 },
        "b_range": [0.0, 0.04], "b_points": 5,
        "theta_range": [-0.2, 0.3], "theta_points": 6
    });
    let cfg = write_config(tmp.path(), "map.json", &map);
    let o = nfsa(&["run", cfg.to_str().unwrap(), "--out", "map"], tmp.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("map"));
    assert_eq!(m["figure"], "Fig. 4");
    let inputs = m["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    let layout = fs::read(out.join("layout.json")).unwrap();
    assert_eq!(inputs[0]["sha256"], nfsa_cli::sha256_hex(&layout));
    let (_, rows) = read_csv(&tmp.path().join("map/beam_map.csv"));
    let peak = rows
        .iter()
        .find(|r| {
            (r[0].parse::<f64>().unwrap() - 0.02).abs() < 1e-12 && (r[1].parse::<f64>().unwrap() - 0.1).abs() < 1e-12
        })
        .expect("focus on the grid");
    assert!((peak[2].parse::<f64>().unwrap() - 17.0).abs() < 1e-9);
}

#[test]
fn every_experiment_runs_at_tiny_scale() {
    let tmp = TempDir::new().unwrap();
    let small = serde_json::from_str::<Value>(SMALL_OPTIMIZER).unwrap();
    let arrays =
        json!([{ "kind": "nsa", "n": 9, "p": 3 }, { "kind": "usa", "n": 9, "p": 3 }, { "kind": "hula", "n": 9 }]);
    let cases = [
        (
            json!({ "experiment": "beam-cross-section", "b_points": 7 }),
            "cross_section.csv",
            "Fig. 3",
        ),
        (
            json!({ "experiment": "sumrate-users", "arrays": arrays, "users": [1, 3] }),
            "sum_rate.csv",
            "Fig. 7",
        ),
        (
            json!({ "experiment": "sumrate-distance", "arrays": arrays, "users": 3, "r_max": [50, 400] }),
            "sum_rate.csv",
            "Fig. 8",
        ),
        (
            json!({ "experiment": "two-user-angle-sweep", "arrays": arrays, "theta_points": 9 }),
            "sum_rate.csv",
            "Fig. 9",
        ),
        (
            json!({ "experiment": "sumrate-spacing", "n": 9, "p_values": [1, 3], "users": [2] }),
            "sum_rate.csv",
            "Fig. 10",
        ),
        (
            json!({ "experiment": "sumrate-snr", "arrays": arrays, "users": 2, "snr_db": [10], "csi": { "estimated": "sda-omp" } }),
            "sum_rate.csv",
            "Fig. 6",
        ),
    ];
    for (i, (mut cfg, table, figure)) in cases.into_iter().enumerate() {
        cfg["seed"] = json!(2);
        cfg["optimizer"] = small.clone();
        let path = write_config(tmp.path(), &format!("cfg{i}.json"), &cfg);
        let out = format!("out{i}");
        let o = nfsa(
            &["run", path.to_str().unwrap(), "--trials", "3", "--out", &out],
            tmp.path(),
            &[],
        );
        assert!(o.status.success(), "{cfg}: {}", stderr(&o));
        let (header, rows) = read_csv(&tmp.path().join(&out).join(table));
        assert!(!header.is_empty() && !rows.is_empty(), "{cfg}");
        assert_eq!(manifest(&tmp.path().join(&out))["figure"], figure);
    }
}

#[test]
fn write_failure_rolls_back_placed_files() {
    use nfsa_cli::experiments::Artifact;
    let tmp = TempDir::new().unwrap();
    let files = |names: &[&str]| -> Vec<Artifact> {
        names
            .iter()
            .map(|n| Artifact {
                name: n.to_string(),
                bytes: b"x\n".to_vec(),
            })
            .collect()
    };

    // A directory in the way of the second file makes its rename fail.
    let existing = tmp.path().join("existing");
    fs::create_dir_all(existing.join("b.csv")).unwrap();
    fs::write(existing.join("keep.txt"), "kept").unwrap();
    assert!(nfsa_cli::output::write_all(&existing, &files(&["a.csv", "b.csv"])).is_err());
    assert!(!existing.join("a.csv").exists());
    assert!(existing.join("keep.txt").exists());
    let leftovers: Vec<_> = fs::read_dir(&existing)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers.len(), 2, "{leftovers:?}");

    let fresh = tmp.path().join("fresh");
    nfsa_cli::output::write_all(&fresh, &files(&["a.csv"])).unwrap();
    assert_eq!(fs::read(fresh.join("a.csv")).unwrap(), b"x\n");
}
