use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_downwash"))
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn eval_json(extra: &[&str]) -> Value {
    let mut args = vec!["eval", "--json"];
    args.extend_from_slice(extra);
    stdout_json(&run(&args))["result"].clone()
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn eval_on_axis_and_at_half_width() {
    let axis = eval_json(&["--drone", "kolibri", "--s", "0.354", "--r", "0"]);
    assert!((f(&axis["speed_mps"]) / 8.50 - 1.0).abs() < 0.01);
    let r_half = f(&axis["r_half_norm"]) * 0.118;
    let edge = eval_json(&[
        "--drone",
        "kolibri",
        "--s",
        "0.354",
        "--r",
        &r_half.to_string(),
    ]);
    assert!((f(&edge["speed_mps"]) / (0.5 * f(&axis["speed_mps"])) - 1.0).abs() < 1e-12);
    assert!((f(&edge["speed_mps"]) - 4.25).abs() < 0.0425);
}

#[test]
fn eval_text_output() {
    let out = run(&["eval", "--drone", "kolibri", "--s", "0.354"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("speed      8.49"));
    assert!(text.contains("s/l        3.000000"));
}

#[test]
fn near_field_needs_the_clamp_flag() {
    let out = run(&["eval", "--drone", "kolibri", "--s", "0.118"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2.5"));
    let clamped = eval_json(&["--drone", "kolibri", "--s", "0.118", "--clamp-near-field"]);
    assert_eq!(clamped["clamped"], Value::Bool(true));
    assert_eq!(f(&clamped["s_norm"]), 2.5);
}

#[test]
fn custom_geometry_and_validation() {
    let custom = eval_json(&[
        "--mass",
        "0.23",
        "--prop-diameter",
        "0.0737",
        "--motor-distance",
        "0.118",
        "--n-props",
        "4",
        "--s",
        "0.354",
    ]);
    let preset = eval_json(&["--drone", "kolibri", "--s", "0.354"]);
    assert_eq!(custom["speed_mps"], preset["speed_mps"]);

    let thin_air = eval_json(&["--drone", "kolibri", "--s", "0.354", "--pressure", "80000"]);
    assert!(f(&thin_air["speed_mps"]) > f(&preset["speed_mps"]));

    assert_eq!(
        run(&["eval", "--mass", "0.23", "--s", "0.354"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["eval", "--drone", "nonexistent", "--s", "0.354"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["eval", "--drone", "kolibri", "--mass", "-1", "--s", "0.354"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn flags_override_the_settings_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("settings.json");
    fs::write(&path, r#"{"drone": "elios 3", "s": 1.0}"#).unwrap();
    let p = path.to_str().unwrap();
    let from_file = eval_json(&["--config", p]);
    let overridden = eval_json(&["--config", p, "--drone", "kolibri"]);
    let direct = eval_json(&["--drone", "kolibri", "--s", "1.0"]);
    assert_eq!(overridden["speed_mps"], direct["speed_mps"]);
    assert_ne!(from_file["speed_mps"], direct["speed_mps"]);
    assert_eq!(from_file["qualitative_only"], Value::Bool(true));

    let manifest = stdout_json(&run(&["eval", "--json", "--config", p]))["manifest"].clone();
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    fs::write(&path, r#"{"drone": "kolibri", "colour": 3}"#).unwrap();
    assert_eq!(
        run(&["eval", "--config", p, "--s", "1"]).status.code(),
        Some(2)
    );
}

fn grid_rows(args: &[&str]) -> Vec<Value> {
    let mut all = vec!["grid", "--drone", "kolibri", "--format", "json"];
    all.extend_from_slice(args);
    stdout_json(&run(&all))["rows"].as_array().unwrap().clone()
}

#[test]
fn grid_agrees_with_eval() {
    let rows = grid_rows(&["--extent", "3,3.5,0", "--resolution", "0.5"]);
    assert_eq!(rows.len(), 2);
    for row in rows {
        let s = f(&row["s_m"]).to_string();
        let r = f(&row["r_m"]).to_string();
        let point = eval_json(&["--drone", "kolibri", "--s", &s, "--r", &r]);
        assert_eq!(row["speed_mps"], point["speed_mps"]);
    }
}

#[test]
fn grid_centerline_decays() {
    let rows = grid_rows(&["--extent", "2.5,7,0", "--resolution", "0.25"]);
    assert_eq!(rows.len(), 19);
    let speeds: Vec<f64> = rows.iter().map(|r| f(&r["speed_mps"])).collect();
    assert!(speeds.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn grid_half_width_column() {
    let rows = grid_rows(&["--extent", "3,3,0", "--resolution", "1"]);
    assert!((f(&rows[0]["half_width_m"]) - 0.6761 * 0.118).abs() < 1e-4 * 0.118);
}

#[test]
fn grid_csv_embeds_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = run(&[
        "grid",
        "--drone",
        "kolibri",
        "--extent",
        "3,4,1",
        "--resolution",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest {"));
    assert_eq!(
        lines.next().unwrap(),
        "s_norm,r_norm,s_m,r_m,speed_mps,u_norm,half_width_m,xi,clamped"
    );
    assert_eq!(lines.count(), 9);
}

#[test]
fn grid_usage_errors() {
    let bad = |args: &[&str]| {
        let mut all = vec!["grid", "--drone", "kolibri"];
        all.extend_from_slice(args);
        run(&all).status.code()
    };
    assert_eq!(bad(&["--extent", "3,4,1", "--resolution", "0"]), Some(2));
    assert_eq!(bad(&["--extent", "3,4,1", "--resolution", "-0.5"]), Some(2));
    assert_eq!(bad(&["--extent", "3,4", "--resolution", "0.5"]), Some(2));
    assert_eq!(bad(&["--extent", "1,4,1", "--resolution", "0.5"]), Some(2));
    assert_eq!(
        bad(&[
            "--extent",
            "1,4,1",
            "--resolution",
            "0.5",
            "--clamp-near-field"
        ]),
        Some(0)
    );
}

#[test]
fn fit_bundled_log() {
    let log = fixture("logs/offboard_1.csv");
    let out = run(&[
        "fit",
        "--log",
        log.to_str().unwrap(),
        "--drone",
        "offboard 1",
    ]);
    let report = stdout_json(&out);
    assert!((f(&report["jet_parameters"]["bd"]) / 10.11 - 1.0).abs() < 0.05);
    assert_eq!(report["slices"].as_array().unwrap().len(), 10);
    assert_eq!(report["residual_tests"].as_array().unwrap().len(), 6);
    assert_eq!(
        report["manifest"]["inputs"][0]["sha256"]
            .as_str()
            .unwrap()
            .len(),
        64
    );
    assert!(report["deltas"]["bd_relative"].is_number());

    let again = run(&[
        "fit",
        "--log",
        log.to_str().unwrap(),
        "--drone",
        "offboard 1",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn fit_needs_logs() {
    assert_eq!(run(&["fit", "--drone", "kolibri"]).status.code(), Some(2));
    assert_eq!(
        run(&["fit", "--drone", "kolibri", "--log", "/nonexistent.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fit_rejects_a_log_without_mandatory_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "time_s,px_m,py_m,pz_m,speed_mps\n0,0,0,1,0\n").unwrap();
    let out = run(&["fit", "--drone", "kolibri", "--log", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("anemo_mps"));
}

#[test]
fn fit_near_field_only_log_has_no_far_field_slices() {
    let l = 0.118;
    let mut csv = String::from("time_s,px_m,py_m,pz_m,speed_mps,anemo_mps\n");
    let mut t = 0;
    for k in 2..=4 {
        for i in -4i32..=4 {
            for j in -4i32..=4 {
                let (x, y) = (i as f64 * 0.33, j as f64 * 0.33);
                let u = 6.0 * (-(x * x + y * y)).exp();
                csv.push_str(&format!(
                    "{t},{},{},{},0,{u}\n",
                    -x * l,
                    -y * l,
                    k as f64 * 0.33 * l
                ));
                t += 1;
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("near.csv");
    fs::write(&path, csv).unwrap();
    let out = run(&[
        "fit",
        "--drone",
        "kolibri",
        "--ambient",
        "0",
        "--log",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no far-field slices"), "{err}");
}

fn simulate(config: &Path, compare: bool) -> Value {
    let mut args = vec!["simulate", "--config", config.to_str().unwrap()];
    if compare {
        args.push("--compare");
    }
    stdout_json(&run(&args))
}

fn ratio(summary: &Value) -> f64 {
    match &summary["rmse_ratio"] {
        Value::String(s) if s == "inf" => f64::INFINITY,
        v => f(v),
    }
}

#[test]
fn simulate_bundled_two_meter_pass() {
    let summary = simulate(&fixture("passunder_2m.json"), true);
    assert!(ratio(&summary) >= 3.0);
    assert!(f(&summary["compensated"]["rmse_mm"]) <= 2.0);
    assert!(f(&summary["uncompensated"]["max_abs_err_mm"]) > 50.0);
}

#[test]
fn simulate_still_air_ratio_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("still.json");
    fs::write(
        &path,
        r#"{"lower_drone": "Kolibri", "vertical_separation": 2.0}"#,
    )
    .unwrap();
    let summary = simulate(&path, true);
    assert!((ratio(&summary) - 1.0).abs() < 1e-9);
}

#[test]
fn simulate_timestep_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: Value =
        serde_json::from_str(&fs::read_to_string(fixture("passunder_2m.json")).unwrap()).unwrap();
    config["timestep"] = Value::from(0.001);
    let path = dir.path().join("fine.json");
    fs::write(&path, config.to_string()).unwrap();
    let coarse = simulate(&fixture("passunder_2m.json"), true);
    let fine = simulate(&path, true);
    let a = f(&coarse["uncompensated"]["rmse_mm"]);
    let b = f(&fine["uncompensated"]["rmse_mm"]);
    assert!((a / b - 1.0).abs() < 0.01);
}

#[test]
fn simulate_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--config",
        fixture("passunder_1m.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# manifest"));
    assert_eq!(
        lines.next().unwrap(),
        "t_s,x_m,z_m,z_err_m,u_d_mps,alpha,beta,throttle"
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    for key in ["rmse_mm", "mean_err_mm", "max_abs_err_mm"] {
        assert!(summary["result"][key].is_number());
    }
}

#[test]
fn simulate_config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"upper_drone": "Offboard 2", "lower_drone": "Kolibri", "vertical_separation": 2.0, "timestep": -1}"#).unwrap();
    let out = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("timestep"));
}

#[test]
fn presets_table() {
    let out = run(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let u_h = |name: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        line[name.len()..]
            .split_whitespace()
            .nth(4)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((u_h("Kolibri") - 7.41).abs() <= 0.04);
    assert!((u_h("Elios 3") - 13.89).abs() <= 0.07);
    for line in text
        .lines()
        .filter(|l| l.starts_with("Mavic 3E") || l.starts_with("Elios 3"))
    {
        assert!(line.contains("qualitative-only"));
    }
    assert!(!text
        .lines()
        .find(|l| l.starts_with("Kolibri"))
        .unwrap()
        .contains("qualitative-only"));
}

#[test]
fn bundled_presets_match_the_builtin_table() {
    let bundled: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(fixture("presets.json")).unwrap()).unwrap();
    assert_eq!(bundled.len(), 6);
    assert_eq!(bundled[0]["name"], "Kolibri");
    assert_eq!(bundled[4]["cant"], "inward");
}
