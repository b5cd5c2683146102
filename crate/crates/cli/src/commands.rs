use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use downwash::pipeline::{
    load_log, run_pipeline, AmbientSource, FitReport, PipelineError, PipelineOptions, RejectedRow,
};
use downwash::sim::{compare, run_passunder, SimConfig, SimError, SimResult};
use downwash::{
    air_density, induced_hover_velocity, presets, DownwashField, DroneSpec, Environment,
    FieldSample, FlowPoint, JetParameters, NearFieldPolicy,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_settings, read_input, resolve_drone, resolve_env, resolve_params};
use crate::manifest::RunManifest;
use crate::{CliResult, EvalArgs, Failure, FitArgs, GridArgs, GridFormat, SimulateArgs};

fn policy(clamp: bool) -> NearFieldPolicy {
    if clamp {
        NearFieldPolicy::Clamp
    } else {
        NearFieldPolicy::Reject
    }
}

fn note_qualitative(drone: &DroneSpec) {
    if drone.is_canted() {
        eprintln!(
            "note: {} has {} propellers; results are qualitative-only",
            drone.name,
            drone.cant.as_str()
        );
    }
}

/// Opens `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .map_err(Failure::usage)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value)
        .map_err(Failure::internal)
        .and_then(|_| {
            writeln!(out)
                .and_then(|_| out.flush())
                .map_err(Failure::internal)
        })
}

#[derive(Serialize)]
struct EvalResult {
    speed_mps: f64,
    u_c_norm: f64,
    r_half_norm: f64,
    xi: f64,
    s_norm: f64,
    r_norm: f64,
    centerline_velocity_mps: f64,
    induced_velocity_mps: f64,
    clamped: bool,
    qualitative_only: bool,
}

impl EvalResult {
    fn new(sample: &FieldSample, field: &DownwashField) -> Self {
        EvalResult {
            speed_mps: sample.speed,
            u_c_norm: sample.u_c_norm,
            r_half_norm: sample.r_half_norm,
            xi: sample.xi,
            s_norm: sample.s_norm,
            r_norm: sample.r_norm,
            centerline_velocity_mps: sample.centerline_velocity,
            induced_velocity_mps: field.induced_velocity(),
            clamped: sample.clamped,
            qualitative_only: sample.qualitative_only,
        }
    }
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("eval", json!(null));
    let settings = load_settings(&args.model, &mut manifest)?;
    let drone = resolve_drone(&args.model, &settings)?;
    let env = resolve_env(&args.model, &settings);
    let params = resolve_params(&settings)?;
    let s = args.s.or(settings.s).ok_or_else(|| {
        Failure::usage(anyhow!("missing --s (distance below the rotor plane, m)"))
    })?;
    let r = args.r.or(settings.r).unwrap_or(0.0);
    let clamp = args.clamp_near_field || settings.clamp_near_field.unwrap_or(false);
    manifest.config = json!({
        "drone": drone,
        "env": env,
        "params": params,
        "s": s,
        "r": r,
        "clamp_near_field": clamp,
    });

    let field = DownwashField::new(&drone, &env, &params).map_err(Failure::usage)?;
    let point = FlowPoint::new(s, r, 0.0).map_err(Failure::usage)?;
    let sample = field
        .sample(&point, policy(clamp))
        .map_err(Failure::usage)?;
    if sample.clamped {
        eprintln!("note: near-field query answered with the s/l = 2.5 slice");
    }
    note_qualitative(&drone);

    let result = EvalResult::new(&sample, &field);
    let mut out = sink(None)?;
    if args.json {
        return write_json(
            &mut *out,
            &json!({ "manifest": manifest, "result": result }),
        );
    }
    let text = format!(
        "drone      {}\nspeed      {:.6} m/s\nU_c/U_H    {:.6}\nr_half/l   {:.6}\nxi         {:.6}\ns/l        {:.6}\n",
        drone.name, result.speed_mps, result.u_c_norm, result.r_half_norm, result.xi, result.s_norm
    );
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(Failure::internal)
}

#[derive(Serialize)]
struct GridRow {
    s_norm: f64,
    r_norm: f64,
    s_m: f64,
    r_m: f64,
    speed_mps: f64,
    u_norm: f64,
    half_width_m: f64,
    xi: f64,
    clamped: bool,
}

const GRID_COLUMNS: &str = "s_norm,r_norm,s_m,r_m,speed_mps,u_norm,half_width_m,xi,clamped";

/// `from, from + step, ...` up to `to`, tolerant of rounding at the end.
fn steps(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| from + k as f64 * step).collect()
}

pub fn grid(args: &GridArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("grid", json!(null));
    let settings = load_settings(&args.model, &mut manifest)?;
    let drone = resolve_drone(&args.model, &settings)?;
    let env = resolve_env(&args.model, &settings);
    let params = resolve_params(&settings)?;
    let [s_min, s_max, r_max] = match (&args.extent, settings.extent) {
        (Some(v), _) if v.len() == 3 => [v[0], v[1], v[2]],
        (Some(v), _) => {
            return Err(Failure::usage(anyhow!(
                "--extent takes exactly three values S_MIN,S_MAX,R_MAX, got {}",
                v.len()
            )))
        }
        (None, Some(e)) => e,
        (None, None) => {
            return Err(Failure::usage(anyhow!(
                "missing --extent S_MIN,S_MAX,R_MAX"
            )))
        }
    };
    let resolution = args
        .resolution
        .or(settings.resolution)
        .ok_or_else(|| Failure::usage(anyhow!("missing --resolution")))?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Failure::usage(anyhow!(
            "--resolution must be positive, got {resolution}"
        )));
    }
    if !(s_min <= s_max && r_max >= 0.0 && s_min >= 0.0) {
        return Err(Failure::usage(anyhow!(
            "--extent needs 0 <= S_MIN <= S_MAX and R_MAX >= 0, got {s_min},{s_max},{r_max}"
        )));
    }
    let format = args.format.or(settings.format).unwrap_or(GridFormat::Csv);
    let clamp = args.clamp_near_field || settings.clamp_near_field.unwrap_or(false);
    manifest.config = json!({
        "drone": drone,
        "env": env,
        "params": params,
        "extent": [s_min, s_max, r_max],
        "resolution": resolution,
        "format": format,
        "clamp_near_field": clamp,
        "out": args.out.as_ref().map(|p| p.display().to_string()),
    });

    let field = DownwashField::new(&drone, &env, &params).map_err(Failure::usage)?;
    let l = field.length_scale();
    let mut rows = Vec::new();
    for s_norm in steps(s_min, s_max, resolution) {
        for r_norm in steps(0.0, r_max, resolution) {
            let (s, r) = (s_norm * l, r_norm * l);
            let sample = field
                .sample(
                    &FlowPoint::new(s, r, 0.0).map_err(Failure::usage)?,
                    policy(clamp),
                )
                .map_err(Failure::usage)?;
            rows.push(GridRow {
                s_norm,
                r_norm,
                s_m: s,
                r_m: r,
                speed_mps: sample.speed,
                u_norm: sample.speed / field.induced_velocity(),
                half_width_m: sample.r_half_norm * l,
                xi: sample.xi,
                clamped: sample.clamped,
            });
        }
    }
    note_qualitative(&drone);

    let mut out = sink(args.out.as_deref())?;
    match format {
        GridFormat::Json => write_json(
            &mut *out,
            &json!({
                "manifest": manifest,
                "induced_velocity_mps": field.induced_velocity(),
                "rows": rows,
            }),
        ),
        GridFormat::Csv => {
            let mut text = format!("# {}\n{GRID_COLUMNS}\n", manifest.comment());
            for g in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    g.s_norm,
                    g.r_norm,
                    g.s_m,
                    g.r_m,
                    g.speed_mps,
                    g.u_norm,
                    g.half_width_m,
                    g.xi,
                    g.clamped
                ));
            }
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(Failure::internal)
        }
    }
}

#[derive(Serialize)]
struct Rejected {
    log: String,
    #[serde(flatten)]
    row: RejectedRow,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    manifest: RunManifest,
    drone: &'a DroneSpec,
    #[serde(flatten)]
    report: &'a FitReport,
    rejected_rows: Vec<Rejected>,
}

fn is_input_problem(e: &PipelineError) -> bool {
    matches!(
        e,
        PipelineError::MissingColumn(_)
            | PipelineError::Format(_)
            | PipelineError::EmptyInput
            | PipelineError::InsufficientAmbientSamples { .. }
            | PipelineError::Model(_)
    )
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("fit", json!(null));
    let settings = load_settings(&args.model, &mut manifest)?;
    let drone = resolve_drone(&args.model, &settings)?;
    let env = resolve_env(&args.model, &settings);
    let mut options = PipelineOptions::default();
    if let Some(ambient) = args.ambient.or(settings.ambient) {
        if !(ambient >= 0.0 && ambient.is_finite()) {
            return Err(Failure::usage(anyhow!(
                "--ambient must be non-negative, got {ambient}"
            )));
        }
        options.ambient = AmbientSource::Fixed(ambient);
    } else if let Some(window_s) = args.ambient_window.or(settings.ambient_window) {
        options.ambient = AmbientSource::Estimate { window_s };
    }
    if let Some(res) = args.resolution.or(settings.resolution) {
        options.resolution_norm = res;
        options.slice_thickness_norm = res;
    }

    let mut logs = Vec::with_capacity(args.logs.len());
    let mut rejected_rows = Vec::new();
    for path in &args.logs {
        let bytes = read_input(path, &mut manifest)?;
        let loaded = load_log(bytes.as_slice())
            .with_context(|| format!("cannot load {}", path.display()))
            .map_err(Failure::usage)?;
        for row in loaded.rejected {
            eprintln!("warning: {}:{}: {}", path.display(), row.line, row.reason);
            rejected_rows.push(Rejected {
                log: path.display().to_string(),
                row,
            });
        }
        logs.push(loaded.records);
    }
    manifest.config = json!({
        "drone": drone,
        "env": env,
        "options": options,
        "logs": args.logs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "out": args.out.as_ref().map(|p| p.display().to_string()),
    });

    let report = run_pipeline(&logs, &drone, &env, &options).map_err(|e| {
        let code = is_input_problem(&e.source);
        let err = anyhow!("{e}");
        if code {
            Failure::usage(err)
        } else {
            Failure::internal(err)
        }
    })?;
    note_qualitative(&drone);
    let p = report.jet_parameters;
    eprintln!(
        "fitted Bd = {:.4}, S = {:.5}, s0/l = {:.3} from {} slices",
        p.bd,
        p.spreading_rate,
        p.s0_norm,
        report.slices.iter().filter(|s| s.in_far_field).count()
    );

    let output = FitOutput {
        manifest,
        drone: &drone,
        report: &report,
        rejected_rows,
    };
    write_json(&mut *sink(args.out.as_deref())?, &output)
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Plant { .. } => Failure::internal(e),
        _ => Failure::usage(e),
    }
}

#[derive(Serialize)]
struct Metrics<'a> {
    #[serde(flatten)]
    result: &'a SimResult,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("simulate", json!(null));
    let bytes = read_input(&args.config, &mut manifest)?;
    let config: SimConfig = serde_json::from_slice(&bytes)
        .with_context(|| format!("invalid scenario {}", args.config.display()))
        .map_err(Failure::usage)?;
    config.validate().map_err(sim_failure)?;
    let resolved = SimConfig {
        crossing_speed: Some(config.resolved_crossing_speed()),
        horizontal_span: Some(config.resolved_span()),
        gains: Some(config.resolved_gains()),
        ..config.clone()
    };
    manifest.config = json!({
        "scenario": resolved,
        "compare": args.compare,
        "out": args.out.as_ref().map(|p| p.display().to_string()),
    });

    let mut series: Vec<(&str, SimResult)> = Vec::new();
    let summary = if args.compare {
        let cmp = compare(&config).map_err(sim_failure)?;
        let ratio = cmp.rmse_ratio;
        let summary = json!({
            "manifest": manifest,
            "compensated": Metrics { result: &cmp.compensated },
            "uncompensated": Metrics { result: &cmp.uncompensated },
            "rmse_ratio": if ratio.is_finite() { json!(ratio) } else { json!("inf") },
        });
        series.push(("compensated", cmp.compensated));
        series.push(("uncompensated", cmp.uncompensated));
        summary
    } else {
        let result = run_passunder(&config).map_err(sim_failure)?;
        let summary = json!({ "manifest": manifest, "result": Metrics { result: &result } });
        series.push(("run", result));
        summary
    };

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::usage)?;
        for (name, result) in &series {
            let path = dir.join(format!("{name}.csv"));
            let mut file = sink(Some(&path))?;
            result
                .write_csv(&mut file, &[manifest.comment()])
                .and_then(|_| file.flush())
                .map_err(Failure::internal)?;
        }
        write_json(&mut *sink(Some(&dir.join("summary.json")))?, &summary)?;
    }
    write_json(&mut *sink(None)?, &summary)
}

pub fn presets() -> CliResult<()> {
    let env = Environment::default();
    let rho = air_density(&env).map_err(Failure::internal)?;
    let mut text = format!(
        "{:<12} {:>8} {:>10} {:>10} {:>9} {:>9}  {}\n",
        "name", "mass_kg", "prop_d_m", "l_m", "cant", "U_H_mps", "note"
    );
    for d in presets::all() {
        let u_h = induced_hover_velocity(&d, rho, env.gravity).map_err(Failure::internal)?;
        text.push_str(&format!(
            "{:<12} {:>8.3} {:>10.4} {:>10.3} {:>9} {:>9.2}  {}\n",
            d.name,
            d.mass,
            d.propeller_diameter(),
            d.motor_distance,
            d.cant.as_str(),
            u_h,
            if d.is_canted() {
                "qualitative-only"
            } else {
                ""
            }
        ));
    }
    let params = JetParameters::UNIFIED;
    text.push_str(&format!(
        "\njet parameters: Bd = {}, S = {}, s0/l = {} (cone angle {:.2} deg)\n",
        params.bd,
        params.spreading_rate,
        params.s0_norm,
        params.cone_angle_deg()
    ));
    let mut out = sink(None)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(Failure::internal)
}
