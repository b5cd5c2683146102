use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use downwash::{presets, DroneSpec, Environment, JetParameters};
use serde::Deserialize;

use crate::manifest::RunManifest;
use crate::{CliResult, Failure, GridFormat, ModelArgs};

/// Settings file shared by `eval`, `grid` and `fit`. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Preset name or inline drone record.
    pub drone: Option<DroneSpec>,
    pub env: Option<Environment>,
    pub params: Option<JetParameters>,
    pub s: Option<f64>,
    pub r: Option<f64>,
    pub clamp_near_field: Option<bool>,
    pub extent: Option<[f64; 3]>,
    pub resolution: Option<f64>,
    pub format: Option<GridFormat>,
    pub ambient: Option<f64>,
    pub ambient_window: Option<f64>,
}

/// Reads a file, recording its digest in the manifest.
pub fn read_input(path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<u8>> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::usage)?;
    manifest.add_input(path, &bytes);
    Ok(bytes)
}

pub fn load_settings(args: &ModelArgs, manifest: &mut RunManifest) -> CliResult<Settings> {
    let Some(path) = &args.config else {
        return Ok(Settings::default());
    };
    let bytes = read_input(path, manifest)?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("invalid settings file {}", path.display()))
        .map_err(Failure::usage)
}

/// Vehicle from a preset or from explicit geometry, flags over file.
pub fn resolve_drone(args: &ModelArgs, settings: &Settings) -> CliResult<DroneSpec> {
    let base = match &args.drone {
        Some(name) => Some(presets::find(name).map_err(Failure::usage)?),
        None => settings.drone.clone(),
    };
    let overridden =
        args.mass.is_some() || args.prop_diameter.is_some() || args.motor_distance.is_some();
    let mut drone = match base {
        Some(d) => d,
        None => {
            let (Some(mass), Some(diameter), Some(l)) =
                (args.mass, args.prop_diameter, args.motor_distance)
            else {
                return Err(Failure::usage(anyhow!(
                    "no drone given: pass --drone <preset> or all of --mass, --prop-diameter and --motor-distance"
                )));
            };
            DroneSpec {
                name: "custom".into(),
                mass,
                propeller_radius: 0.5 * diameter,
                n_propellers: 4,
                motor_distance: l,
                cant: downwash::Cant::Uncanted,
            }
        }
    };
    if let Some(m) = args.mass {
        drone.mass = m;
    }
    if let Some(d) = args.prop_diameter {
        drone.propeller_radius = 0.5 * d;
    }
    if let Some(l) = args.motor_distance {
        drone.motor_distance = l;
    }
    if let Some(n) = args.n_props {
        drone.n_propellers = n;
    }
    if overridden && args.drone.is_some() {
        drone.name = format!("{} (modified)", drone.name);
    }
    drone.validate().map_err(Failure::usage)?;
    Ok(drone)
}

pub fn resolve_env(args: &ModelArgs, settings: &Settings) -> Environment {
    let mut env = settings.env.unwrap_or_default();
    if let Some(p) = args.pressure {
        env.pressure = p;
    }
    if let Some(t) = args.temperature {
        env.temperature = t;
    }
    env
}

pub fn resolve_params(settings: &Settings) -> CliResult<JetParameters> {
    let params = settings.params.unwrap_or_default();
    params.validate().map_err(Failure::usage)?;
    Ok(params)
}
