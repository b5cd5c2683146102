use std::fmt;

use serde::{Deserialize, Serialize};

use super::fit::{fit_jet_parameters_with, fit_slice, JetFitOptions, SliceFit, SliceWeighting};
use super::grid::{bin_grid, radial_profiles, SkippedSlice};
use super::log::{estimate_ambient, filter_hover, subtract_ambient, MeasurementRecord};
use super::nearfield::{fit_bimodal, merge_distance, BimodalFit, MergeOutcome};
use super::ttest::{residual_test, unit_intervals, ResidualTest, ALPHA};
use super::{PipelineError, Result};
use crate::model::{
    centerline_velocity_norm, half_width_norm, DroneSpec, Environment, JetParameters,
    FAR_FIELD_START,
};

/// Where the background flow speed comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientSource {
    /// Known value in m/s.
    Fixed(f64),
    /// Median probe reading over the first `window_s` seconds of each log.
    Estimate { window_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Largest drone speed counted as hovering, m/s.
    pub hover_speed_max: f64,
    pub ambient: AmbientSource,
    /// Grid cell edge in units of `l`.
    pub resolution_norm: f64,
    /// Thickness of the depth slices in units of `l`.
    pub slice_thickness_norm: f64,
    pub weighting: SliceWeighting,
    /// Deepest layer that enters the near-field peak-separation fits.
    pub bimodal_max_s_norm: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            hover_speed_max: 0.1,
            ambient: AmbientSource::Estimate { window_s: 10.0 },
            resolution_norm: 0.33,
            slice_thickness_norm: 0.33,
            weighting: SliceWeighting::InverseRms,
            bimodal_max_s_norm: 3.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ambient,
    Grid,
    Profiles,
    JointFit,
    NearField,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ambient => "ambient estimation",
            Stage::Grid => "grid binning",
            Stage::Profiles => "radial profiles",
            Stage::JointFit => "joint parameter fit",
            Stage::NearField => "near-field merge fit",
        })
    }
}

/// A pipeline error tagged with the stage that raised it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: Stage,
    /// Index of the offending log for per-log stages.
    pub log: Option<usize>,
    pub source: PipelineError,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.log {
            Some(i) => write!(f, "{} (log {}): {}", self.stage, i + 1, self.source),
            None => write!(f, "{}: {}", self.stage, self.source),
        }
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn at(stage: Stage) -> impl Fn(PipelineError) -> StageError {
    move |source| StageError {
        stage,
        log: None,
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSummary {
    pub records: usize,
    pub hover_records: usize,
    pub ambient_mps: f64,
}

/// Fitted values relative to the unified constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterDeltas {
    pub bd: f64,
    pub spreading_rate: f64,
    pub s0_norm: f64,
    pub bd_relative: f64,
    pub spreading_rate_relative: f64,
    pub s0_norm_relative: f64,
}

impl ParameterDeltas {
    pub fn between(fitted: &JetParameters, reference: &JetParameters) -> Self {
        let rel = |a: f64, b: f64| (a - b) / b.abs();
        ParameterDeltas {
            bd: fitted.bd - reference.bd,
            spreading_rate: fitted.spreading_rate - reference.spreading_rate,
            s0_norm: fitted.s0_norm - reference.s0_norm,
            bd_relative: rel(fitted.bd, reference.bd),
            spreading_rate_relative: rel(fitted.spreading_rate, reference.spreading_rate),
            s0_norm_relative: rel(fitted.s0_norm, reference.s0_norm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedSlice {
    pub s_norm: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub jet_parameters: JetParameters,
    pub reference_parameters: JetParameters,
    pub deltas: ParameterDeltas,
    pub cone_angle_deg: f64,
    pub warm_start: JetParameters,
    pub joint_residual_rms: f64,
    pub joint_iterations: usize,
    pub slices: Vec<SliceFit>,
    pub skipped_slices: Vec<SkippedSlice>,
    pub failed_slices: Vec<FailedSlice>,
    pub bimodal_fits: Vec<BimodalFit>,
    /// Absent when no near-field layers were recorded.
    pub merge: Option<MergeOutcome>,
    pub residual_tests: Vec<ResidualTest>,
    pub logs: Vec<LogSummary>,
    pub grid_cells: usize,
    pub skipped_above_rotor: usize,
    pub induced_velocity: f64,
    /// Set for canted drones, whose jets are only qualitatively described.
    pub qualitative_only: bool,
}

/// Runs every stage on `logs`, which are pooled after per-log ambient
/// correction.
pub fn run_pipeline(
    logs: &[Vec<MeasurementRecord>],
    drone: &DroneSpec,
    env: &Environment,
    options: &PipelineOptions,
) -> std::result::Result<FitReport, StageError> {
    if logs.is_empty() || logs.iter().all(Vec::is_empty) {
        return Err(at(Stage::Grid)(PipelineError::EmptyInput));
    }

    let mut pooled = Vec::new();
    let mut summaries = Vec::with_capacity(logs.len());
    for (i, log) in logs.iter().enumerate() {
        let ambient = match options.ambient {
            AmbientSource::Fixed(v) => v,
            AmbientSource::Estimate { window_s } => {
                estimate_ambient(log, window_s).map_err(|source| StageError {
                    stage: Stage::Ambient,
                    log: Some(i),
                    source,
                })?
            }
        };
        let hover = subtract_ambient(&filter_hover(log, options.hover_speed_max), ambient);
        summaries.push(LogSummary {
            records: log.len(),
            hover_records: hover.len(),
            ambient_mps: ambient,
        });
        pooled.extend(hover);
    }

    let grid = bin_grid(&pooled, drone, env, options.resolution_norm).map_err(at(Stage::Grid))?;
    let extraction =
        radial_profiles(&grid, options.slice_thickness_norm).map_err(at(Stage::Profiles))?;

    let mut slices = Vec::new();
    let mut failed_slices = Vec::new();
    for profile in &extraction.profiles {
        match fit_slice(profile) {
            Ok(fit) => slices.push(fit),
            Err(e) => failed_slices.push(FailedSlice {
                s_norm: profile.s_norm,
                reason: e.to_string(),
            }),
        }
    }

    let joint = fit_jet_parameters_with(
        &slices,
        &JetFitOptions {
            s_min_norm: FAR_FIELD_START,
            weighting: options.weighting,
        },
    )
    .map_err(at(Stage::JointFit))?;

    let bimodal_fits: Vec<BimodalFit> = grid
        .y_profiles(options.bimodal_max_s_norm)
        .iter()
        .filter_map(|p| fit_bimodal(p).ok())
        .collect();
    let merge = if bimodal_fits.iter().any(|f| f.s_norm < FAR_FIELD_START) {
        match merge_distance(&bimodal_fits) {
            Ok(outcome) => Some(outcome),
            Err(PipelineError::InsufficientFits { .. }) => None,
            Err(e) => return Err(at(Stage::NearField)(e)),
        }
    } else {
        None
    };

    let samples = similarity_samples(&pooled, drone, grid.induced_velocity, &joint.params)
        .map_err(at(Stage::JointFit))?;
    let residual_tests = residual_test(&samples, &unit_intervals(6), ALPHA);

    let reference = JetParameters::UNIFIED;
    Ok(FitReport {
        jet_parameters: joint.params,
        reference_parameters: reference,
        deltas: ParameterDeltas::between(&joint.params, &reference),
        cone_angle_deg: joint.params.cone_angle_deg(),
        warm_start: joint.warm_start,
        joint_residual_rms: joint.residual_rms,
        joint_iterations: joint.iterations,
        slices,
        skipped_slices: extraction.skipped,
        failed_slices,
        bimodal_fits,
        merge,
        residual_tests,
        logs: summaries,
        grid_cells: grid.cells.len(),
        skipped_above_rotor: grid.skipped_above_rotor,
        induced_velocity: grid.induced_velocity,
        qualitative_only: drone.is_canted(),
    })
}

/// `(ξ, u / U_c)` for every far-field record under the fitted parameters.
fn similarity_samples(
    records: &[MeasurementRecord],
    drone: &DroneSpec,
    induced_velocity: f64,
    params: &JetParameters,
) -> Result<Vec<(f64, f64)>> {
    let l = drone.motor_distance;
    let mut out = Vec::new();
    for rec in records {
        let [px, py, pz] = rec.drone_position;
        let s = pz / l;
        if s < FAR_FIELD_START {
            continue;
        }
        let u_c = centerline_velocity_norm(s, params)?;
        let r_half = half_width_norm(s, params)?;
        let xi = (px / l).hypot(py / l) / r_half;
        out.push((xi, rec.anemometer_speed / induced_velocity / u_c));
    }
    Ok(out)
}
