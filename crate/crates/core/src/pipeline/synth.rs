//! Synthetic flight logs mirroring a grid measurement campaign, generated
//! from the model itself. Used as a test oracle and for bundled fixtures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::log::MeasurementRecord;
use super::{PipelineError, Result};
use crate::model::{
    DownwashField, DroneSpec, Environment, FlowPoint, JetParameters, NearFieldPolicy,
    FAR_FIELD_START,
};

/// What to synthesize for plan points with `s/l < 2.5`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NearFieldModel {
    /// Near-field points are an error.
    #[default]
    Reject,
    /// Use the far-field value of the `s/l = 2.5` slice.
    Clamp,
    /// Four Gaussian rotor jets at the motor positions that converge
    /// linearly onto the axis and merge at `merge_distance` (units of `l`).
    /// Between the merge distance and 2.5 the clamped far field is used.
    Rotors { merge_distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the multiplicative Gaussian noise.
    pub relative_std: f64,
    /// Constant background flow added to every reading, m/s.
    pub ambient: f64,
}

/// Probe positions to visit, as normalized offsets `(x, y, s)` of the probe
/// relative to the drone (`s` positive below the rotor plane).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub points: Vec<[f64; 3]>,
    /// Readings taken while hovering at each point.
    pub hover_samples: usize,
    /// s
    pub sample_interval: f64,
    /// Readings taken on the ground before takeoff.
    pub pre_takeoff_samples: usize,
    /// Drone speed logged on transit samples between points, m/s.
    pub transit_speed: f64,
    pub near_field: NearFieldModel,
}

impl FlightPlan {
    fn with_points(points: Vec<[f64; 3]>) -> Self {
        FlightPlan {
            points,
            hover_samples: 3,
            sample_interval: 1.0,
            pre_takeoff_samples: 20,
            transit_speed: 0.5,
            near_field: NearFieldModel::Reject,
        }
    }

    /// Full square grid `|x|, |y| <= half_extent` at every depth in `depths`.
    pub fn grid(half_extent: f64, resolution: f64, depths: &[f64]) -> Self {
        let n = (half_extent / resolution + 1e-9).floor() as i64;
        let mut points = Vec::new();
        for &s in depths {
            for i in -n..=n {
                for j in -n..=n {
                    points.push([i as f64 * resolution, j as f64 * resolution, s]);
                }
            }
        }
        Self::with_points(points)
    }

    /// Points along both axes and both diagonals, a sparser pattern with the
    /// same radial coverage.
    pub fn star(half_extent: f64, resolution: f64, depths: &[f64]) -> Self {
        let n = (half_extent / resolution + 1e-9).floor() as i64;
        let mut points = Vec::new();
        for &s in depths {
            points.push([0.0, 0.0, s]);
            for k in 1..=n {
                let d = k as f64 * resolution;
                for (dx, dy) in [
                    (1, 0),
                    (-1, 0),
                    (0, 1),
                    (0, -1),
                    (1, 1),
                    (1, -1),
                    (-1, 1),
                    (-1, -1),
                ] {
                    points.push([dx as f64 * d, dy as f64 * d, s]);
                }
            }
        }
        Self::with_points(points)
    }

    /// Multiples of `resolution` from `from` to `to`, inclusive.
    pub fn depths(resolution: f64, from: f64, to: f64) -> Vec<f64> {
        let first = (from / resolution - 1e-9).ceil() as i64;
        let last = (to / resolution + 1e-9).floor() as i64;
        (first..=last).map(|k| k as f64 * resolution).collect()
    }

    pub fn with_near_field(mut self, model: NearFieldModel) -> Self {
        self.near_field = model;
        self
    }

    pub fn with_hover_samples(mut self, n: usize) -> Self {
        self.hover_samples = n;
        self
    }
}

/// Offset of each motor from the axis along x and y, in units of `l`.
const MOTOR_OFFSET: f64 = 0.353_553_390_593_273_8; // 1 / (2√2)

fn rotor_jets(field: &DownwashField, merge_distance: f64, [x, y, s]: [f64; 3]) -> f64 {
    let drone = field.drone();
    let a = MOTOR_OFFSET * (1.0 - s / merge_distance).max(0.0);
    let sigma = drone.propeller_radius / drone.motor_distance * (0.5 + 0.25 * s);
    let k = 1.0 / (2.0 * sigma * sigma);
    let blob = |cx: f64, cy: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) * k).exp();
    let sum = blob(a, a) + blob(a, -a) + blob(-a, a) + blob(-a, -a);
    // scaled so the lateral profile through the axis peaks near U_H
    0.5 * field.induced_velocity() * (a * a * k).exp() * sum
}

/// Speed at the probe for a drone at `position` (m), given its normalized
/// `offset` from the probe.
fn model_speed(
    field: &DownwashField,
    near: NearFieldModel,
    offset: [f64; 3],
    position: [f64; 3],
) -> Result<f64> {
    let s = offset[2];
    let point = FlowPoint {
        s: position[2],
        r: position[0].hypot(position[1]),
        theta: 0.0,
    };
    let policy = match near {
        NearFieldModel::Reject => NearFieldPolicy::Reject,
        NearFieldModel::Clamp => NearFieldPolicy::Clamp,
        NearFieldModel::Rotors { merge_distance } => {
            if s < merge_distance.min(FAR_FIELD_START) {
                return Ok(rotor_jets(field, merge_distance, offset));
            }
            NearFieldPolicy::Clamp
        }
    };
    Ok(field.sample(&point, policy)?.speed)
}

/// Generates a deterministic log for `plan`.
///
/// The drone first sits on the ground below the probe, then visits every plan
/// point: one transit sample (moving, filtered out later) followed by
/// `hover_samples` readings with zero drone speed. Readings are
/// `u (1 + ε) + ambient`, `ε ~ N(0, relative_std)`, clamped at zero.
pub fn synthesize_log(
    drone: &DroneSpec,
    env: &Environment,
    params: &JetParameters,
    plan: &FlightPlan,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    if !(noise.relative_std >= 0.0 && noise.ambient >= 0.0) {
        return Err(PipelineError::Degenerate(
            "noise levels must be non-negative".into(),
        ));
    }
    if !(plan.sample_interval > 0.0) {
        return Err(PipelineError::Degenerate(
            "sample interval must be positive".into(),
        ));
    }
    let field = DownwashField::new(drone, env, params)?;
    let l = field.length_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.relative_std)
        .map_err(|e| PipelineError::Degenerate(e.to_string()))?;

    let position = |[x, y, s]: [f64; 3]| [-x * l, -y * l, s * l];
    let ground = [0.0, 0.0, -1.0];
    let mut records =
        Vec::with_capacity(plan.pre_takeoff_samples + plan.points.len() * (plan.hover_samples + 1));
    let mut time = 0.0;
    let mut push = |records: &mut Vec<MeasurementRecord>, pos, speed, reading: f64| {
        records.push(MeasurementRecord {
            time,
            drone_position: pos,
            drone_speed: speed,
            anemometer_speed: reading.max(0.0),
        });
        time += plan.sample_interval;
    };

    for _ in 0..plan.pre_takeoff_samples {
        push(&mut records, ground, 0.0, noise.ambient);
    }
    let mut previous = ground;
    for &offset in &plan.points {
        let target = position(offset);
        let u = model_speed(&field, plan.near_field, offset, target)?;
        let midway = [
            0.5 * (previous[0] + target[0]),
            0.5 * (previous[1] + target[1]),
            0.5 * (previous[2] + target[2]),
        ];
        // transient reading while the flow re-develops
        push(
            &mut records,
            midway,
            plan.transit_speed,
            1.3 * u + noise.ambient,
        );
        for _ in 0..plan.hover_samples {
            let reading = u * (1.0 + normal.sample(&mut rng)) + noise.ambient;
            push(&mut records, target, 0.0, reading);
        }
        previous = target;
    }
    Ok(records)
}
