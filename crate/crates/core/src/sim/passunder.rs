use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::compensation::{downwash_at_relative_position, power_ratio, throttle_compensation};
use super::plant::Plant;
use super::{Result, SimError};
use crate::model::{
    DownwashField, DroneSpec, Environment, JetParameters, NearFieldPolicy, FAR_FIELD_START,
};

pub const SIM_CSV_COLUMNS: [&str; 8] = [
    "t_s", "x_m", "z_m", "z_err_m", "u_d_mps", "alpha", "beta", "throttle",
];

/// PD gains on height error (per m) and climb rate (per m/s), in throttle units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub kd: f64,
}

impl Gains {
    /// Critically damped gains reaching the 2% band after `settling_time`.
    ///
    /// Around hover, thrust grows with throttle to the power 4/3, so one unit
    /// of throttle buys `4g/3` of acceleration.
    pub fn critically_damped(settling_time: f64, gravity: f64) -> Self {
        // 2% settling of a critically damped pair happens at ω t ≈ 5.834.
        let omega = 5.8339 / settling_time;
        let accel_per_throttle = 4.0 / 3.0 * gravity;
        Gains {
            kp: omega * omega / accel_per_throttle,
            kd: 2.0 * omega / accel_per_throttle,
        }
    }
}

fn default_upper_height() -> f64 {
    3.0
}
fn default_timestep() -> f64 {
    0.002
}
fn default_true() -> bool {
    true
}
fn default_throttle_max() -> f64 {
    2.0
}

/// Scenario description. Lengths in m, speeds in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Hovering source of downwash. Absent means still air.
    #[serde(default)]
    pub upper_drone: Option<DroneSpec>,
    pub lower_drone: DroneSpec,
    #[serde(default)]
    pub env: Environment,
    #[serde(default)]
    pub params: JetParameters,
    #[serde(default = "default_upper_height")]
    pub upper_height: f64,
    pub vertical_separation: f64,
    /// Defaults to one upper motor distance per second.
    #[serde(default)]
    pub crossing_speed: Option<f64>,
    /// Length of the straight path, centered below the upper drone.
    /// Defaults to 16 upper motor distances.
    #[serde(default)]
    pub horizontal_span: Option<f64>,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    /// Defaults to critically damped gains with a 1 s settling time.
    #[serde(default)]
    pub gains: Option<Gains>,
    #[serde(default = "default_true")]
    pub compensation_enabled: bool,
    #[serde(default)]
    pub clamp_near_field: bool,
    /// Standard deviation of additive height-measurement noise.
    #[serde(default)]
    pub height_noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_throttle_max")]
    pub throttle_max: f64,
}

impl SimConfig {
    pub fn new(
        upper_drone: Option<DroneSpec>,
        lower_drone: DroneSpec,
        vertical_separation: f64,
    ) -> Self {
        SimConfig {
            upper_drone,
            lower_drone,
            env: Environment::default(),
            params: JetParameters::UNIFIED,
            upper_height: default_upper_height(),
            vertical_separation,
            crossing_speed: None,
            horizontal_span: None,
            timestep: default_timestep(),
            gains: None,
            compensation_enabled: true,
            clamp_near_field: false,
            height_noise_std: 0.0,
            seed: 0,
            throttle_max: default_throttle_max(),
        }
    }

    fn reference_length(&self) -> f64 {
        self.upper_drone
            .as_ref()
            .unwrap_or(&self.lower_drone)
            .motor_distance
    }

    pub fn resolved_crossing_speed(&self) -> f64 {
        self.crossing_speed
            .unwrap_or_else(|| self.reference_length())
    }

    pub fn resolved_span(&self) -> f64 {
        self.horizontal_span
            .unwrap_or_else(|| 16.0 * self.reference_length())
    }

    pub fn resolved_gains(&self) -> Gains {
        self.gains
            .unwrap_or_else(|| Gains::critically_damped(1.0, self.env.gravity))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(SimError::Config { field, reason });
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                bad(field, format!("{v} must be positive"))
            }
        };
        positive("timestep", self.timestep)?;
        positive("vertical_separation", self.vertical_separation)?;
        positive("crossing_speed", self.resolved_crossing_speed())?;
        positive("horizontal_span", self.resolved_span())?;
        positive("throttle_max", self.throttle_max)?;
        let gains = self.resolved_gains();
        positive("gains.kp", gains.kp)?;
        if !(gains.kd >= 0.0 && gains.kd.is_finite()) {
            return bad("gains.kd", format!("{} must be non-negative", gains.kd));
        }
        if !(self.height_noise_std >= 0.0 && self.height_noise_std.is_finite()) {
            return bad(
                "height_noise_std",
                format!("{} must be non-negative", self.height_noise_std),
            );
        }
        if !self.upper_height.is_finite() {
            return bad("upper_height", "must be finite".into());
        }
        self.lower_drone.validate()?;
        if let Some(upper) = &self.upper_drone {
            upper.validate()?;
            let s_norm = self.vertical_separation / upper.motor_distance;
            if s_norm < FAR_FIELD_START && !self.clamp_near_field {
                return bad(
                    "vertical_separation",
                    format!(
                        "{} m is {s_norm:.3} upper motor distances, inside the near field (< {FAR_FIELD_START}); enable clamp_near_field to proceed",
                        self.vertical_separation
                    ),
                );
            }
        }
        self.params.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimSample {
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "z_m")]
    pub z: f64,
    /// `z - z_ref`, negative below the reference.
    #[serde(rename = "z_err_m")]
    pub z_err: f64,
    #[serde(rename = "u_d_mps")]
    pub u_d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub throttle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub rmse_mm: f64,
    pub mean_err_mm: f64,
    pub max_abs_err_mm: f64,
    pub compensation_enabled: bool,
    pub timestep: f64,
    /// Steps at which a power ratio below one had to be clamped.
    pub clamped_beta_steps: usize,
    /// Largest commanded aerodynamic power, W.
    pub peak_power_w: f64,
    #[serde(skip)]
    pub series: Vec<SimSample>,
}

impl SimResult {
    /// Writes the time series as CSV, preceded by `# ` comment lines.
    pub fn write_csv<W: Write>(&self, mut sink: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(sink, "# {c}")?;
        }
        writeln!(sink, "{}", SIM_CSV_COLUMNS.join(","))?;
        for s in &self.series {
            writeln!(
                sink,
                "{},{},{},{},{},{},{},{}",
                s.t, s.x, s.z, s.z_err, s.u_d, s.alpha, s.beta, s.throttle
            )?;
        }
        Ok(())
    }
}

struct Inputs {
    u_d: f64,
    alpha: f64,
    beta: f64,
    throttle: f64,
    beta_clamped: bool,
}

struct Scenario {
    upper: Option<DownwashField>,
    plant: Plant,
    policy: NearFieldPolicy,
    upper_height: f64,
    z_ref: f64,
    x0: f64,
    speed: f64,
    gains: Gains,
    compensate: bool,
    throttle_max: f64,
}

impl Scenario {
    fn inputs(&self, t: f64, z: f64, vz: f64, noise: f64) -> Result<Inputs> {
        let x = self.x0 + self.speed * t;
        let u_d = match &self.upper {
            Some(field) => {
                downwash_at_relative_position(field, [x, 0.0, z - self.upper_height], self.policy)?
            }
            None => 0.0,
        };
        let alpha = u_d / self.plant.induced_velocity;
        let beta = power_ratio(alpha);
        let base = 1.0 - self.gains.kp * (z + noise - self.z_ref) - self.gains.kd * vz;
        let (scale, beta_clamped) = if self.compensate {
            let c = throttle_compensation(beta);
            (c.scale, c.clamped)
        } else {
            (1.0, false)
        };
        Ok(Inputs {
            u_d,
            alpha,
            beta,
            throttle: (base * scale).clamp(0.0, self.throttle_max),
            beta_clamped,
        })
    }

    fn derivative(&self, t: f64, [z, vz]: [f64; 2], noise: f64) -> Result<[f64; 2]> {
        let u = self.inputs(t, z, vz, noise)?;
        let thrust = self.plant.thrust(u.throttle, u.u_d)?;
        Ok([vz, thrust / self.plant.mass - self.plant.gravity])
    }
}

/// Integrates the vertical dynamics of the lower drone with fixed-step RK4
/// while it crosses below the upper drone at constant speed.
pub fn run_passunder(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let upper = match &config.upper_drone {
        Some(d) => Some(DownwashField::new(d, &config.env, &config.params)?),
        None => None,
    };
    let span = config.resolved_span();
    let speed = config.resolved_crossing_speed();
    let scenario = Scenario {
        upper,
        plant: Plant::new(&config.lower_drone, &config.env)?,
        policy: if config.clamp_near_field {
            NearFieldPolicy::Clamp
        } else {
            NearFieldPolicy::Reject
        },
        upper_height: config.upper_height,
        z_ref: config.upper_height - config.vertical_separation,
        x0: -0.5 * span,
        speed,
        gains: config.resolved_gains(),
        compensate: config.compensation_enabled,
        throttle_max: config.throttle_max,
    };

    let dt = config.timestep;
    let steps = (span / speed / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.height_noise_std).map_err(|e| SimError::Config {
        field: "height_noise_std",
        reason: e.to_string(),
    })?;

    let mut state = [scenario.z_ref, 0.0];
    let mut series = Vec::with_capacity(steps + 1);
    let mut clamped_beta_steps = 0;
    let mut peak_power_w: f64 = 0.0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let noise = if config.height_noise_std > 0.0 {
            normal.sample(&mut rng)
        } else {
            0.0
        };
        let u = scenario.inputs(t, state[0], state[1], noise)?;
        clamped_beta_steps += usize::from(u.beta_clamped);
        peak_power_w = peak_power_w.max(scenario.plant.power(u.throttle));
        series.push(SimSample {
            t,
            x: scenario.x0 + speed * t,
            z: state[0],
            z_err: state[0] - scenario.z_ref,
            u_d: u.u_d,
            alpha: u.alpha,
            beta: u.beta,
            throttle: u.throttle,
        });
        if k == steps {
            break;
        }
        let f = |t: f64, s: [f64; 2]| scenario.derivative(t, s, noise);
        let add = |s: [f64; 2], d: [f64; 2], h: f64| [s[0] + h * d[0], s[1] + h * d[1]];
        let k1 = f(t, state)?;
        let k2 = f(t + 0.5 * dt, add(state, k1, 0.5 * dt))?;
        let k3 = f(t + 0.5 * dt, add(state, k2, 0.5 * dt))?;
        let k4 = f(t + dt, add(state, k3, dt))?;
        for i in 0..2 {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let n = series.len() as f64;
    let mean = series.iter().map(|s| s.z_err).sum::<f64>() / n;
    let rms = (series.iter().map(|s| s.z_err * s.z_err).sum::<f64>() / n).sqrt();
    let max_abs = series.iter().map(|s| s.z_err.abs()).fold(0.0, f64::max);
    Ok(SimResult {
        rmse_mm: 1e3 * rms,
        mean_err_mm: 1e3 * mean,
        max_abs_err_mm: 1e3 * max_abs,
        compensation_enabled: config.compensation_enabled,
        timestep: dt,
        clamped_beta_steps,
        peak_power_w,
        series,
    })
}

/// Compensated and uncompensated runs of the same scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub compensated: SimResult,
    pub uncompensated: SimResult,
    /// `RMSE_off / RMSE_on`; one when the two are equal, including both zero.
    pub rmse_ratio: f64,
}

pub fn compare(config: &SimConfig) -> Result<Comparison> {
    let on = run_passunder(&SimConfig {
        compensation_enabled: true,
        ..config.clone()
    })?;
    let off = run_passunder(&SimConfig {
        compensation_enabled: false,
        ..config.clone()
    })?;
    let rmse_ratio = if off.rmse_mm == on.rmse_mm {
        1.0
    } else {
        off.rmse_mm / on.rmse_mm
    };
    Ok(Comparison {
        compensated: on,
        uncompensated: off,
        rmse_ratio,
    })
}
