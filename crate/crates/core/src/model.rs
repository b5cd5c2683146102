//! Closed-form mean downwash below a hovering multirotor.
//!
//! The combined rotor flow is treated as a round turbulent jet. Velocities are
//! normalized by the momentum-theory induced velocity at hover and lengths by
//! the diagonal motor-to-motor distance `l`, which makes the far field of
//! differently sized vehicles collapse onto one set of [`JetParameters`].

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Molar mass of dry air, kg/mol.
pub const MOLAR_MASS_AIR: f64 = 0.028966;
/// Universal gas constant, J/(K·mol).
pub const GAS_CONSTANT: f64 = 8.3144;
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Normalized distance below the rotor plane at which the rotor jets have merged.
pub const FAR_FIELD_START: f64 = 2.5;

pub type Result<T> = std::result::Result<T, ModelError>;

/// Tilt of the propeller axes relative to the body z-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cant {
    Uncanted,
    Inward,
    Outward,
}

impl Cant {
    pub fn as_str(self) -> &'static str {
        match self {
            Cant::Uncanted => "uncanted",
            Cant::Inward => "inward",
            Cant::Outward => "outward",
        }
    }
}

/// Physical identity of a vehicle.
///
/// `motor_distance` is the diagonal motor-to-motor distance, the length scale
/// every position is normalized by.
#[derive(Debug, Clone, PartialEq)]
pub struct DroneSpec {
    pub name: String,
    /// kg
    pub mass: f64,
    /// m
    pub propeller_radius: f64,
    pub n_propellers: u32,
    /// m
    pub motor_distance: f64,
    pub cant: Cant,
}

impl DroneSpec {
    pub fn new(
        name: impl Into<String>,
        mass: f64,
        propeller_radius: f64,
        n_propellers: u32,
        motor_distance: f64,
        cant: Cant,
    ) -> Result<Self> {
        let spec = DroneSpec {
            name: name.into(),
            mass,
            propeller_radius,
            n_propellers,
            motor_distance,
            cant,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("propeller radius", self.propeller_radius)?;
        positive("motor distance", self.motor_distance)?;
        if self.n_propellers == 0 {
            return Err(ModelError::domain(
                "propeller count",
                "at least one propeller is required",
            ));
        }
        if self.propeller_radius >= self.motor_distance {
            return Err(ModelError::domain(
                "geometry",
                format!(
                    "propeller diameter {} m does not fit a motor distance of {} m",
                    2.0 * self.propeller_radius,
                    self.motor_distance
                ),
            ));
        }
        Ok(())
    }

    pub fn propeller_diameter(&self) -> f64 {
        2.0 * self.propeller_radius
    }

    /// Total rotor disk area, m².
    pub fn disk_area(&self) -> f64 {
        PI * self.propeller_radius.powi(2) * f64::from(self.n_propellers)
    }

    pub fn is_canted(&self) -> bool {
        self.cant != Cant::Uncanted
    }
}

/// Ambient conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Environment {
    /// Absolute pressure, Pa.
    pub pressure: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Dynamic viscosity, Pa·s. Only used for the Reynolds number diagnostic.
    pub viscosity: Option<f64>,
    /// m/s²
    pub gravity: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            pressure: 101_325.0,
            temperature: 293.15,
            viscosity: None,
            gravity: STANDARD_GRAVITY,
        }
    }
}

impl Environment {
    pub fn new(pressure: f64, temperature: f64) -> Self {
        Environment {
            pressure,
            temperature,
            ..Default::default()
        }
    }

    pub fn with_viscosity(mut self, viscosity: f64) -> Self {
        self.viscosity = Some(viscosity);
        self
    }

    pub fn density(&self) -> Result<f64> {
        air_density(self)
    }
}

/// The dimensionless triple describing the normalized far-field jet
/// (jet exit velocity fixed to one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetParameters {
    /// Product of the decay constant and the exit diameter, in units of `l`.
    pub bd: f64,
    /// Linear growth rate of the half-width.
    pub spreading_rate: f64,
    /// Virtual origin, in units of `l`.
    pub s0_norm: f64,
}

impl JetParameters {
    /// Parameters fitted jointly over all uncanted vehicles.
    pub const UNIFIED: JetParameters = JetParameters {
        bd: 10.11,
        spreading_rate: 0.07668,
        s0_norm: -5.817,
    };

    pub fn new(bd: f64, spreading_rate: f64, s0_norm: f64) -> Result<Self> {
        let params = JetParameters {
            bd,
            spreading_rate,
            s0_norm,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        positive("bd", self.bd)?;
        positive("spreading rate", self.spreading_rate)?;
        if !self.s0_norm.is_finite() || self.s0_norm >= FAR_FIELD_START {
            return Err(ModelError::domain(
                "virtual origin",
                format!(
                    "s0 = {} must lie upstream of the far field start {FAR_FIELD_START}",
                    self.s0_norm
                ),
            ));
        }
        Ok(())
    }

    /// Full opening angle of the jet cone, radians.
    pub fn cone_angle(&self) -> f64 {
        2.0 * self.spreading_rate.atan()
    }

    pub fn cone_angle_deg(&self) -> f64 {
        self.cone_angle().to_degrees()
    }
}

impl Default for JetParameters {
    fn default() -> Self {
        JetParameters::UNIFIED
    }
}

/// A point in the cylindrical flow frame whose axis points along the
/// downwash (opposite to the body z-axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    /// Distance below the rotor plane, m.
    pub s: f64,
    /// Distance from the downwash axis, m.
    pub r: f64,
    /// Azimuth in `[0, 2π)`. The model is axisymmetric and ignores it.
    pub theta: f64,
}

impl FlowPoint {
    pub fn new(s: f64, r: f64, theta: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(ModelError::domain("s", "must be finite"));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(ModelError::domain("r", format!("{r} must be >= 0")));
        }
        if !(0.0..2.0 * PI).contains(&theta) {
            return Err(ModelError::domain(
                "theta",
                format!("{theta} not in [0, 2π)"),
            ));
        }
        Ok(FlowPoint { s, r, theta })
    }

    pub fn on_axis(s: f64) -> Self {
        FlowPoint {
            s,
            r: 0.0,
            theta: 0.0,
        }
    }
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::domain(
            what,
            format!("{value} must be positive"),
        ))
    }
}

/// Ideal-gas air density, kg/m³.
pub fn air_density(env: &Environment) -> Result<f64> {
    positive("pressure", env.pressure)?;
    positive("temperature", env.temperature)?;
    Ok(env.pressure * MOLAR_MASS_AIR / (GAS_CONSTANT * env.temperature))
}

/// Momentum-theory induced velocity at hover, m/s.
pub fn induced_hover_velocity(drone: &DroneSpec, density: f64, gravity: f64) -> Result<f64> {
    positive("mass", drone.mass)?;
    positive("propeller radius", drone.propeller_radius)?;
    positive("density", density)?;
    positive("gravity", gravity)?;
    if drone.n_propellers == 0 {
        return Err(ModelError::domain("propeller count", "must be >= 1"));
    }
    Ok((drone.mass * gravity / (2.0 * density * drone.disk_area())).sqrt())
}

fn check_downstream(s_norm: f64, params: &JetParameters) -> Result<f64> {
    let offset = s_norm - params.s0_norm;
    if offset.is_nan() || offset < 0.0 {
        return Err(ModelError::domain(
            "s/l",
            format!(
                "{s_norm} lies upstream of the virtual origin {}",
                params.s0_norm
            ),
        ));
    }
    Ok(offset)
}

/// Normalized centerline velocity `Bd / (s̃ - s̃₀)`.
pub fn centerline_velocity_norm(s_norm: f64, params: &JetParameters) -> Result<f64> {
    let offset = check_downstream(s_norm, params)?;
    if offset == 0.0 {
        return Err(ModelError::domain(
            "s/l",
            "centerline velocity is singular at the virtual origin",
        ));
    }
    Ok(params.bd / offset)
}

/// Normalized half-width `S (s̃ - s̃₀)`. Zero at the cone apex.
pub fn half_width_norm(s_norm: f64, params: &JetParameters) -> Result<f64> {
    let offset = check_downstream(s_norm, params)?;
    Ok(params.spreading_rate * offset)
}

/// Radial similarity profile of a round turbulent jet.
pub fn similarity_profile(xi: f64, centerline_velocity: f64) -> Result<f64> {
    if xi.is_nan() || xi < 0.0 {
        return Err(ModelError::domain("xi", format!("{xi} must be >= 0")));
    }
    Ok(similarity_shape(xi) * centerline_velocity)
}

/// `1 / (1 + (√2 - 1) ξ²)²`, equal to one half at `ξ = 1`.
#[inline]
pub fn similarity_shape(xi: f64) -> f64 {
    let denom = 1.0 + (SQRT_2 - 1.0) * xi * xi;
    1.0 / (denom * denom)
}

/// `r / r½`.
pub fn scaled_radial_position(r_norm: f64, r_half_norm: f64) -> Result<f64> {
    positive("half-width", r_half_norm)?;
    if r_norm.is_nan() || r_norm < 0.0 {
        return Err(ModelError::domain("r/l", format!("{r_norm} must be >= 0")));
    }
    Ok(r_norm / r_half_norm)
}

/// Maps an offset from the rotor plane center, expressed in the body frame
/// (z up), into the flow frame.
pub fn body_to_flow(body_offset: [f64; 3]) -> Result<FlowPoint> {
    let [x, y, z] = body_offset;
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err(ModelError::domain("body offset", "must be finite"));
    }
    if z > 0.0 {
        return Err(ModelError::domain(
            "body offset",
            format!("z = {z} is above the rotor plane"),
        ));
    }
    let mut theta = y.atan2(x);
    if theta < 0.0 {
        theta += 2.0 * PI;
    }
    if theta >= 2.0 * PI {
        theta = 0.0;
    }
    Ok(FlowPoint {
        s: -z,
        r: x.hypot(y),
        theta,
    })
}

/// `ρ U d / μ`.
pub fn reynolds_number(env: &Environment, speed: f64, length: f64) -> Result<f64> {
    let mu = env.viscosity.ok_or(ModelError::Unavailable("viscosity"))?;
    positive("viscosity", mu)?;
    Ok(air_density(env)? * speed * length / mu)
}

/// How to answer queries closer to the rotor plane than [`FAR_FIELD_START`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NearFieldPolicy {
    #[default]
    Reject,
    /// Evaluate the `s/l = 2.5` slice at the requested radius instead.
    Clamp,
}

/// Everything computed while evaluating one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// Mean downwash speed, m/s.
    pub speed: f64,
    /// Normalized distance the profile was evaluated at (after clamping).
    pub s_norm: f64,
    pub r_norm: f64,
    pub u_c_norm: f64,
    pub r_half_norm: f64,
    pub xi: f64,
    /// Dimensional centerline velocity, m/s.
    pub centerline_velocity: f64,
    /// True when the query was in the near field and has been clamped.
    pub clamped: bool,
    /// Set for canted vehicles, for which the model is only qualitative.
    pub qualitative_only: bool,
}

/// A drone's far field with the per-vehicle scales resolved once.
#[derive(Debug, Clone)]
pub struct DownwashField {
    drone: DroneSpec,
    params: JetParameters,
    induced_velocity: f64,
}

impl DownwashField {
    pub fn new(drone: &DroneSpec, env: &Environment, params: &JetParameters) -> Result<Self> {
        drone.validate()?;
        params.validate()?;
        let density = air_density(env)?;
        let induced_velocity = induced_hover_velocity(drone, density, env.gravity)?;
        Ok(DownwashField {
            drone: drone.clone(),
            params: *params,
            induced_velocity,
        })
    }

    pub fn drone(&self) -> &DroneSpec {
        &self.drone
    }

    pub fn params(&self) -> &JetParameters {
        &self.params
    }

    pub fn induced_velocity(&self) -> f64 {
        self.induced_velocity
    }

    pub fn length_scale(&self) -> f64 {
        self.drone.motor_distance
    }

    /// Half-width in meters at depth `s` (m).
    pub fn half_width(&self, s: f64) -> Result<f64> {
        Ok(half_width_norm(s / self.length_scale(), &self.params)? * self.length_scale())
    }

    pub fn sample(&self, point: &FlowPoint, policy: NearFieldPolicy) -> Result<FieldSample> {
        let l = self.length_scale();
        let mut s_norm = point.s / l;
        let r_norm = point.r / l;
        if r_norm.is_nan() || r_norm < 0.0 {
            return Err(ModelError::domain("r", format!("{} must be >= 0", point.r)));
        }
        let mut clamped = false;
        // NaN falls through to the domain checks below.
        if s_norm < FAR_FIELD_START {
            match policy {
                NearFieldPolicy::Reject => {
                    return Err(ModelError::NearFieldRequest {
                        s_norm,
                        threshold: FAR_FIELD_START,
                    })
                }
                NearFieldPolicy::Clamp => {
                    s_norm = FAR_FIELD_START;
                    clamped = true;
                }
            }
        }
        let u_c_norm = centerline_velocity_norm(s_norm, &self.params)?;
        let r_half_norm = half_width_norm(s_norm, &self.params)?;
        let xi = scaled_radial_position(r_norm, r_half_norm)?;
        let centerline_velocity = u_c_norm * self.induced_velocity;
        let speed = similarity_profile(xi, centerline_velocity)?;
        Ok(FieldSample {
            speed,
            s_norm,
            r_norm,
            u_c_norm,
            r_half_norm,
            xi,
            centerline_velocity,
            clamped,
            qualitative_only: self.drone.is_canted(),
        })
    }
}

/// Mean downwash speed (m/s) at a far-field point.
pub fn evaluate_far_field(
    drone: &DroneSpec,
    env: &Environment,
    params: &JetParameters,
    point: &FlowPoint,
) -> Result<f64> {
    evaluate_field(drone, env, params, point, NearFieldPolicy::Reject).map(|s| s.speed)
}

pub fn evaluate_field(
    drone: &DroneSpec,
    env: &Environment,
    params: &JetParameters,
    point: &FlowPoint,
    policy: NearFieldPolicy,
) -> Result<FieldSample> {
    DownwashField::new(drone, env, params)?.sample(point, policy)
}
