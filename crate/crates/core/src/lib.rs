//! Quadrotor downwash as a round turbulent jet.
//!
//! The mean downwash speed below a hovering quadrotor follows the similarity
//! solution of a round jet once the individual rotor jets have merged, about
//! 2.5 motor distances below the rotor plane. Speeds scale with the
//! momentum-theory induced velocity and lengths with the motor distance, so
//! one parameter set describes every vehicle.
//!
//! ```
//! use downwash::{evaluate_far_field, presets, Environment, FlowPoint, JetParameters};
//!
//! let kolibri = presets::find("kolibri")?;
//! let point = FlowPoint::on_axis(3.0 * kolibri.motor_distance);
//! let speed = evaluate_far_field(&kolibri, &Environment::default(), &JetParameters::UNIFIED, &point)?;
//! assert!((speed - 8.50).abs() < 0.085);
//! # Ok::<(), downwash::ModelError>(())
//! ```

pub mod error;
pub mod lsq;
pub mod model;
pub mod pipeline;
pub mod presets;
pub mod sim;
pub mod stats;

pub use error::ModelError;
pub use model::{
    air_density, body_to_flow, centerline_velocity_norm, evaluate_far_field, evaluate_field,
    half_width_norm, induced_hover_velocity, reynolds_number, scaled_radial_position,
    similarity_profile, similarity_shape, Cant, DownwashField, DroneSpec, Environment, FieldSample,
    FlowPoint, JetParameters, NearFieldPolicy, FAR_FIELD_START,
};
