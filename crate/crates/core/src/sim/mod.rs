//! Pass-under simulation: a lower drone crossing below a hovering upper drone,
//! with and without feed-forward downwash compensation.

mod compensation;
mod passunder;
mod plant;

use thiserror::Error;

use crate::error::ModelError;

pub use compensation::{
    downwash_at_relative_position, induced_velocity_in_downwash, power_ratio,
    throttle_compensation, Compensation, NEGLIGIBLE_FLOW_XI,
};
pub use passunder::{
    compare, run_passunder, Comparison, Gains, SimConfig, SimResult, SimSample, SIM_CSV_COLUMNS,
};
pub use plant::{plant_thrust, Plant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("thrust solve did not converge for throttle {throttle} in downwash {downwash} m/s")]
    Plant { throttle: f64, downwash: f64 },

    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, SimError>;
