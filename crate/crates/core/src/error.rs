use thiserror::Error;

/// Errors raised by the closed-form flow model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid {what}: {reason}")]
    Domain { what: &'static str, reason: String },

    /// The query lies in the near field, where the individual rotor jets have
    /// not merged and the jet model does not hold.
    #[error(
        "point at s/l = {s_norm:.4} lies in the near field; the jet model is only valid for s/l >= {threshold}"
    )]
    NearFieldRequest { s_norm: f64, threshold: f64 },

    #[error("{0} is unavailable")]
    Unavailable(&'static str),

    #[error("unknown drone preset `{0}`")]
    UnknownPreset(String),
}

impl ModelError {
    pub(crate) fn domain(what: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Domain {
            what,
            reason: reason.into(),
        }
    }
}
