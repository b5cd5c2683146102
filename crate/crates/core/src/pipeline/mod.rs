//! Measurement post-processing: from raw flight logs of a hovering drone and
//! a fixed flow probe to fitted jet parameters, merge distance and residual
//! hypothesis tests.

mod fit;
mod grid;
mod log;
mod nearfield;
mod run;
mod synth;
mod ttest;

use thiserror::Error;

use crate::error::ModelError;

pub use fit::{
    fit_jet_parameters, fit_jet_parameters_with, fit_slice, fit_slice_with_report, JetFit,
    JetFitOptions, SliceFit, SliceWeighting, FIT_XI_CUTOFF,
};
pub use grid::{
    bin_grid, radial_profiles, GridCell, GriddedField, ProfileExtraction, RadialBin, RadialProfile,
    SkippedSlice, YProfile,
};
pub use log::{
    estimate_ambient, filter_hover, load_log, subtract_ambient, write_log, LoadedLog,
    MeasurementRecord, RejectedRow, LOG_COLUMNS, MIN_AMBIENT_SAMPLES,
};
pub use nearfield::{fit_bimodal, merge_distance, BimodalFit, MergeOutcome, MERGE_THRESHOLD};
pub use run::{
    run_pipeline, AmbientSource, FailedSlice, FitReport, LogSummary, ParameterDeltas,
    PipelineOptions, Stage, StageError,
};
pub use synth::{synthesize_log, FlightPlan, NearFieldModel, NoiseModel};
pub use ttest::{residual_test, unit_intervals, ResidualTest, TestStatus, ALPHA};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("log is missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("malformed log: {0}")]
    Format(String),

    #[error("log contains no usable records")]
    EmptyInput,

    #[error(
        "only {found} samples in the pre-takeoff window, need at least {required}; pass the ambient flow speed explicitly"
    )]
    InsufficientAmbientSamples { found: usize, required: usize },

    #[error("profile cannot be fitted: {0}")]
    Unfittable(String),

    #[error("fit did not converge after {iterations} iterations (last iterate {last:?})")]
    NotConverged { iterations: usize, last: Vec<f64> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no far-field slices (s/l >= {s_min}) available for the joint fit")]
    NoFarFieldSlices { s_min: f64 },

    #[error("joint fit needs at least {required} far-field slices, found {found}")]
    InsufficientSlices { found: usize, required: usize },

    #[error("joint fit is ill-conditioned ({0}); record more slices at distinct depths")]
    IllConditioned(String),

    #[error("need at least {required} near-field fits, found {found}")]
    InsufficientFits { found: usize, required: usize },

    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
