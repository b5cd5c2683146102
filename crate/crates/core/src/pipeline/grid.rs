use std::collections::BTreeMap;

use serde::Serialize;

use super::log::MeasurementRecord;
use super::{PipelineError, Result};
use crate::model::{air_density, induced_hover_velocity, DroneSpec, Environment, FAR_FIELD_START};
use crate::stats;

/// One occupied cell of the normalized measurement grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    /// Integer cell coordinates along (x, y, s).
    pub index: [i64; 3],
    /// Cell center in units of `l`, body axes with `s` pointing down.
    pub x_norm: f64,
    pub y_norm: f64,
    pub s_norm: f64,
    pub r_norm: f64,
    /// Median of the speeds in the cell divided by the induced velocity.
    pub u_norm: f64,
    pub count: usize,
    pub iqr: f64,
    /// Standard error of the mean normalized speed (zero for single samples).
    pub std_error: f64,
}

/// Median-binned normalized flow field below a drone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GriddedField {
    pub resolution_norm: f64,
    pub length_scale: f64,
    pub induced_velocity: f64,
    /// Sorted by `index`.
    pub cells: Vec<GridCell>,
    /// Records above the rotor plane, which the model does not describe.
    pub skipped_above_rotor: usize,
}

/// Quantizes normalized offsets into cells of edge `resolution_norm`. Cell
/// centers sit on integer multiples of the resolution, so one center is at
/// the origin, and membership is half-open `[lo, hi)`.
pub fn bin_grid(
    records: &[MeasurementRecord],
    drone: &DroneSpec,
    env: &Environment,
    resolution_norm: f64,
) -> Result<GriddedField> {
    if !(resolution_norm > 0.0 && resolution_norm.is_finite()) {
        return Err(PipelineError::Degenerate(format!(
            "grid resolution {resolution_norm} must be positive"
        )));
    }
    drone.validate()?;
    let induced_velocity = induced_hover_velocity(drone, air_density(env)?, env.gravity)?;
    let l = drone.motor_distance;
    let quantize = |v: f64| (v / resolution_norm + 0.5).floor() as i64;

    let mut buckets: BTreeMap<[i64; 3], Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for rec in records {
        // The probe sits at the origin, so its offset from the drone is -p.
        let [px, py, pz] = rec.drone_position;
        let (x, y, s) = (-px / l, -py / l, pz / l);
        if s < 0.0 {
            skipped += 1;
            continue;
        }
        buckets
            .entry([quantize(x), quantize(y), quantize(s)])
            .or_default()
            .push(rec.anemometer_speed / induced_velocity);
    }

    let cells = buckets
        .into_iter()
        .map(|(index, values)| {
            let [i, j, k] = index;
            let x_norm = i as f64 * resolution_norm;
            let y_norm = j as f64 * resolution_norm;
            GridCell {
                index,
                x_norm,
                y_norm,
                s_norm: k as f64 * resolution_norm,
                r_norm: ring_radius(i, j, resolution_norm),
                u_norm: stats::median(&values).expect("bucket is non-empty"),
                count: values.len(),
                iqr: stats::interquartile_range(&values).expect("bucket is non-empty"),
                std_error: stats::standard_error(&values).unwrap_or(0.0),
            }
        })
        .collect();

    Ok(GriddedField {
        resolution_norm,
        length_scale: l,
        induced_velocity,
        cells,
        skipped_above_rotor: skipped,
    })
}

fn ring_radius(i: i64, j: i64, resolution: f64) -> f64 {
    ((i * i + j * j) as f64).sqrt() * resolution
}

/// Azimuthally pooled values at one radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialBin {
    pub r_norm: f64,
    /// Median of the pooled cell values.
    pub speed_norm: f64,
    /// Number of grid cells pooled.
    pub count: usize,
    /// Interquartile range of the pooled cell values.
    pub dispersion: f64,
    pub std_error: f64,
}

/// Radial profile at one downstream slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub s_norm: f64,
    /// Sorted by `r_norm`.
    pub bins: Vec<RadialBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSlice {
    pub s_norm: f64,
    pub radial_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ProfileExtraction {
    pub profiles: Vec<RadialProfile>,
    /// Slices with fewer than three radial bins, which cannot be fitted.
    pub skipped: Vec<SkippedSlice>,
}

/// Groups cells into slices of thickness `slice_thickness_norm` (centered on
/// multiples of the thickness) and pools every ring of cells at the same
/// center radius.
pub fn radial_profiles(
    grid: &GriddedField,
    slice_thickness_norm: f64,
) -> Result<ProfileExtraction> {
    if !(slice_thickness_norm > 0.0 && slice_thickness_norm.is_finite()) {
        return Err(PipelineError::Degenerate(format!(
            "slice thickness {slice_thickness_norm} must be positive"
        )));
    }
    // slice -> ring (i² + j²) -> cell values
    let mut slices: BTreeMap<i64, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for cell in &grid.cells {
        let slice = (cell.s_norm / slice_thickness_norm + 0.5).floor() as i64;
        let [i, j, _] = cell.index;
        slices
            .entry(slice)
            .or_default()
            .entry(i * i + j * j)
            .or_default()
            .push(cell.u_norm);
    }

    let mut out = ProfileExtraction::default();
    for (slice, rings) in slices {
        let s_norm = slice as f64 * slice_thickness_norm;
        if rings.len() < 3 {
            out.skipped.push(SkippedSlice {
                s_norm,
                radial_bins: rings.len(),
            });
            continue;
        }
        let bins = rings
            .into_iter()
            .map(|(ring, values)| RadialBin {
                r_norm: (ring as f64).sqrt() * grid.resolution_norm,
                speed_norm: stats::median(&values).expect("ring is non-empty"),
                count: values.len(),
                dispersion: stats::interquartile_range(&values).expect("ring is non-empty"),
                std_error: stats::standard_error(&values).unwrap_or(0.0),
            })
            .collect();
        out.profiles.push(RadialProfile { s_norm, bins });
    }
    Ok(out)
}

/// Lateral profile through the axis (cells with `x = 0`) at one depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YProfile {
    pub s_norm: f64,
    /// `(y_norm, u_norm)` sorted by `y_norm`.
    pub points: Vec<(f64, f64)>,
}

impl GriddedField {
    /// Lateral profiles for every grid layer shallower than `max_s_norm`.
    pub fn y_profiles(&self, max_s_norm: f64) -> Vec<YProfile> {
        let mut layers: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
        for cell in self
            .cells
            .iter()
            .filter(|c| c.index[0] == 0 && c.s_norm <= max_s_norm)
        {
            layers
                .entry(cell.index[2])
                .or_default()
                .push((cell.y_norm, cell.u_norm));
        }
        layers
            .into_iter()
            .map(|(k, mut points)| {
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                YProfile {
                    s_norm: k as f64 * self.resolution_norm,
                    points,
                }
            })
            .collect()
    }

    pub fn far_field_cells(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().filter(|c| c.s_norm >= FAR_FIELD_START)
    }
}
