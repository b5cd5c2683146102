use serde::{Deserialize, Serialize};

use super::grid::RadialProfile;
use super::{PipelineError, Result};
use crate::lsq::{levenberg_marquardt, LeastSquares, LmFailure, LmOptions, LmReport};
use crate::model::{similarity_shape, JetParameters, FAR_FIELD_START};

/// Bins beyond this many half-widths are left out of slice fits.
pub const FIT_XI_CUTOFF: f64 = 5.0;

const C: f64 = std::f64::consts::SQRT_2 - 1.0;

/// Centerline velocity and half-width fitted to one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub s_norm: f64,
    pub u_c_norm: f64,
    pub r_half_norm: f64,
    pub residual_rms: f64,
    pub in_far_field: bool,
    /// Bins that entered the final fit.
    pub n_bins: usize,
    pub iterations: usize,
}

impl SliceFit {
    pub fn new(s_norm: f64, u_c_norm: f64, r_half_norm: f64, residual_rms: f64) -> Self {
        SliceFit {
            s_norm,
            u_c_norm,
            r_half_norm,
            residual_rms,
            in_far_field: s_norm >= FAR_FIELD_START,
            n_bins: 0,
            iterations: 0,
        }
    }
}

/// `U_c · shape(r / r½) - u` over the selected bins.
struct ProfileProblem<'a> {
    r: &'a [f64],
    u: &'a [f64],
}

impl LeastSquares for ProfileProblem<'_> {
    fn n_params(&self) -> usize {
        2
    }
    fn n_residuals(&self) -> usize {
        self.r.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let (u_c, r_half) = (p[0], p[1]);
        for (o, (&r, &u)) in out.iter_mut().zip(self.r.iter().zip(self.u)) {
            *o = u_c * similarity_shape(r / r_half) - u;
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (u_c, r_half) = (p[0], p[1]);
        for (i, &r) in self.r.iter().enumerate() {
            let xi = r / r_half;
            let base = 1.0 + C * xi * xi;
            out[2 * i] = 1.0 / (base * base);
            out[2 * i + 1] = 4.0 * u_c * C * xi * xi / (r_half * base * base * base);
        }
    }
}

fn lm_error(failure: LmFailure) -> PipelineError {
    match failure {
        LmFailure::NonFinite => PipelineError::Degenerate("non-finite residuals".into()),
        LmFailure::NotConverged(report) => PipelineError::NotConverged {
            iterations: report.iterations,
            last: report.params,
        },
    }
}

/// Fits the similarity profile to one radial profile.
pub fn fit_slice(profile: &RadialProfile) -> Result<SliceFit> {
    fit_slice_with_report(profile).map(|(fit, _)| fit)
}

/// Like [`fit_slice`], also returning the solver report of the final pass.
///
/// The `ξ <= 5` selection depends on the half-width being fitted, so the
/// selection is redone with each new estimate until it stops changing.
pub fn fit_slice_with_report(profile: &RadialProfile) -> Result<(SliceFit, LmReport)> {
    if profile.bins.len() < 3 {
        return Err(PipelineError::Unfittable(format!(
            "{} radial bins, need at least 3",
            profile.bins.len()
        )));
    }
    let (peak, _) = profile.bins.iter().map(|b| (b.speed_norm, b.r_norm)).fold(
        (f64::NEG_INFINITY, 0.0),
        |acc, v| if v.0 > acc.0 { v } else { acc },
    );
    if !(peak > 0.0) {
        return Err(PipelineError::Degenerate(format!(
            "slice at s/l = {} has no positive speeds",
            profile.s_norm
        )));
    }
    let Some(r_half0) = first_half_crossing(profile, peak) else {
        return Err(PipelineError::Unfittable(format!(
            "slice at s/l = {} never drops below half of its peak",
            profile.s_norm
        )));
    };
    if !profile.bins.iter().any(|b| b.r_norm < r_half0) {
        return Err(PipelineError::Unfittable(
            "no bins inside the half-width".into(),
        ));
    }

    let options = LmOptions::default();
    let mut params = vec![peak, r_half0];
    let mut selected_count = usize::MAX;
    let mut total_iterations = 0;
    let mut last = None;
    for _ in 0..10 {
        let cutoff = FIT_XI_CUTOFF * params[1].abs();
        let (r, u): (Vec<f64>, Vec<f64>) = profile
            .bins
            .iter()
            .filter(|b| b.r_norm <= cutoff)
            .map(|b| (b.r_norm, b.speed_norm))
            .unzip();
        if r.len() == selected_count {
            break;
        }
        if r.len() < 3 {
            return Err(PipelineError::Unfittable(format!(
                "only {} bins within xi <= {FIT_XI_CUTOFF}",
                r.len()
            )));
        }
        selected_count = r.len();
        let report = levenberg_marquardt(&ProfileProblem { r: &r, u: &u }, &params, &options)
            .map_err(lm_error)?;
        total_iterations += report.iterations;
        params = report.params.clone();
        last = Some(report);
    }
    let report = last.expect("at least one pass runs");
    let (u_c, r_half) = (report.params[0], report.params[1].abs());
    if !(u_c > 0.0 && r_half > 0.0) {
        return Err(PipelineError::Degenerate(format!(
            "fit collapsed to U_c = {u_c}, r_half = {r_half}"
        )));
    }
    let fit = SliceFit {
        s_norm: profile.s_norm,
        u_c_norm: u_c,
        r_half_norm: r_half,
        residual_rms: (report.cost / selected_count as f64).sqrt(),
        in_far_field: profile.s_norm >= FAR_FIELD_START,
        n_bins: selected_count,
        iterations: total_iterations,
    };
    Ok((fit, report))
}

/// Radius where the profile first falls below half of `peak`, linearly
/// interpolated between bins.
fn first_half_crossing(profile: &RadialProfile, peak: f64) -> Option<f64> {
    let half = 0.5 * peak;
    let peak_at = profile.bins.iter().position(|b| b.speed_norm == peak)?;
    let bins = &profile.bins[peak_at..];
    bins.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (b.speed_norm < half).then(|| {
            let t = (a.speed_norm - half) / (a.speed_norm - b.speed_norm);
            a.r_norm + t * (b.r_norm - a.r_norm)
        })
    })
}

/// How each slice's residuals are weighted in the joint fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceWeighting {
    /// Divide by the slice's own fit RMS, so noisy slices count less.
    #[default]
    InverseRms,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetFitOptions {
    pub s_min_norm: f64,
    pub weighting: SliceWeighting,
}

impl Default for JetFitOptions {
    fn default() -> Self {
        JetFitOptions {
            s_min_norm: FAR_FIELD_START,
            weighting: SliceWeighting::InverseRms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JetFit {
    pub params: JetParameters,
    /// Closed-form estimate the solver started from.
    pub warm_start: JetParameters,
    pub slices_used: usize,
    /// Unweighted RMS of the centerline and half-width residuals.
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Smallest fit RMS used for inverse-RMS weights.
const RMS_FLOOR: f64 = 1e-9;

struct JointProblem {
    s: Vec<f64>,
    u_c: Vec<f64>,
    r_half: Vec<f64>,
    weight: Vec<f64>,
}

impl LeastSquares for JointProblem {
    fn n_params(&self) -> usize {
        3
    }
    fn n_residuals(&self) -> usize {
        2 * self.s.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let (bd, spread, s0) = (p[0], p[1], p[2]);
        for i in 0..self.s.len() {
            let d = self.s[i] - s0;
            out[2 * i] = self.weight[i] * (bd / d - self.u_c[i]);
            out[2 * i + 1] = self.weight[i] * (spread * d - self.r_half[i]);
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (bd, spread, s0) = (p[0], p[1], p[2]);
        for i in 0..self.s.len() {
            let d = self.s[i] - s0;
            let w = self.weight[i];
            let row = &mut out[6 * i..6 * i + 6];
            row[0] = w / d;
            row[1] = 0.0;
            row[2] = w * bd / (d * d);
            row[3] = 0.0;
            row[4] = w * d;
            row[5] = -w * spread;
        }
    }
}

/// Slope and intercept of the ordinary least-squares line through `(x, y)`.
fn linear_regression(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if sxx <= 1e-12 * scale * scale * n {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Joint fit of the centerline decay and linear spreading laws with a shared
/// virtual origin, using far-field slices only.
pub fn fit_jet_parameters(slices: &[SliceFit]) -> Result<JetParameters> {
    fit_jet_parameters_with(slices, &JetFitOptions::default()).map(|f| f.params)
}

pub fn fit_jet_parameters_with(slices: &[SliceFit], options: &JetFitOptions) -> Result<JetFit> {
    let far: Vec<&SliceFit> = slices
        .iter()
        .filter(|s| s.in_far_field && s.s_norm >= options.s_min_norm)
        .collect();
    match far.len() {
        0 => {
            return Err(PipelineError::NoFarFieldSlices {
                s_min: options.s_min_norm,
            })
        }
        n if n < 3 => {
            return Err(PipelineError::InsufficientSlices {
                found: n,
                required: 3,
            })
        }
        _ => {}
    }
    if let Some(bad) = far
        .iter()
        .find(|s| !(s.u_c_norm > 0.0 && s.r_half_norm > 0.0))
    {
        return Err(PipelineError::Degenerate(format!(
            "slice at s/l = {} has non-positive parameters",
            bad.s_norm
        )));
    }

    let s: Vec<f64> = far.iter().map(|f| f.s_norm).collect();
    let u_c: Vec<f64> = far.iter().map(|f| f.u_c_norm).collect();
    let r_half: Vec<f64> = far.iter().map(|f| f.r_half_norm).collect();

    // 1/U_c and r½ are both affine in s.
    let inverse_u: Vec<f64> = u_c.iter().map(|u| 1.0 / u).collect();
    let ill = || PipelineError::IllConditioned("all slices share one depth".into());
    let (a, b) = linear_regression(&s, &inverse_u).ok_or_else(ill)?;
    let (spread0, c) = linear_regression(&s, &r_half).ok_or_else(ill)?;
    if !(a > 0.0 && spread0 > 0.0) {
        return Err(PipelineError::IllConditioned(format!(
            "slices do not decay and spread downstream (1/U_c slope {a:.3e}, r_half slope {spread0:.3e})"
        )));
    }
    let bd0 = 1.0 / a;
    let s_min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let s0_guess = 0.5 * (-b / a + -c / spread0);
    let s0_0 = s0_guess.min(s_min - 1e-3 * s_min.abs().max(1.0));
    let warm_start = JetParameters {
        bd: bd0,
        spreading_rate: spread0,
        s0_norm: s0_0,
    };

    let weight = far
        .iter()
        .map(|f| match options.weighting {
            SliceWeighting::Uniform => 1.0,
            SliceWeighting::InverseRms => 1.0 / f.residual_rms.max(RMS_FLOOR),
        })
        .collect();
    let problem = JointProblem {
        s: s.clone(),
        u_c: u_c.clone(),
        r_half: r_half.clone(),
        weight,
    };
    let report = levenberg_marquardt(&problem, &[bd0, spread0, s0_0], &LmOptions::default())
        .map_err(lm_error)?;
    let (bd, spread, s0) = (report.params[0], report.params[1], report.params[2]);
    if !(s0 < s_min) {
        return Err(PipelineError::IllConditioned(format!(
            "virtual origin {s0} ended downstream of the first slice {s_min}"
        )));
    }
    let params = JetParameters::new(bd, spread, s0)
        .map_err(|e| PipelineError::IllConditioned(e.to_string()))?;

    let ss: f64 = s
        .iter()
        .zip(u_c.iter().zip(&r_half))
        .map(|(&si, (&u, &r))| (bd / (si - s0) - u).powi(2) + (spread * (si - s0) - r).powi(2))
        .sum();
    Ok(JetFit {
        params,
        warm_start,
        slices_used: far.len(),
        residual_rms: (ss / (2 * far.len()) as f64).sqrt(),
        iterations: report.iterations,
    })
}
