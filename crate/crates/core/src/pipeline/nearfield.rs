use serde::Serialize;

use super::grid::YProfile;
use super::{PipelineError, Result};
use crate::lsq::{levenberg_marquardt, LeastSquares, LmOptions, LmReport};

/// Fraction of the extrapolated rotor-plane separation below which the rotor
/// jets count as merged.
pub const MERGE_THRESHOLD: f64 = 0.05;

/// Symmetric two-peak fit of a lateral profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BimodalFit {
    pub s_norm: f64,
    /// Distance of each peak from the axis, in units of `l`.
    pub delta_norm: f64,
    /// Standard deviation of each Gaussian, in units of `l`.
    pub width: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
}

/// `A [exp(-(y-δ)²/2σ²) + exp(-(y+δ)²/2σ²)] - u`
struct BimodalProblem<'a> {
    y: &'a [f64],
    u: &'a [f64],
}

impl LeastSquares for BimodalProblem<'_> {
    fn n_params(&self) -> usize {
        3
    }
    fn n_residuals(&self) -> usize {
        self.y.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let (a, d, sigma) = (p[0], p[1], p[2]);
        let k = 1.0 / (2.0 * sigma * sigma);
        for (o, (&y, &u)) in out.iter_mut().zip(self.y.iter().zip(self.u)) {
            *o = a * ((-(y - d).powi(2) * k).exp() + (-(y + d).powi(2) * k).exp()) - u;
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (a, d, sigma) = (p[0], p[1], p[2]);
        let s2 = sigma * sigma;
        let k = 1.0 / (2.0 * s2);
        for (i, &y) in self.y.iter().enumerate() {
            let (m, n) = (y - d, y + d);
            let gm = (-m * m * k).exp();
            let gp = (-n * n * k).exp();
            out[3 * i] = gm + gp;
            out[3 * i + 1] = a * (gm * m - gp * n) / s2;
            out[3 * i + 2] = a * (gm * m * m + gp * n * n) / (s2 * sigma);
        }
    }
}

/// Fits two equal Gaussians mirrored about the axis to a lateral profile.
///
/// The model is even in both `δ` and `σ`, so their magnitudes are reported.
/// Two starts are tried, one with merged peaks and one with separated peaks,
/// and the lower objective wins.
pub fn fit_bimodal(profile: &YProfile) -> Result<BimodalFit> {
    let mut points = profile.points.clone();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if points.len() < 5 {
        return Err(PipelineError::Unfittable(format!(
            "{} lateral bins, need at least 5",
            points.len()
        )));
    }
    let (y, u): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    if !(y[0] < 0.0 && *y.last().unwrap() > 0.0) {
        return Err(PipelineError::Unfittable(
            "lateral profile must cover both sides of the axis".into(),
        ));
    }
    let (peak_y, peak) =
        points.iter().copied().fold(
            (0.0, f64::NEG_INFINITY),
            |acc, p| if p.1 > acc.1 { p } else { acc },
        );
    if !(peak > 0.0) {
        return Err(PipelineError::Degenerate(
            "lateral profile has no positive speeds".into(),
        ));
    }

    // The outermost points above half the peak bound the occupied band.
    let half_extent = points
        .iter()
        .filter(|p| p.1 >= 0.5 * peak)
        .map(|p| p.0.abs())
        .fold(0.0, f64::max);
    let spacing = y
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    // δ = 0 is a stationary point of the objective, so the second start must
    // sit off the axis even when the profile peaks on it.
    let delta_split = if peak_y != 0.0 {
        peak_y.abs()
    } else {
        0.5 * half_extent.max(spacing)
    };
    let fwhm_to_sigma = 1.0 / (2.0 * 2f64.ln()).sqrt();

    let problem = BimodalProblem { y: &y, u: &u };
    let options = LmOptions::default();
    let mut best: Option<LmReport> = None;
    let mut last_failure = None;
    for delta0 in [0.0, delta_split] {
        let sigma0 = ((half_extent - delta0).max(spacing)) * fwhm_to_sigma;
        let overlap = (-2.0 * delta0 * delta0 / (sigma0 * sigma0)).exp();
        let start = [peak / (1.0 + overlap), delta0, sigma0];
        match levenberg_marquardt(&problem, &start, &options) {
            Ok(report) => {
                if best.as_ref().is_none_or(|b| report.cost < b.cost) {
                    best = Some(report);
                }
            }
            Err(e) => last_failure = Some(e),
        }
    }
    let report = match (best, last_failure) {
        (Some(r), _) => r,
        (None, Some(crate::lsq::LmFailure::NotConverged(r))) => {
            return Err(PipelineError::NotConverged {
                iterations: r.iterations,
                last: r.params,
            })
        }
        (None, _) => {
            return Err(PipelineError::Degenerate(
                "non-finite bimodal residuals".into(),
            ))
        }
    };
    Ok(BimodalFit {
        s_norm: profile.s_norm,
        amplitude: report.params[0],
        delta_norm: report.params[1].abs(),
        width: report.params[2].abs(),
        residual_rms: (report.cost / y.len() as f64).sqrt(),
    })
}

/// Result of scanning peak separations for the merge point.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MergeOutcome {
    Merged { s_norm: f64, threshold: f64 },
    NotObserved { threshold: f64 },
}

impl MergeOutcome {
    pub fn s_norm(&self) -> Option<f64> {
        match self {
            MergeOutcome::Merged { s_norm, .. } => Some(*s_norm),
            MergeOutcome::NotObserved { .. } => None,
        }
    }
}

/// Smallest depth from which the peak separation stays at or below
/// [`MERGE_THRESHOLD`] times its value extrapolated linearly from the two
/// shallowest fits back to the rotor plane.
pub fn merge_distance(fits: &[BimodalFit]) -> Result<MergeOutcome> {
    if fits.len() < 3 {
        return Err(PipelineError::InsufficientFits {
            found: fits.len(),
            required: 3,
        });
    }
    let mut fits: Vec<&BimodalFit> = fits.iter().collect();
    fits.sort_by(|a, b| a.s_norm.total_cmp(&b.s_norm));
    let (a, b) = (fits[0], fits[1]);
    let at_rotor = if b.s_norm > a.s_norm {
        a.delta_norm - a.s_norm * (b.delta_norm - a.delta_norm) / (b.s_norm - a.s_norm)
    } else {
        a.delta_norm
    };
    let threshold = MERGE_THRESHOLD * at_rotor.max(0.0);

    // Walk from the deep end while the separation stays below threshold.
    let mut merged_from = None;
    for fit in fits.iter().rev() {
        if fit.delta_norm <= threshold {
            merged_from = Some(fit.s_norm);
        } else {
            break;
        }
    }
    Ok(match merged_from {
        Some(s_norm) => MergeOutcome::Merged { s_norm, threshold },
        None => MergeOutcome::NotObserved { threshold },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bimodal(s_norm: f64, delta: f64, sigma: f64) -> YProfile {
        let points = (-15..=15)
            .map(|i| {
                let y = i as f64 * 0.1;
                let g = |m: f64| (-(y - m).powi(2) / (2.0 * sigma * sigma)).exp();
                (y, g(delta) + g(-delta))
            })
            .collect();
        YProfile { s_norm, points }
    }

    fn fit(s: f64, delta: f64) -> BimodalFit {
        BimodalFit {
            s_norm: s,
            delta_norm: delta,
            width: 0.2,
            amplitude: 1.0,
            residual_rms: 0.0,
        }
    }

    #[test]
    fn recovers_separation() {
        let result = fit_bimodal(&bimodal(1.0, 0.35, 0.2)).unwrap();
        assert!((result.delta_norm / 0.35 - 1.0).abs() < 0.02, "{result:?}");
        assert!((result.width - 0.2).abs() < 1e-3);
    }

    #[test]
    fn unimodal_input_gives_zero_separation() {
        let result = fit_bimodal(&bimodal(3.0, 0.0, 0.4)).unwrap();
        assert!(result.delta_norm <= 0.02, "{result:?}");
    }

    #[test]
    fn mirrored_input_gives_same_separation() {
        let original = bimodal(1.0, 0.3, 0.25);
        let mut skewed = original.clone();
        // break the exact symmetry so mirroring changes the data
        skewed.points[3].1 += 0.05;
        let mirrored = YProfile {
            s_norm: 1.0,
            points: skewed.points.iter().map(|&(y, u)| (-y, u)).collect(),
        };
        let a = fit_bimodal(&skewed).unwrap();
        let b = fit_bimodal(&mirrored).unwrap();
        assert!((a.delta_norm - b.delta_norm).abs() < 1e-9);
    }

    #[test]
    fn one_sided_profile_is_rejected() {
        let mut p = bimodal(1.0, 0.3, 0.2);
        p.points.retain(|pt| pt.0 >= 0.0);
        assert!(matches!(fit_bimodal(&p), Err(PipelineError::Unfittable(_))));
    }

    #[test]
    fn merge_examples() {
        let fits = [
            fit(0.5, 0.4),
            fit(1.5, 0.2),
            fit(2.5, 0.01),
            fit(3.0, 0.005),
        ];
        assert_eq!(merge_distance(&fits).unwrap().s_norm(), Some(2.5));

        let zeros = [fit(0.5, 0.0), fit(1.0, 0.0), fit(1.5, 0.0)];
        assert_eq!(merge_distance(&zeros).unwrap().s_norm(), Some(0.5));

        let growing = [fit(0.5, 0.1), fit(1.0, 0.2), fit(1.5, 0.3)];
        assert!(matches!(
            merge_distance(&growing).unwrap(),
            MergeOutcome::NotObserved { .. }
        ));

        assert!(merge_distance(&fits[..2]).is_err());
    }

    #[test]
    fn merge_requires_staying_merged() {
        let fits = [
            fit(0.5, 0.4),
            fit(1.5, 0.2),
            fit(2.0, 0.001),
            fit(2.5, 0.1),
            fit(3.0, 0.001),
        ];
        assert_eq!(merge_distance(&fits).unwrap().s_norm(), Some(3.0));
    }
}
