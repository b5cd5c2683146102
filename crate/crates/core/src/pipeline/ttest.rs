use serde::Serialize;

use crate::model::similarity_shape;
use crate::stats::{self, StudentT};

/// Significance level of the residual tests.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Tested,
    /// Fewer than two samples.
    InsufficientSamples,
    /// All residuals are identical, so the t statistic is undefined.
    ZeroVariance,
}

/// One-sided test of `H0: mean(ε) = 0` against `H1: mean(ε) > 0` within one
/// interval of the similarity variable, where `ε = shape(ξ) - u/U_c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualTest {
    pub xi_interval: [f64; 2],
    pub n: usize,
    pub mean_residual: Option<f64>,
    pub std_residual: Option<f64>,
    pub t_statistic: Option<f64>,
    /// `t_{1-α, n-1}`
    pub t_critical: Option<f64>,
    pub p_value: Option<f64>,
    pub reject_h0: bool,
    pub status: TestStatus,
}

/// `[k, k+1)` for `k` in `0..count`.
pub fn unit_intervals(count: usize) -> Vec<[f64; 2]> {
    (0..count).map(|k| [k as f64, k as f64 + 1.0]).collect()
}

/// Runs the one-sided t-test per half-open interval of `ξ`.
///
/// `samples` holds `(ξ, u / U_c)` pairs.
pub fn residual_test(
    samples: &[(f64, f64)],
    intervals: &[[f64; 2]],
    alpha: f64,
) -> Vec<ResidualTest> {
    intervals
        .iter()
        .map(|&[lo, hi]| {
            assert!(lo < hi, "empty interval [{lo}, {hi})");
            let residuals: Vec<f64> = samples
                .iter()
                .filter(|(xi, _)| *xi >= lo && *xi < hi)
                .map(|&(xi, ratio)| similarity_shape(xi) - ratio)
                .collect();
            test_interval([lo, hi], &residuals, alpha)
        })
        .collect()
}

fn test_interval(xi_interval: [f64; 2], residuals: &[f64], alpha: f64) -> ResidualTest {
    let n = residuals.len();
    let mut out = ResidualTest {
        xi_interval,
        n,
        mean_residual: stats::mean(residuals),
        std_residual: stats::sample_std(residuals),
        t_statistic: None,
        t_critical: None,
        p_value: None,
        reject_h0: false,
        status: TestStatus::InsufficientSamples,
    };
    let (Some(mean), Some(sd)) = (out.mean_residual, out.std_residual) else {
        return out;
    };
    if !(sd > f64::EPSILON * mean.abs()) {
        out.status = TestStatus::ZeroVariance;
        return out;
    }
    let dist = StudentT::new((n - 1) as f64).expect("n >= 2");
    let t = mean / (sd / (n as f64).sqrt());
    let critical = dist.quantile(1.0 - alpha);
    out.t_statistic = Some(t);
    out.t_critical = Some(critical);
    out.p_value = Some(dist.sf(t));
    out.reject_h0 = t > critical;
    out.status = TestStatus::Tested;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Observations in `[lo, hi)` whose residuals are drawn from N(mean, sd).
    fn samples(rng: &mut ChaCha8Rng, n: usize, lo: f64, mean: f64, sd: f64) -> Vec<(f64, f64)> {
        let normal = Normal::new(mean, sd).unwrap();
        (0..n)
            .map(|_| {
                let xi = lo + rng.random::<f64>();
                (xi, similarity_shape(xi) - normal.sample(rng))
            })
            .collect()
    }

    #[test]
    fn shifted_mean_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = samples(&mut rng, 100, 2.0, 0.05, 0.01);
        let result = residual_test(&data, &[[2.0, 3.0]], ALPHA);
        assert_eq!(result[0].n, 100);
        assert!(result[0].reject_h0);
        assert!(result[0].t_statistic.unwrap() > 30.0);
    }

    #[test]
    fn identical_zero_residuals_never_reject() {
        let data: Vec<_> = (0..60)
            .map(|i| {
                let xi = i as f64 * 0.1;
                (xi, similarity_shape(xi))
            })
            .collect();
        for test in residual_test(&data, &unit_intervals(6), ALPHA) {
            assert!(!test.reject_h0);
            assert_eq!(test.status, TestStatus::ZeroVariance);
        }
    }

    #[test]
    fn single_sample_is_untestable() {
        let result = residual_test(&[(0.5, 0.3)], &unit_intervals(2), ALPHA);
        assert_eq!(result[0].status, TestStatus::InsufficientSamples);
        assert_eq!(result[1].n, 0);
        assert!(!result[0].reject_h0);
    }

    #[test]
    fn intervals_are_half_open() {
        let data = [(1.0, 0.1), (1.5, 0.2), (2.0, 0.0)];
        let result = residual_test(&data, &[[1.0, 2.0]], ALPHA);
        assert_eq!(result[0].n, 2);
    }
}
