use super::Result;
use crate::model::{body_to_flow, DownwashField, NearFieldPolicy};

/// Beyond this many half-widths the downwash is treated as zero.
pub const NEGLIGIBLE_FLOW_XI: f64 = 6.0;

/// Downwash speed (m/s) of `upper` at offset `delta_p` (m, upper body frame,
/// z up) from its rotor plane center.
pub fn downwash_at_relative_position(
    upper: &DownwashField,
    delta_p: [f64; 3],
    policy: NearFieldPolicy,
) -> Result<f64> {
    let point = body_to_flow(delta_p)?;
    let sample = upper.sample(&point, policy)?;
    Ok(if sample.xi > NEGLIGIBLE_FLOW_XI {
        0.0
    } else {
        sample.speed
    })
}

/// Induced velocity of a rotor whose inflow already moves down at `u_d`.
pub fn induced_velocity_in_downwash(u_d: f64, u_h: f64) -> f64 {
    let half = 0.5 * u_d;
    half + (half * half + u_h * u_h).sqrt()
}

/// Power needed to hover in downwash, relative to still air, given
/// `alpha = U_D / U_H`.
pub fn power_ratio(alpha: f64) -> f64 {
    0.5 * alpha + 0.5 * (alpha * alpha + 4.0).sqrt()
}

/// Throttle scale for power ratio `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compensation {
    pub scale: f64,
    /// `beta` was below one and has been clamped.
    pub clamped: bool,
}

pub fn throttle_compensation(beta: f64) -> Compensation {
    if beta >= 1.0 {
        Compensation {
            scale: beta.sqrt(),
            clamped: false,
        }
    } else {
        Compensation {
            scale: 1.0,
            clamped: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Environment, FlowPoint, JetParameters};
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn inflow_examples() {
        assert_eq!(induced_velocity_in_downwash(0.0, 7.41), 7.41);
        assert_relative_eq!(
            induced_velocity_in_downwash(2.0 * 5.0, 5.0),
            5.0 * (1.0 + 2f64.sqrt()),
            max_relative = 1e-15
        );
        let mut last = 0.0;
        for i in 0..100 {
            let v = induced_velocity_in_downwash(i as f64 * 0.1, 3.0);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn power_ratio_examples() {
        assert_eq!(power_ratio(0.0), 1.0);
        assert_relative_eq!(
            power_ratio(1.0),
            (1.0 + 5f64.sqrt()) / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(power_ratio(1.0), 1.61803, max_relative = 1e-5);
        for i in 0..=100 {
            let a = i as f64 * 0.1;
            let b = power_ratio(a);
            assert!((b * (b - a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn compensation_examples() {
        assert_eq!(throttle_compensation(1.0).scale, 1.0);
        assert_eq!(throttle_compensation(4.0).scale, 2.0);
        assert_relative_eq!(
            throttle_compensation(1.61803).scale,
            1.27202,
            max_relative = 1e-5
        );
        let c = throttle_compensation(0.9);
        assert_eq!(c.scale, 1.0);
        assert!(c.clamped);
    }

    #[test]
    fn downwash_lookup() {
        let upper = presets::find("offboard 2").unwrap();
        let field =
            DownwashField::new(&upper, &Environment::default(), &JetParameters::UNIFIED).unwrap();
        let l = upper.motor_distance;
        let on_axis =
            downwash_at_relative_position(&field, [0.0, 0.0, -3.0 * l], NearFieldPolicy::Reject)
                .unwrap();
        let direct = field
            .sample(&FlowPoint::on_axis(3.0 * l), NearFieldPolicy::Reject)
            .unwrap()
            .speed;
        assert_eq!(on_axis, direct);

        let r_half = field.half_width(3.0 * l).unwrap();
        let half =
            downwash_at_relative_position(&field, [r_half, 0.0, -3.0 * l], NearFieldPolicy::Reject)
                .unwrap();
        assert_relative_eq!(half, 0.5 * on_axis, max_relative = 1e-12);

        let far = downwash_at_relative_position(
            &field,
            [0.0, 10.0 * r_half, -3.0 * l],
            NearFieldPolicy::Reject,
        )
        .unwrap();
        assert_eq!(far, 0.0);

        assert!(
            downwash_at_relative_position(&field, [0.0, 0.0, -l], NearFieldPolicy::Reject).is_err()
        );
        assert!(
            downwash_at_relative_position(&field, [0.0, 0.0, -l], NearFieldPolicy::Clamp).is_ok()
        );
    }
}
