use super::{Result, SimError};
use crate::model::{air_density, induced_hover_velocity, DroneSpec, Environment};

/// Vertical thrust model of the lower drone.
///
/// Commanded aerodynamic power is `k throttle²`, calibrated so throttle one
/// hovers in still air. Thrust follows from `P = T U'(T)` with the inflow
/// already moving down at `U_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub mass: f64,
    pub gravity: f64,
    /// Still-air induced velocity at hover, m/s.
    pub induced_velocity: f64,
    /// `2 ρ A N`, kg/m.
    momentum_area: f64,
    /// W per unit throttle².
    power_gain: f64,
}

impl Plant {
    pub fn new(drone: &DroneSpec, env: &Environment) -> Result<Self> {
        drone.validate()?;
        let rho = air_density(env)?;
        let u_h = induced_hover_velocity(drone, rho, env.gravity)?;
        let weight = drone.mass * env.gravity;
        Ok(Plant {
            mass: drone.mass,
            gravity: env.gravity,
            induced_velocity: u_h,
            momentum_area: 2.0 * rho * drone.disk_area(),
            power_gain: weight * u_h,
        })
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn power(&self, throttle: f64) -> f64 {
        self.power_gain * throttle * throttle
    }

    /// Thrust (N) at `throttle` with inflow `u_d` (m/s, downward positive).
    pub fn thrust(&self, throttle: f64, u_d: f64) -> Result<f64> {
        let fail = || SimError::Plant {
            throttle,
            downwash: u_d,
        };
        if !(throttle.is_finite() && u_d.is_finite() && u_d >= 0.0) {
            return Err(fail());
        }
        let power = self.power(throttle);
        if power == 0.0 {
            return Ok(0.0);
        }
        let half = 0.5 * u_d;
        let residual = |t: f64| {
            let w = (half * half + t / self.momentum_area).sqrt();
            (
                t * (half + w) - power,
                half + w + 0.5 * t / (self.momentum_area * w),
            )
        };
        // Without inflow T^{3/2} = P sqrt(2ρAN), which bounds the root above.
        let mut hi = (power * self.momentum_area.sqrt()).powf(2.0 / 3.0);
        if u_d > 0.0 {
            hi = hi.min(power / u_d);
        }
        let mut lo = 0.0;
        let mut t = 0.5 * hi;
        for _ in 0..200 {
            let (f, df) = residual(t);
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let mut next = t - f / df;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * t || hi - lo <= 1e-15 * hi {
                return Ok(next);
            }
            t = next;
        }
        Err(fail())
    }
}

/// Thrust (N) of `drone` at `throttle` in downwash `u_d`.
pub fn plant_thrust(throttle: f64, u_d: f64, drone: &DroneSpec, env: &Environment) -> Result<f64> {
    Plant::new(drone, env)?.thrust(throttle, u_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::sim::{power_ratio, throttle_compensation};
    use approx::assert_relative_eq;

    fn kolibri() -> Plant {
        Plant::new(&presets::find("kolibri").unwrap(), &Environment::default()).unwrap()
    }

    #[test]
    fn calibration_point() {
        let p = kolibri();
        assert_relative_eq!(
            p.thrust(1.0, 0.0).unwrap(),
            p.weight(),
            max_relative = 1e-12
        );
        assert_eq!(p.thrust(0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn downwash_steals_lift() {
        let p = kolibri();
        let mut last = p.weight();
        for u_d in [0.5, 1.0, 3.0, 8.0] {
            let t = p.thrust(1.0, u_d).unwrap();
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn compensated_throttle_restores_hover() {
        let p = kolibri();
        for u_d in [0.1, 1.0, 5.0, 12.0, 40.0] {
            let beta = power_ratio(u_d / p.induced_velocity);
            let t = p.thrust(throttle_compensation(beta).scale, u_d).unwrap();
            assert_relative_eq!(t, p.weight(), max_relative = 1e-12);
        }
    }

    #[test]
    fn thrust_grows_with_throttle() {
        let p = kolibri();
        let mut last = 0.0;
        for i in 1..40 {
            let t = p.thrust(i as f64 * 0.05, 2.0).unwrap();
            assert!(t > last);
            last = t;
        }
    }
}
