use approx::assert_relative_eq;
use downwash::presets::{self, REFERENCE_INDUCED_VELOCITY};
use downwash::stats::StudentT;
use downwash::{
    air_density, centerline_velocity_norm, evaluate_far_field, half_width_norm,
    induced_hover_velocity, Environment, FlowPoint, JetParameters,
};
use statrs::distribution::{ContinuousCDF, StudentsT};

// Induced velocities at 101325 Pa and 293.15 K from a 30-digit evaluation.
const INDUCED_VELOCITY: [(&str, f64); 6] = [
    ("Kolibri", 7.4084042256090364),
    ("Offboard 1", 6.6490023524885425),
    ("Offboard 2", 9.6585538890343418),
    ("Matrice 300", 5.3572942907206951),
    ("Mavic 3E", 4.666343152817315),
    ("Elios 3", 13.881906312066571),
];

#[test]
fn air_density_at_default_conditions() {
    assert_relative_eq!(
        air_density(&Environment::default()).unwrap(),
        1.20416035856013045,
        max_relative = 1e-14
    );
}

#[test]
fn induced_velocity_matches_high_precision_values() {
    let env = Environment::default();
    let rho = air_density(&env).unwrap();
    for (name, expected) in INDUCED_VELOCITY {
        let drone = presets::find(name).unwrap();
        let u_h = induced_hover_velocity(&drone, rho, env.gravity).unwrap();
        assert_relative_eq!(u_h, expected, max_relative = 1e-13);
    }
}

#[test]
fn induced_velocity_matches_published_table() {
    let env = Environment::default();
    let rho = air_density(&env).unwrap();
    for (drone, published) in presets::all().iter().zip(REFERENCE_INDUCED_VELOCITY) {
        let u_h = induced_hover_velocity(drone, rho, env.gravity).unwrap();
        assert!(
            (u_h / published - 1.0).abs() < 0.005,
            "{}: {u_h} vs {published}",
            drone.name
        );
    }
}

#[test]
fn unified_constants() {
    let p = JetParameters::UNIFIED;
    assert_eq!(
        (p.bd, p.spreading_rate, p.s0_norm),
        (10.11, 0.07668, -5.817)
    );
    assert_relative_eq!(p.cone_angle_deg(), 8.769719482594342, max_relative = 1e-12);
}

#[test]
fn unified_spot_values() {
    let p = JetParameters::UNIFIED;
    assert_relative_eq!(
        centerline_velocity_norm(3.0, &p).unwrap(),
        1.1466485199047295,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        half_width_norm(3.0, &p).unwrap(),
        0.67608756,
        max_relative = 1e-14
    );
    let kolibri = presets::find("kolibri").unwrap();
    let speed = evaluate_far_field(
        &kolibri,
        &Environment::default(),
        &p,
        &FlowPoint::on_axis(3.0 * kolibri.motor_distance),
    )
    .unwrap();
    assert_relative_eq!(speed, 8.4948357401505453, max_relative = 1e-13);
}

#[test]
fn student_t_agrees_with_statrs() {
    for dof in [1.0, 2.0, 3.0, 7.5, 19.0, 60.0, 250.0] {
        let ours = StudentT::new(dof).unwrap();
        let theirs = StudentsT::new(0.0, 1.0, dof).unwrap();
        for p in [0.5, 0.8, 0.9, 0.95, 0.975, 0.99, 0.999] {
            let q = ours.quantile(p);
            assert!(
                (q - theirs.inverse_cdf(p)).abs() < 1e-8 * q.abs().max(1.0),
                "dof {dof} p {p}"
            );
        }
        for t in [-4.0, -1.0, 0.0, 0.3, 1.7, 5.0] {
            assert!(
                (ours.cdf(t) - theirs.cdf(t)).abs() < 1e-12,
                "dof {dof} t {t}"
            );
        }
    }
}
