use downwash::pipeline::{
    bin_grid, filter_hover, fit_slice_with_report, subtract_ambient, MeasurementRecord, RadialBin,
    RadialProfile,
};
use downwash::sim::{induced_velocity_in_downwash, power_ratio, throttle_compensation, Plant};
use downwash::{
    centerline_velocity_norm, evaluate_far_field, half_width_norm, similarity_shape, Cant,
    DroneSpec, Environment, FlowPoint, JetParameters,
};
use proptest::prelude::*;

fn drone() -> impl Strategy<Value = DroneSpec> {
    (0.05f64..20.0, 0.02f64..0.4, 1.3f64..4.0, 1u32..9).prop_map(|(mass, radius, ratio, n)| {
        DroneSpec {
            name: "generated".into(),
            mass,
            propeller_radius: radius,
            n_propellers: n,
            motor_distance: radius * ratio,
            cant: Cant::Uncanted,
        }
    })
}

fn environment() -> impl Strategy<Value = Environment> {
    (60_000.0f64..110_000.0, 240.0f64..320.0).prop_map(|(p, t)| Environment::new(p, t))
}

fn record() -> impl Strategy<Value = MeasurementRecord> {
    (
        -2.0f64..2.0,
        -2.0f64..2.0,
        -0.5f64..3.0,
        0.0f64..0.3,
        0.0f64..10.0,
    )
        .prop_map(|(x, y, z, v, u)| MeasurementRecord {
            time: 0.0,
            drone_position: [x, y, z],
            drone_speed: v,
            anemometer_speed: u,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn speed_at_half_width_is_half_the_centerline(drone in drone(), env in environment(), s_norm in 2.5f64..10.0) {
        let p = JetParameters::UNIFIED;
        let l = drone.motor_distance;
        let axis = evaluate_far_field(&drone, &env, &p, &FlowPoint::on_axis(s_norm * l)).unwrap();
        let r_half = half_width_norm(s_norm, &p).unwrap() * l;
        let edge = evaluate_far_field(&drone, &env, &p, &FlowPoint::new(s_norm * l, r_half, 0.0).unwrap()).unwrap();
        prop_assert!((edge / (0.5 * axis) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_fields_collapse(a in drone(), b in drone(), env in environment(), s_norm in 2.5f64..10.0, xi in 0.0f64..6.0) {
        let p = JetParameters::UNIFIED;
        let rho = env.density().unwrap();
        let speed = |d: &DroneSpec| {
            let l = d.motor_distance;
            let r = xi * half_width_norm(s_norm, &p).unwrap() * l;
            evaluate_far_field(d, &env, &p, &FlowPoint::new(s_norm * l, r, 0.0).unwrap()).unwrap()
        };
        let u_h = |d: &DroneSpec| downwash::induced_hover_velocity(d, rho, env.gravity).unwrap();
        prop_assert!(((speed(&a) / speed(&b)) / (u_h(&a) / u_h(&b)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centerline_decays_and_jet_spreads(s1 in 2.5f64..20.0, ds in 1e-3f64..5.0) {
        let p = JetParameters::UNIFIED;
        prop_assert!(centerline_velocity_norm(s1 + ds, &p).unwrap() < centerline_velocity_norm(s1, &p).unwrap());
        prop_assert!(half_width_norm(s1 + ds, &p).unwrap() > half_width_norm(s1, &p).unwrap());
    }

    #[test]
    fn profile_shape_is_bounded_and_decreasing(xi in 0.0f64..50.0, dxi in 1e-6f64..1.0) {
        let u = similarity_shape(xi);
        prop_assert!(u > 0.0 && u <= 1.0);
        prop_assert!(similarity_shape(xi + dxi) < u);
    }

    #[test]
    fn power_ratio_identities(alpha in 0.0f64..10.0, d in 1e-6f64..1.0) {
        let beta = power_ratio(alpha);
        prop_assert!(beta >= 1.0);
        prop_assert!((beta * beta - alpha * beta - 1.0).abs() < 1e-12 * beta * beta);
        prop_assert!(power_ratio(alpha + d) > beta);
    }

    #[test]
    fn inflow_velocity_is_bracketed(u_d in 0.0f64..50.0, u_h in 0.1f64..30.0) {
        let v = induced_velocity_in_downwash(u_d, u_h);
        prop_assert!(v >= u_h);
        prop_assert!(v <= u_d + u_h);
        if u_d > 0.0 {
            prop_assert!(v > u_h);
        }
    }

    #[test]
    fn compensated_throttle_holds_hover(drone in drone(), u_d in 0.0f64..40.0) {
        let plant = Plant::new(&drone, &Environment::default()).unwrap();
        let scale = throttle_compensation(power_ratio(u_d / plant.induced_velocity)).scale;
        let compensated = plant.thrust(scale, u_d).unwrap();
        let still = plant.thrust(1.0, 0.0).unwrap();
        prop_assert!((compensated / still - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hover_filter_is_an_idempotent_subsequence(records in prop::collection::vec(record(), 0..60), v_max in 0.0f64..0.3) {
        let once = filter_hover(&records, v_max);
        prop_assert_eq!(&filter_hover(&once, v_max), &once);
        let mut it = records.iter();
        for r in &once {
            prop_assert!(r.drone_speed <= v_max);
            prop_assert!(it.any(|x| x == r));
        }
        prop_assert_eq!(once.len(), records.iter().filter(|r| r.drone_speed <= v_max).count());
    }

    #[test]
    fn ambient_correction_never_goes_negative(records in prop::collection::vec(record(), 0..60), ambient in 0.0f64..2.0) {
        let out = subtract_ambient(&records, ambient);
        prop_assert!(out.iter().all(|r| r.anemometer_speed >= 0.0));
        prop_assert_eq!(subtract_ambient(&records, 0.0), records);
    }

    #[test]
    fn binning_ignores_record_order(records in prop::collection::vec(record(), 1..80), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let drone = downwash::presets::find("kolibri").unwrap();
        let env = Environment::default();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = bin_grid(&records, &drone, &env, 0.33).unwrap();
        let b = bin_grid(&shuffled, &drone, &env, 0.33).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn slice_fit_objective_never_increases(u_c in 0.5f64..2.0, r_half in 0.3f64..1.5, noise in prop::collection::vec(-0.05f64..0.05, 20)) {
        let bins = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let r = i as f64 * 0.15;
                RadialBin {
                    r_norm: r,
                    speed_norm: (u_c * similarity_shape(r / r_half) * (1.0 + e)).max(0.0),
                    count: 1,
                    dispersion: 0.0,
                    std_error: 0.0,
                }
            })
            .collect();
        let profile = RadialProfile { s_norm: 3.0, bins };
        if let Ok((_, report)) = fit_slice_with_report(&profile) {
            prop_assert!(report.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
