use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use quadrl::params::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_invariants(p: &QuadParams) {
    p.validate().unwrap();
    assert!(p.mass > 0.0);
    assert!((p.mass - p.masses.total()).abs() < 1e-12 * p.mass.max(1.0));
    let sym = (p.inertia - p.inertia.transpose()).abs().max();
    assert!(sym <= 1e-12 * p.inertia.abs().max());
    let eig = p.inertia.symmetric_eigenvalues();
    assert!(eig.iter().all(|&e| e > 0.0), "eigenvalues {eig:?}");
    assert!((p.inertia * p.inertia_inv - Matrix3::identity()).abs().max() < 1e-9);
    let expected_f_max = 0.25 * quadrl::GRAVITY * p.mass * p.thrust_to_weight;
    assert!((p.f_max() - expected_f_max).abs() <= 1e-15 * expected_f_max.max(1.0));
    // the × layout is mirror symmetric, so the tensor is diagonal and Izz dominates
    let off = p.inertia[(0, 1)].abs().max(p.inertia[(0, 2)].abs()).max(p.inertia[(1, 2)].abs());
    assert!(off <= 1e-9 * p.inertia.abs().max());
    assert!(p.inertia[(2, 2)] >= p.inertia[(0, 0)].max(p.inertia[(1, 1)]));
}

#[test]
fn nominal_spread_statistics() {
    let base = nominal_crazyflie();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let masses: Vec<f64> = (0..n).map(|_| sample_nominal(&base, 0.2, &mut rng).unwrap().mass).collect();
    let mean = masses.iter().sum::<f64>() / n as f64;
    let std = (masses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - 0.028).abs() <= 0.01 * 0.028, "mean {mean}");
    assert!((std - 0.0056).abs() <= 0.05 * 0.0056, "std {std}");
}

#[test]
fn wide_spread_never_gives_non_positive_mass() {
    let base = nominal_crazyflie();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20_000 {
        let p = sample_nominal(&base, 0.3, &mut rng).unwrap();
        assert!(p.mass > 0.0);
    }
}

#[test]
fn total_randomization_respects_table_bounds() {
    let limits = RandomizationLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let p = sample_total(&limits, &mut rng);
        assert!((0.05..=0.2).contains(&p.geometry.body_width));
        assert!((1.8..=2.5).contains(&p.thrust_to_weight));
        assert!((0.1..=0.2).contains(&p.settling_time));
        assert!((0.005..=0.02).contains(&p.torque_to_thrust));
        assert!(p.mass <= 5.0);
        check_invariants(&p);
    }
}

#[test]
fn presets_satisfy_invariants() {
    check_invariants(&nominal_crazyflie());
    for p in Platform::ALL {
        check_invariants(&p.params());
    }
}

fn box_part(mass: f64, size: Vector3<f64>, offset: Vector3<f64>) -> Component {
    Component { mass, shape: Shape::Box { x: size.x, y: size.y, z: size.z }, offset }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_sampler_output_is_valid(seed in any::<u64>(), spread in 0.0..0.35f64, lo in 1.2..2.0f64, width in 0.1..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = nominal_crazyflie();
        for mode in [
            RandomizationMode::None,
            RandomizationMode::Nominal { spread },
            RandomizationMode::Total { limits: RandomizationLimits::default() },
            RandomizationMode::ThrustToWeight { lo, hi: lo + width },
        ] {
            check_invariants(&mode.sample(&base, &mut rng).unwrap());
        }
    }

    #[test]
    fn zero_spread_is_identity(seed in any::<u64>()) {
        let base = nominal_crazyflie();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_nominal(&base, 0.0, &mut rng).unwrap();
        prop_assert_eq!(p.mass, base.mass);
        prop_assert_eq!(p.thrust_to_weight, base.thrust_to_weight);
        prop_assert_eq!(p.torque_to_thrust, base.torque_to_thrust);
        prop_assert_eq!(p.settling_time, base.settling_time);
        prop_assert_eq!(p.geometry, base.geometry);
    }

    #[test]
    fn thrust_to_weight_mode_changes_only_the_ratio(seed in any::<u64>()) {
        let base = nominal_crazyflie();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = RandomizationMode::ThrustToWeight { lo: 1.5, hi: 2.5 }.sample(&base, &mut rng).unwrap();
        prop_assert!((1.5..=2.5).contains(&p.thrust_to_weight));
        let mut q = p.clone();
        q.thrust_to_weight = base.thrust_to_weight;
        prop_assert_eq!(q, base);
    }

    #[test]
    fn inertia_is_additive_under_subdivision(
        mass in 0.001..1.0f64,
        sx in 0.01..0.5f64, sy in 0.01..0.5f64, sz in 0.01..0.5f64,
        splits in 1usize..6,
    ) {
        // a box centred at the origin equals the same box cut into slabs along x
        let size = Vector3::new(sx, sy, sz);
        let whole = compose_inertia(&[box_part(mass, size, Vector3::zeros())]).unwrap();
        let slab = sx / splits as f64;
        let parts: Vec<Component> = (0..splits)
            .map(|k| {
                let cx = -sx / 2.0 + slab * (k as f64 + 0.5);
                box_part(mass / splits as f64, Vector3::new(slab, sy, sz), Vector3::new(cx, 0.0, 0.0))
            })
            .collect();
        let cut = compose_inertia(&parts).unwrap();
        prop_assert!((whole - cut).abs().max() <= 1e-12 * whole.abs().max().max(1e-12));
        // and the box matches the textbook formula
        let ixx = mass * (sy * sy + sz * sz) / 12.0;
        prop_assert!((whole[(0, 0)] - ixx).abs() <= 1e-12 * ixx.max(1e-15));
    }
}
