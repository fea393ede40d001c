//! Invariants over randomly drawn inputs.

use approx::assert_relative_eq;
use proptest::prelude::*;

use selfshrink::geometry::{shrinker_residual, GraphContext};
use selfshrink::grid::{GridSpec, ScalarField};
use selfshrink::newton::{residual, DirichletProblem};
use selfshrink::shooting::{integrate, Classification, ShootingProblem};
use selfshrink::weighted::{gaussian_integral, sublevel_integral};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hyperplanes_are_exact_shrinkers(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let spec = GridSpec::new(2, 1.5, 21).unwrap();
        let u = ScalarField::from_fn(spec, |x| a * x[0] + b * x[1]);
        let s = shrinker_residual(&GraphContext::new(u));
        prop_assert!(s.sup_abs() < 1e-10);
    }

    #[test]
    fn residual_is_odd(c in -1.0..1.0f64, k in 0.5..2.0f64) {
        let spec = GridSpec::new(2, 1.0, 15).unwrap();
        let u = ScalarField::from_fn(spec, |x| c * (k * x[0]).sin() + 0.3 * x[0] * x[1]);
        let problem = DirichletProblem::from_fn(spec, |x| x[0]).unwrap();
        let plus = residual(&u, &problem).unwrap();
        let minus = residual(&u.map(|v| -v), &problem.negated()).unwrap();
        for i in 0..spec.len() {
            prop_assert!((plus.at(i) + minus.at(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn lines_through_the_origin_stay_lines(b in -3.0..3.0f64) {
        let t = integrate(&ShootingProblem::new(0.0, b, 6.0)).unwrap();
        prop_assert_eq!(t.classification, Classification::Line);
        prop_assert!(t.deviation < 1e-7);
    }

    #[test]
    fn offset_lines_blow_up(a in prop_oneof![-2.0..-0.05f64, 0.05..2.0f64]) {
        let t = integrate(&ShootingProblem::new(a, 0.0, 20.0)).unwrap();
        prop_assert_eq!(t.classification, Classification::GradientBlowup);
    }

    #[test]
    fn trapezoid_integrates_affine_functions(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let spec = GridSpec::new(2, 1.0, 11).unwrap();
        let g: Vec<f64> = (0..spec.len()).map(|i| {
            let x = spec.point(i);
            a + b * x[0] + c * x[1]
        }).collect();
        assert_relative_eq!(sublevel_integral(&spec, &g, None), 4.0 * a, epsilon = 1e-12);
    }
}

#[test]
fn gaussian_mass_of_a_tilted_line() {
    // A line at angle θ is isometric to R, so its Gaussian mass is 2 sqrt(π).
    let spec = GridSpec::new(1, 30.0, 3001).unwrap();
    let ctx = GraphContext::new(ScalarField::from_fn(spec, |x| 0.75 * x[0]));
    let one = ScalarField::constant(spec, 1.0);
    assert_relative_eq!(gaussian_integral(&ctx, &one, None), 2.0 * std::f64::consts::PI.sqrt(), max_relative = 1e-9);
}
