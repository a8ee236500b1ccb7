mod common;

use std::sync::Arc;

use common::{constant_controls, decaying_arc_problem, kinked_arc_problem, node_error, vector, AffineProblem};
use proptest::prelude::*;
use sweep_core::dynamics::{catching_up_integrate, moving_set_modulus_check, wellposedness_bounds};
use sweep_core::path::{Component, ContinuousPath, FnPath, PathLike};
use sweep_core::{Matrix, Vector};

fn rotating_shift(radius: f64, speed: f64) -> FnPath {
    let value = move |t: f64| Vector::from_vec(vec![radius * (speed * t).cos(), radius * (speed * t).sin()]);
    let rate = move |t: f64| Vector::from_vec(vec![-radius * speed * (speed * t).sin(), radius * speed * (speed * t).cos()]);
    let zero = |_: f64| Vector::zeros(2);
    FnPath::new(1.0, [Arc::new(zero), Arc::new(value), Arc::new(zero)], [Arc::new(zero), Arc::new(rate), Arc::new(zero)])
}

#[test]
fn kinked_arc_is_tracked_within_one_step() {
    let spec = kinked_arc_problem();
    let controls = constant_controls(&spec, vector(&[-1.0]));
    for k in [4, 8, 16, 32, 64] {
        let err = node_error(&spec, &controls, k, |t| t.min(1.0));
        assert!(err <= 1.0 / k as f64, "k = {k}: error {err}");
    }
}

#[test]
fn smooth_drift_converges_at_first_order() {
    let spec = decaying_arc_problem();
    let controls = constant_controls(&spec, vector(&[0.0]));
    let exact = |t: f64| 0.5 * (-t).exp();
    for k in [10, 20, 40, 80] {
        let coarse = node_error(&spec, &controls, k, exact);
        let fine = node_error(&spec, &controls, 2 * k, exact);
        let ratio = coarse / fine;
        assert!((1.6..=2.4).contains(&ratio), "k = {k}: ratio {ratio}");
        assert!(coarse <= 1.0 / k as f64);
    }
}

#[test]
fn distance_modulus_holds_for_a_rotating_set() {
    let c = sweep_core::geometry::GeneratorSet::new(vec![vector(&[1.0, 0.2]), vector(&[-0.3, 1.0])]).unwrap();
    for speed in [0.5, 2.0, 6.0] {
        let worst = moving_set_modulus_check(&c, &rotating_shift(1.0, speed), 500, 3.0, 11);
        assert!(worst <= 1e-10, "speed {speed}: slack {worst}");
    }
}

fn rotating_problem(gens: Vec<Vec<f64>>, drift: Vec<f64>) -> sweep_core::dynamics::ProblemSpec {
    AffineProblem {
        generators: gens.into_iter().map(Vector::from_vec).collect(),
        a: Matrix::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0]),
        b: Matrix::identity(2, 2),
        c: Vector::from_vec(drift),
        x0: vector(&[1.0, 0.0]),
        u0: vector(&[1.0, 0.0]),
        radius: 1.0,
        horizon: 1.0,
    }
    .build()
}

fn sampled(spec: &sweep_core::dynamics::ProblemSpec, speed: f64, control: Vector, k: usize) -> ContinuousPath {
    let shift = rotating_shift(1.0, speed);
    let times: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
    let u: Vec<Vector> = times.iter().map(|&t| shift.value(Component::Shift, t)).collect();
    let x = vec![spec.x0.clone(); k + 1];
    let a = vec![control; k + 1];
    ContinuousPath::new(times, x, u, a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn catching_up_stays_in_the_moving_set(
        gens in proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, 2), 1..=4)
            .prop_filter("nonzero", |g| g.iter().all(|v| v[0].abs() + v[1].abs() > 0.1)),
        drift in proptest::collection::vec(-1.0..1.0f64, 2),
        control in proptest::collection::vec(-1.0..1.0f64, 2),
        speed in 0.0..4.0f64,
        k in 4usize..60,
    ) {
        // x0 = u0 keeps the start at the apex, which is feasible for any generators.
        let spec = rotating_problem(gens, drift);
        let controls = sampled(&spec, speed, Vector::from_vec(control), k);
        let path = catching_up_integrate(&spec, &controls, k).unwrap();
        let bounds = wellposedness_bounds(&spec, &controls);
        for (x, u) in path.x.iter().zip(&path.u) {
            prop_assert!(spec.generators.max_violation(&(x - u)).1 <= 1e-9);
            prop_assert!(x.norm() <= bounds.state_bound + 1e-9);
        }
    }
}
