//! Catching-up integration of a sweeping process inside a rotating wedge.

use std::sync::Arc;

use sweep_core::costs::{RunningCost, TerminalCost};
use sweep_core::dynamics::{catching_up_integrate, PerturbationField, ProblemSpec};
use sweep_core::geometry::GeneratorSet;
use sweep_core::path::{Component, ContinuousPath, FnPath, PathLike};
use sweep_core::{Matrix, Vector};

pub fn main() {
    let spec = ProblemSpec {
        generators: GeneratorSet::from_rows(&[&[1.0, 0.3], &[-0.2, 1.0]]).expect("generators"),
        field: PerturbationField::affine(Matrix::zeros(2, 2), Matrix::identity(2, 2), Vector::zeros(2), 0.0, 1.0).expect("field"),
        x0: Vector::from_vec(vec![1.0, 0.0]),
        u0: Vector::from_vec(vec![1.0, 0.0]),
        control_dim: 2,
        radius: 1.0,
        horizon: 1.0,
        tau: 0.0,
        terminal: TerminalCost::zero(2),
        running: RunningCost::zero(12),
        ilm_epsilon: 0.5,
    };
    spec.validate().expect("valid problem");
    let speed = 3.0;
    let zero = |_: f64| Vector::zeros(2);
    let push = |_: f64| Vector::from_vec(vec![1.5, -1.0]);
    let shift = move |t: f64| Vector::from_vec(vec![(speed * t).cos(), (speed * t).sin()]);
    let rate = move |t: f64| Vector::from_vec(vec![-speed * (speed * t).sin(), speed * (speed * t).cos()]);
    let controls = FnPath::new(1.0, [Arc::new(zero), Arc::new(shift), Arc::new(push)], [Arc::new(zero), Arc::new(rate), Arc::new(zero)]);

    for k in [10, 100, 1000, 10000] {
        let times: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
        let sample = |c: Component| times.iter().map(|&t| controls.value(c, t)).collect::<Vec<_>>();
        let path = ContinuousPath::new(times.clone(), sample(Component::State), sample(Component::Shift), sample(Component::Control)).expect("path");
        let traj = catching_up_integrate(&spec, &path, k).expect("integration");
        let last = traj.x.last().expect("nonempty");
        let worst = traj.x.iter().zip(&traj.u).map(|(x, u)| spec.generators.max_violation(&(x - u)).1).fold(f64::MIN, f64::max);
        println!("k = {k:>4}: x(T) = ({:+.9}, {:+.9}), worst constraint value {worst:.2e}", last[0], last[1]);
    }
}
