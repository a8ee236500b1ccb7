//! Convergence of discrete optima to a curved reference arc.

use std::sync::Arc;

use sweep_core::costs::{RunningCost, TerminalCost};
use sweep_core::dynamics::{PerturbationField, ProblemSpec};
use sweep_core::geometry::GeneratorSet;
use sweep_core::optimizer::{convergence_study, OptimizerConfig};
use sweep_core::path::FnPath;
use sweep_core::{Matrix, Vector};

pub fn main() {
    let v = |x: f64| Vector::from_element(1, x);
    // ẋ = −x inside C + 1 = (−∞, 1]: the reference is x̄ = ½e^{−t}.
    let spec = ProblemSpec {
        generators: GeneratorSet::from_rows(&[&[1.0]]).expect("generator"),
        field: PerturbationField::affine(Matrix::identity(1, 1), Matrix::identity(1, 1), Vector::zeros(1), 1.0, 3.0).expect("field"),
        x0: v(0.5),
        u0: v(1.0),
        control_dim: 1,
        radius: 1.0,
        horizon: 1.0,
        tau: 0.0,
        terminal: TerminalCost::zero(1),
        running: RunningCost::zero(6),
        ilm_epsilon: 0.5,
    };
    let reference = FnPath::new(
        1.0,
        [Arc::new(move |t: f64| v(0.5 * (-t).exp())), Arc::new(move |_| v(1.0)), Arc::new(move |_| v(0.0))],
        [Arc::new(move |t: f64| v(-0.5 * (-t).exp())), Arc::new(move |_| v(0.0)), Arc::new(move |_| v(0.0))],
    );
    let study = convergence_study(&spec, &reference, &[10, 20, 40, 80], &OptimizerConfig::default()).expect("study");
    for row in &study.rows {
        println!("k = {:>3}: J = {:.6e}, convergence sum {:.3e}, max state gap {:.3e}", row.k, row.j_value, row.convergence_sum, row.max_state_gap);
    }
    println!("nonincreasing {}, halves {}", study.nonincreasing_within_noise, study.halves_from_first_to_last);
}
