//! Feasible discrete triples tracking a smooth reference, with the a priori bound.

use std::sync::Arc;

use sweep_core::approximation::{approximate_feasible, Mesh};
use sweep_core::costs::{RunningCost, TerminalCost};
use sweep_core::dynamics::{PerturbationField, ProblemSpec};
use sweep_core::geometry::GeneratorSet;
use sweep_core::path::FnPath;
use sweep_core::{Matrix, Vector};

pub fn main() {
    let v = |x: f64| Vector::from_element(1, x);
    // Reference x̄ = 1 − 0.4(1 + t²) against a fixed shift ū = 1, driven by f = a.
    let reference = FnPath::new(
        1.0,
        [Arc::new(move |t| v(1.0 - 0.4 * (1.0 + t * t))), Arc::new(move |_| v(1.0)), Arc::new(move |t| v(0.8 * t))],
        [Arc::new(move |t| v(-0.8 * t)), Arc::new(move |_| v(0.0)), Arc::new(move |_| v(0.8))],
    );
    let spec = ProblemSpec {
        generators: GeneratorSet::from_rows(&[&[1.0]]).expect("generator"),
        field: PerturbationField::affine(Matrix::zeros(1, 1), Matrix::identity(1, 1), Vector::zeros(1), 0.0, 1.0).expect("field"),
        x0: v(0.6),
        u0: v(1.0),
        control_dim: 1,
        radius: 1.0,
        horizon: 1.0,
        tau: 0.0,
        terminal: TerminalCost::zero(1),
        running: RunningCost::zero(6),
        ilm_epsilon: 0.5,
    };
    for k in [10, 20, 40, 80] {
        let mesh = Mesh::for_spec(&spec, k).expect("mesh");
        let (_, report) = approximate_feasible(&reference, &spec, &mesh).expect("construction");
        println!(
            "k = {k:>3}: max gap {:.3e} <= eps_k {:.3e}, worst hard residual {:.1e}",
            report.max_state_gap,
            report.eps_k,
            report.residuals.worst_hard()
        );
    }
}
