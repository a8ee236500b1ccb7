//! Coderivative family of the sweeping field against a sampled oracle of
//! limiting normals.

use sweep_core::approximation::DEFAULT_ILM_EPSILON;
use sweep_core::calculus::{coderivative_equality_check, coderivative_inclusion_check};
use sweep_core::costs::{RunningCost, TerminalCost};
use sweep_core::dynamics::{PerturbationField, ProblemSpec};
use sweep_core::geometry::GeneratorSet;
use sweep_core::{Matrix, Vector};

fn corner(rows: &[&[f64]]) -> ProblemSpec {
    let generators = GeneratorSet::from_rows(rows).expect("generators");
    let n = generators.dim();
    ProblemSpec {
        field: PerturbationField::affine(Matrix::zeros(n, n), Matrix::identity(n, n), Vector::zeros(n), 0.0, 1.0).expect("field"),
        x0: Vector::zeros(n),
        u0: Vector::zeros(n),
        control_dim: n,
        radius: 1.0,
        horizon: 1.0,
        tau: 0.0,
        terminal: TerminalCost::zero(n),
        running: RunningCost::zero(6 * n),
        ilm_epsilon: DEFAULT_ILM_EPSILON,
        generators,
    }
}

pub fn main() {
    for (label, rows) in [("half-line", vec![&[1.0][..]]), ("quadrant", vec![&[1.0, 0.0][..], &[0.0, 1.0][..]])] {
        let spec = corner(&rows);
        let z = Vector::zeros(spec.state_dim());
        let verdict = coderivative_equality_check(&z, &z, &z, &z, &spec, 256, 1).expect("independent generators");
        println!("{label}: equality holds {} ({verdict:?})", verdict.holds(1e-9));
    }
    let spec = corner(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
    let z = Vector::zeros(2);
    let verdict = coderivative_inclusion_check(&z, &z, &z, &z, &spec, 256, 1).expect("inclusion");
    println!("dependent corner: oracle inside family up to {:.1e}", verdict.oracle_in_family);
}
