//! Solves the bundled one-dimensional problem in both reference modes.

use sweep_core::approximation::{Mesh, ReferenceMode};
use sweep_core::io::load_problem;
use sweep_core::optimizer::{solve_pk, OptimizerConfig};

pub fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sec8.json");
    let loaded = load_problem(&path).expect("bundled problem");
    let reference = loaded.reference.as_ref().expect("reference block");
    for k in [5, 20] {
        let mesh = Mesh::for_spec(&loaded.spec, k).expect("mesh");
        for (label, mode) in [("fixed point", ReferenceMode::FixedPoint), ("reference", ReferenceMode::Path(reference))] {
            let sol = solve_pk(&loaded.spec, mode, &mesh, &OptimizerConfig::default()).expect("solver");
            println!(
                "k = {k:>2} {label:<11}: J = {:.12}, a_0 = {:+.9}, converged {}",
                sol.j_value, sol.z_opt.a[0][0], sol.converged
            );
        }
    }
}
