//! Recovers multipliers for a discrete optimum and checks both forms of the
//! optimality system.

use sweep_core::example81::{example81_solve, problem, Example81Mode};
use sweep_core::optimality::{recover_multipliers, residual_el, residual_explicit};

pub fn main() {
    let spec = problem();
    let sol = example81_solve(4, &Example81Mode::FixedPoint).expect("closed form");
    let recovered = recover_multipliers(&sol.triple, sol.mode(), &spec, 1.0).expect("recovery");
    let explicit = residual_explicit(&sol.triple, &recovered, sol.mode(), &spec, 1e-8).expect("smooth field");
    print!("{}", explicit.pretty());
    let graph = residual_el(&sol.triple, &recovered, sol.mode(), &spec, 1e-8).expect("graph form");
    print!("{}", graph.pretty());
    let abnormal = recover_multipliers(&sol.triple, sol.mode(), &spec, 0.0).expect("recovery");
    println!("best fit with zero cost multiplier: {:.3e}", abnormal.meta.fit_residual.unwrap_or(0.0));
}
