//! Closed-form discrete optima of the worked example for growing `k`.

use sweep_core::example81::{example81_solve, given_reference_mode, problem, Example81Mode, OPTIMAL_VALUE};
use sweep_core::optimality::residual_explicit;

pub fn main() {
    let spec = problem();
    for k in [1, 2, 5, 10, 50] {
        for mode in [Example81Mode::FixedPoint, given_reference_mode(k).expect("mode")] {
            let sol = example81_solve(k, &mode).expect("closed form");
            let report = residual_explicit(&sol.triple, &sol.certificate, sol.mode(), &spec, 1e-9).expect("report");
            let label = if matches!(mode, Example81Mode::FixedPoint) { "fixed point" } else { "reference" };
            println!(
                "k = {k:>2} {label:<11}: a_0 = {:+.6}, x_k = {:.6}, J - J* = {:+.1e}, certificate {}",
                sol.triple.a[0][0],
                sol.triple.x[k][0],
                sol.j_value - OPTIMAL_VALUE,
                if report.pass { "ok" } else { "fails" }
            );
        }
    }
}
