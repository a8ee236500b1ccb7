//! Nearest point of a translated polyhedral cone and its KKT multipliers.

use sweep_core::geometry::GeneratorSet;
use sweep_core::Vector;

pub fn main() {
    let cone = GeneratorSet::from_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]).expect("generators");
    let shift = Vector::from_vec(vec![0.5, -0.25]);
    for point in [[2.0, 1.0], [-1.0, -1.0], [0.3, 3.0]] {
        let y = Vector::from_row_slice(&point);
        let proj = cone.project_translated(&y, &shift);
        let active = cone.active_indices(&(&proj.point - &shift), 1e-9).indices;
        println!(
            "y = {:?} -> {:?}, multipliers {:?}, active {:?}",
            point,
            proj.point.as_slice(),
            proj.multipliers.as_slice(),
            active
        );
    }
}
