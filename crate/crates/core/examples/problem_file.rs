//! Reads the bundled problem file, prints its summary and writes it back.

use sweep_core::io::{load_problem, to_json_string, ProblemFile};

pub fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sec8.json");
    let loaded = load_problem(&path).expect("bundled problem");
    let spec = &loaded.spec;
    println!(
        "{}: n = {}, d = {}, m = {}, r = {}, T = {}, tau = {}",
        loaded.name,
        spec.state_dim(),
        spec.control_dim,
        spec.generators.count(),
        spec.radius,
        spec.horizon,
        spec.tau
    );
    let file = ProblemFile::from_problem(&loaded.name, spec, loaded.reference.as_ref()).expect("serializable");
    print!("{}", to_json_string(&file).expect("json"));
}
