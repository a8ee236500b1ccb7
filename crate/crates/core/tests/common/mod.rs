#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sweep_core::dynamics::ProblemSpec;
use sweep_core::geometry::GeneratorSet;
use sweep_core::io::load_problem;
use sweep_core::path::ContinuousPath;
use sweep_core::Vector;

pub fn worked_problem_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("sec8.json")
}

pub fn worked_problem() -> (ProblemSpec, ContinuousPath) {
    let loaded = load_problem(&worked_problem_path()).expect("bundled problem loads");
    (loaded.spec, loaded.reference.expect("bundled problem has a reference"))
}

/// Generator sets with `n ≤ max_n`, `m ≤ max_m` and entries bounded away from zero vectors.
pub fn generator_sets(max_n: usize, max_m: usize) -> impl Strategy<Value = GeneratorSet> {
    (1..=max_n, 1..=max_m)
        .prop_flat_map(|(n, m)| proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, n), m))
        .prop_filter("generators must be nonzero", |gs| gs.iter().all(|g| g.iter().map(|v| v * v).sum::<f64>() > 0.01))
        .prop_map(|gs| GeneratorSet::new(gs.into_iter().map(Vector::from_vec).collect()).expect("valid generators"))
}

/// Raw feasibility test against the inequalities, independent of the projection code.
pub fn is_feasible(c: &GeneratorSet, p: &Vector, u: &Vector) -> bool {
    let rel = p - u;
    c.generators().iter().all(|g| g.dot(&rel) <= 0.0)
}

/// Feasible points of `C + u`: the apex, Gaussian rejection samples around
/// `u` and `near`, topped up by samples on random faces so that thin cones
/// (for instance with empty interior) are covered too.
pub fn feasible_samples(c: &GeneratorSet, u: &Vector, near: &Vector, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = c.dim();
    let mut out = vec![u.clone()];
    let offset = |rng: &mut ChaCha8Rng, local: bool| {
        let scale = if local { 10f64.powi(-rng.random_range(1..6)) } else { 3.0 };
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * scale)
    };
    for attempt in 0..4 * count {
        if out.len() >= count {
            break;
        }
        let local = attempt % 2 == 0;
        let cand = if local { near } else { u } + offset(&mut rng, local);
        if is_feasible(c, &cand, u) {
            out.push(cand);
        }
    }
    let m = c.count();
    let mut attempt = 0;
    while out.len() < count && attempt < 20 * count {
        attempt += 1;
        let face: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
        let projector = face_projector(c, &face);
        let local = attempt % 2 == 0;
        let base = if local { near - u } else { Vector::zeros(n) };
        let rel = &projector * (base + offset(&mut rng, local));
        if c.generators().iter().all(|g| g.dot(&rel) <= 1e-12) {
            out.push(rel + u);
        }
    }
    out
}

/// Orthogonal projector onto `{x : <x*_i, x> = 0, i ∈ face}`.
fn face_projector(c: &GeneratorSet, face: &[usize]) -> sweep_core::Matrix {
    let n = c.dim();
    let identity = sweep_core::Matrix::identity(n, n);
    if face.is_empty() {
        return identity;
    }
    let rows = sweep_core::Matrix::from_fn(face.len(), n, |r, col| c.generators()[face[r]][col]);
    let pinv = rows.clone().pseudo_inverse(1e-12).expect("pseudo-inverse");
    identity - pinv * rows
}

pub fn vector(values: &[f64]) -> Vector {
    Vector::from_row_slice(values)
}

/// Problem with an affine field `A x + B a + c`, zero costs and declared
/// constants large enough for the sampled growth test.
pub struct AffineProblem {
    pub generators: Vec<Vector>,
    pub a: sweep_core::Matrix,
    pub b: sweep_core::Matrix,
    pub c: Vector,
    pub x0: Vector,
    pub u0: Vector,
    pub radius: f64,
    pub horizon: f64,
}

impl AffineProblem {
    pub fn build(self) -> ProblemSpec {
        use sweep_core::costs::{RunningCost, TerminalCost};
        use sweep_core::dynamics::PerturbationField;
        let n = self.x0.len();
        let d = self.b.ncols();
        let lipschitz = self.a.clone().svd(false, false).singular_values.max();
        let growth = 1.0 + lipschitz + self.b.norm() + self.c.norm();
        let spec = ProblemSpec {
            generators: GeneratorSet::new(self.generators).expect("generators"),
            field: PerturbationField::affine(self.a, self.b, self.c, lipschitz, growth).expect("field"),
            x0: self.x0,
            u0: self.u0,
            control_dim: d,
            radius: self.radius,
            horizon: self.horizon,
            tau: 0.0,
            terminal: TerminalCost::zero(n),
            running: RunningCost::zero(2 * (2 * n + d)),
            ilm_epsilon: 0.5,
        };
        spec.validate().expect("valid spec");
        spec
    }
}

/// The kinked 1D arc `x(t) = min(t, 1)` driven by `f = a`, `a ≡ −1`, `C = {x ≤ 0}`, `u ≡ 1`.
pub fn kinked_arc_problem() -> ProblemSpec {
    AffineProblem {
        generators: vec![vector(&[1.0])],
        a: sweep_core::Matrix::zeros(1, 1),
        b: sweep_core::Matrix::identity(1, 1),
        c: Vector::zeros(1),
        x0: vector(&[0.0]),
        u0: vector(&[1.0]),
        radius: 1.0,
        horizon: 1.0,
    }
    .build()
}

/// The arc `x(t) = ½e^{−t}` driven by `f = x`, strictly inside `C + u` with `u ≡ 1`.
pub fn decaying_arc_problem() -> ProblemSpec {
    AffineProblem {
        generators: vec![vector(&[1.0])],
        a: sweep_core::Matrix::identity(1, 1),
        b: sweep_core::Matrix::identity(1, 1),
        c: Vector::zeros(1),
        x0: vector(&[0.5]),
        u0: vector(&[1.0]),
        radius: 1.0,
        horizon: 1.0,
    }
    .build()
}

/// Constant controls `u ≡ u0`, `a ≡ a0` as a path.
pub fn constant_controls(spec: &ProblemSpec, a0: Vector) -> ContinuousPath {
    ContinuousPath::constant(spec.horizon, spec.x0.clone(), spec.u0.clone(), a0)
}

/// Max node error of the catching-up scheme against `exact` at step count `k`.
pub fn node_error(spec: &ProblemSpec, controls: &ContinuousPath, k: usize, exact: impl Fn(f64) -> f64) -> f64 {
    let path = sweep_core::dynamics::catching_up_integrate(spec, controls, k).expect("integrates");
    path.times.iter().zip(&path.x).map(|(&t, x)| (x[0] - exact(t)).abs()).fold(0.0, f64::max)
}

/// Random smooth feasible reference in dimension 1 or 2.
///
/// The relative position `x − u` stays in the interior of `C`, the shift
/// runs on the sphere `‖u‖ = r` and the control absorbs the velocity, so
/// `−ẋ = f(x, a)` holds exactly.
pub fn smooth_reference(seed: u64, n: usize) -> (ProblemSpec, sweep_core::path::FnPath) {
    use std::sync::Arc;
    use sweep_core::Matrix;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = rng.random_range(0.5..2.0);
    let (inner, across) = if n == 1 { (vector(&[-1.0]), vector(&[0.0])) } else {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        (vector(&[angle.cos(), angle.sin()]), vector(&[-angle.sin(), angle.cos()]))
    };
    let mut generators = Vec::new();
    let count = if n == 1 { 1 } else { rng.random_range(1..=3) };
    while generators.len() < count {
        let g = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if g.norm() > 0.2 && g.dot(&inner) < -0.3 * g.norm() {
            generators.push(g);
        }
    }
    let slack = generators.iter().map(|g| -g.dot(&inner) / g.norm()).fold(f64::INFINITY, f64::min);
    let wiggle = if n == 1 { 0.0 } else { 0.5 * slack };
    let depth = rng.random_range(0.2..1.0);
    let omega = rng.random_range(0.5..4.0);
    let phase0 = rng.random_range(0.0..std::f64::consts::TAU);
    let spin = if n == 1 { 0.0 } else { rng.random_range(-2.0..2.0) };
    let a_mat = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    let c_vec = Vector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));

    let rel = {
        let (inner, across) = (inner.clone(), across.clone());
        move |t: f64| (&inner + &across * (wiggle * (omega * t).sin())) * (depth * (1.0 + 0.3 * (omega * t + 1.0).cos()))
    };
    let rel_rate = {
        let (inner, across) = (inner.clone(), across.clone());
        move |t: f64| {
            let scale = depth * (1.0 + 0.3 * (omega * t + 1.0).cos());
            let scale_rate = -depth * 0.3 * omega * (omega * t + 1.0).sin();
            (&inner + &across * (wiggle * (omega * t).sin())) * scale_rate + &across * (wiggle * omega * (omega * t).cos()) * scale
        }
    };
    let shift = move |t: f64| {
        if n == 1 { vector(&[radius]) } else {
            let phi = phase0 + spin * t + 0.3 * t * t;
            vector(&[radius * phi.cos(), radius * phi.sin()])
        }
    };
    let shift_rate = move |t: f64| {
        if n == 1 { vector(&[0.0]) } else {
            let phi = phase0 + spin * t + 0.3 * t * t;
            let dphi = spin + 0.6 * t;
            vector(&[-radius * dphi * phi.sin(), radius * dphi * phi.cos()])
        }
    };
    let state = {
        let (rel, shift) = (rel.clone(), shift);
        move |t: f64| rel(t) + shift(t)
    };
    let state_rate = {
        let (rel_rate, shift_rate) = (rel_rate.clone(), shift_rate);
        move |t: f64| rel_rate(t) + shift_rate(t)
    };
    let control = {
        let (state, state_rate, a_mat, c_vec) = (state.clone(), state_rate.clone(), a_mat.clone(), c_vec.clone());
        move |t: f64| -state_rate(t) - &a_mat * state(t) - &c_vec
    };
    let control_rate = {
        let (state_rate, a_mat) = (state_rate.clone(), a_mat.clone());
        let h = 1e-5;
        // The control is smooth; its rate only enters the proximity terms.
        move |t: f64| {
            let second = (state_rate(t + h) - state_rate(t - h)) / (2.0 * h);
            -second - &a_mat * state_rate(t)
        }
    };
    let x0 = state(0.0);
    let u0 = shift(0.0);
    let spec = AffineProblem { generators, a: a_mat, b: Matrix::identity(n, n), c: c_vec, x0, u0, radius, horizon: 1.0 }.build();
    let reference = sweep_core::path::FnPath::new(
        1.0,
        [Arc::new(state), Arc::new(shift), Arc::new(control)],
        [Arc::new(state_rate), Arc::new(shift_rate), Arc::new(control_rate)],
    );
    (spec, reference)
}

/// Reference for [`decaying_arc_problem`]: `x̄ = ½e^{−t}`, `ū ≡ 1`, `ā ≡ 0`.
pub fn decaying_arc_reference() -> sweep_core::path::FnPath {
    use std::sync::Arc;
    sweep_core::path::FnPath::new(
        1.0,
        [Arc::new(|t: f64| vector(&[0.5 * (-t).exp()])), Arc::new(|_| vector(&[1.0])), Arc::new(|_| vector(&[0.0]))],
        [Arc::new(|t: f64| vector(&[-0.5 * (-t).exp()])), Arc::new(|_| vector(&[0.0])), Arc::new(|_| vector(&[0.0]))],
    )
}
