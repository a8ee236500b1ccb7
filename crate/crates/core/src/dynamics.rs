//! Perturbed sweeping dynamics `−ẋ ∈ N(x − u; C) + f(x, a)`: the set-valued
//! right-hand side, a catching-up integrator and the a priori bounds.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costs::{RunningCost, TerminalCost};
use crate::error::{Error, Result};
use crate::geometry::{GeneratorSet, ACTIVITY_TOL};
use crate::path::{Component, ContinuousPath, PathLike};
use crate::{Matrix, Vector};

type FieldFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// Representation of the perturbation `f(x, a)`.
#[derive(Clone)]
pub enum FieldKind {
    /// `f(x, a) = A x + B a + c`.
    Affine { a: Matrix, b: Matrix, c: Vector },
    /// Opaque closure; `smooth` enables finite-difference Jacobians.
    Callback { f: FieldFn, smooth: bool },
}

/// Perturbation with its declared Lipschitz constant `K` and growth constant `M`.
#[derive(Clone)]
pub struct PerturbationField {
    pub kind: FieldKind,
    pub lipschitz: f64,
    pub growth: f64,
}

impl std::fmt::Debug for PerturbationField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = f.debug_struct("PerturbationField");
        if let FieldKind::Affine { a, b, c } = &self.kind {
            s.field("a", a).field("b", b).field("c", c);
        }
        s.field("lipschitz", &self.lipschitz).field("growth", &self.growth).finish_non_exhaustive()
    }
}

const JACOBIAN_STEP: f64 = 1e-6;

impl PerturbationField {
    /// Affine field; `K` must dominate the spectral norm of `A`.
    pub fn affine(a: Matrix, b: Matrix, c: Vector, lipschitz: f64, growth: f64) -> Result<Self> {
        let n = c.len();
        if a.shape() != (n, n) || b.nrows() != n {
            return Err(Error::Dimension(format!(
                "affine field shapes A {:?}, B {:?}, c {}",
                a.shape(),
                b.shape(),
                n
            )));
        }
        if lipschitz.is_nan() || lipschitz < 0.0 || growth.is_nan() || growth <= 0.0 {
            return Err(Error::InvalidSpec { field: "perturbation".into(), reason: "K must be nonnegative and M positive".into() });
        }
        let op_norm = a.clone().svd(false, false).singular_values.max();
        if lipschitz + 1e-12 < op_norm {
            return Err(Error::InvalidSpec {
                field: "perturbation.lipschitz".into(),
                reason: format!("declared K = {lipschitz} is below ‖A‖ = {op_norm}"),
            });
        }
        Ok(Self { kind: FieldKind::Affine { a, b, c }, lipschitz, growth })
    }

    pub fn eval(&self, x: &Vector, a: &Vector) -> Vector {
        match &self.kind {
            FieldKind::Affine { a: am, b, c } => am * x + b * a + c,
            FieldKind::Callback { f, .. } => f(x, a),
        }
    }

    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            FieldKind::Affine { .. } => true,
            FieldKind::Callback { smooth, .. } => *smooth,
        }
    }

    fn fd_jacobian(&self, x: &Vector, a: &Vector, wrt_state: bool) -> Matrix {
        let base = if wrt_state { x } else { a };
        let n = self.eval(x, a).len();
        let mut jac = Matrix::zeros(n, base.len());
        for i in 0..base.len() {
            let mut up = base.clone();
            let mut down = base.clone();
            up[i] += JACOBIAN_STEP;
            down[i] -= JACOBIAN_STEP;
            let col = if wrt_state {
                self.eval(&up, a) - self.eval(&down, a)
            } else {
                self.eval(x, &up) - self.eval(x, &down)
            } / (2.0 * JACOBIAN_STEP);
            jac.set_column(i, &col);
        }
        jac
    }

    /// `∇_x f(x, a)`.
    pub fn jacobian_state(&self, x: &Vector, a: &Vector) -> Matrix {
        match &self.kind {
            FieldKind::Affine { a: am, .. } => am.clone(),
            FieldKind::Callback { .. } => self.fd_jacobian(x, a, true),
        }
    }

    /// `∇_a f(x, a)`.
    pub fn jacobian_control(&self, x: &Vector, a: &Vector) -> Matrix {
        match &self.kind {
            FieldKind::Affine { b, .. } => b.clone(),
            FieldKind::Callback { .. } => self.fd_jacobian(x, a, false),
        }
    }

    /// Worst sampled ratio `‖f(x,a)‖ / (M(1 + ‖x‖))` over a box of half-width `radius`.
    pub fn growth_ratio(&self, n: usize, d: usize, radius: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let x = Vector::from_fn(n, |_, _| rng.random_range(-radius..=radius));
                let a = Vector::from_fn(d, |_, _| rng.random_range(-radius..=radius));
                self.eval(&x, &a).norm() / (self.growth * (1.0 + x.norm()))
            })
            .fold(0.0, f64::max)
    }
}

/// Complete data of the sweeping control problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub generators: GeneratorSet,
    pub field: PerturbationField,
    pub x0: Vector,
    /// Value of the shift control at `t = 0`.
    pub u0: Vector,
    pub control_dim: usize,
    pub radius: f64,
    pub horizon: f64,
    pub tau: f64,
    pub terminal: TerminalCost,
    pub running: RunningCost,
    /// Radius of the local neighborhood in the discrete problems.
    pub ilm_epsilon: f64,
}

impl ProblemSpec {
    /// Validate dimensions, initial feasibility and the admissible `τ` range.
    pub fn validate(&self) -> Result<()> {
        let n = self.generators.dim();
        let d = self.control_dim;
        let check = |field: &str, ok: bool, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidSpec { field: field.into(), reason })
            }
        };
        check("x0", self.x0.len() == n, format!("expected length {n}"))?;
        check("u0", self.u0.len() == n, format!("expected length {n}"))?;
        check("r", self.radius > 0.0, "radius must be positive".into())?;
        check("T", self.horizon > 0.0, "horizon must be positive".into())?;
        let tau_max = self.radius.min(self.horizon);
        check("tau", (0.0..=tau_max).contains(&self.tau), format!("tau = {} outside [0, {tau_max}]", self.tau))?;
        check("ilm_epsilon", self.ilm_epsilon > 0.0, "must be positive".into())?;
        let probe = self.field.eval(&self.x0, &Vector::zeros(d));
        check("perturbation", probe.len() == n, format!("field returns length {}", probe.len()))?;
        if let RunningCost::Quadratic { hessian, linear, .. } = &self.running {
            let len = 2 * (2 * n + d);
            check("running_cost", hessian.shape() == (len, len) && linear.len() == len, format!("expected stacked length {len}"))?;
        }
        if let TerminalCost::Quadratic { q, target } = &self.terminal {
            check("terminal_cost", q.shape() == (n, n) && target.len() == n, format!("expected dimension {n}"))?;
        }
        let (index, value) = self.generators.max_violation(&(&self.x0 - &self.u0));
        if value > ACTIVITY_TOL {
            return Err(Error::InfeasibleStart { index: index + 1, value });
        }
        let ratio = self.field.growth_ratio(n, d, 1.0, 256, 0);
        if ratio > 1.0 {
            log::warn!("declared growth constant M = {} is exceeded by a factor {ratio:.3} on sampled points", self.field.growth);
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.generators.dim()
    }

    /// Length of the stacked argument `(x, u, a, ẋ, u̇, ȧ)` of the running cost.
    pub fn stacked_len(&self) -> usize {
        2 * (2 * self.state_dim() + self.control_dim)
    }
}

/// Nearest point of `F(x, u, a) = cone{x*_i : i ∈ I(x − u)} + f(x, a)` to `w`.
pub fn f_image_project(w: &Vector, x: &Vector, u: &Vector, a: &Vector, spec: &ProblemSpec) -> Result<(Vector, f64)> {
    let rel = x - u;
    let (index, excess) = spec.generators.max_violation(&rel);
    if excess > ACTIVITY_TOL {
        return Err(Error::EmptyImage { index: index + 1, excess });
    }
    let active = spec.generators.active_indices(&rel, ACTIVITY_TOL).indices;
    let drift = spec.field.eval(x, a);
    let (cone_part, _) = spec.generators.project_onto_cone(&(w - &drift), &active);
    let nearest = cone_part + drift;
    let dist = (w - &nearest).norm();
    Ok((nearest, dist))
}

/// Catching-up scheme `x_{j+1} = Π_{C + u(t_{j+1})}(x_j − h f(x_j, a(t_j)))`.
///
/// The returned path carries the integrated states together with the
/// sampled controls on the uniform mesh.
pub fn catching_up_integrate(spec: &ProblemSpec, controls: &dyn PathLike, k: usize) -> Result<ContinuousPath> {
    if k < 1 {
        return Err(Error::StepCount(k));
    }
    let h = spec.horizon / k as f64;
    let times: Vec<f64> = (0..=k).map(|j| if j == k { spec.horizon } else { j as f64 * h }).collect();
    let u: Vec<Vector> = times.iter().map(|&t| controls.value(Component::Shift, t)).collect();
    let a: Vec<Vector> = times.iter().map(|&t| controls.value(Component::Control, t)).collect();
    let (index, excess) = spec.generators.max_violation(&(&spec.x0 - &u[0]));
    if excess > ACTIVITY_TOL {
        return Err(Error::InfeasibleStart { index: index + 1, value: excess });
    }
    let mut x = Vec::with_capacity(k + 1);
    x.push(spec.x0.clone());
    for j in 0..k {
        let drifted = &x[j] - spec.field.eval(&x[j], &a[j]) * h;
        x.push(spec.generators.project_translated(&drifted, &u[j + 1]).point);
    }
    ContinuousPath::new(times, x, u, a)
}

/// Constants of the a priori estimate for the controlled sweeping process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosedness {
    /// Uniform bound `l` on `‖x(t)‖`.
    pub state_bound: f64,
    pub growth: f64,
    /// `∫_0^T ‖u̇(t)‖ dt`.
    pub shift_variation: f64,
}

impl WellPosedness {
    /// Velocity bound `2(1 + l)M + ‖u̇(t)‖`.
    pub fn velocity_bound(&self, shift_speed: f64) -> f64 {
        2.0 * (1.0 + self.state_bound) * self.growth + shift_speed
    }
}

/// State bound `l = ‖x0‖ + e^{2MT}(2MT(1 + ‖x0‖) + ∫‖u̇‖)`.
pub fn wellposedness_bounds(spec: &ProblemSpec, shift: &dyn PathLike) -> WellPosedness {
    let m = spec.field.growth;
    let t = spec.horizon;
    let x0 = spec.x0.norm();
    let shift_variation = shift.speed_integral(Component::Shift, 0.0, t);
    let state_bound = x0 + (2.0 * m * t).exp() * (2.0 * m * t * (1.0 + x0) + shift_variation);
    WellPosedness { state_bound, growth: m, shift_variation }
}

/// Velocity bound on each interval of a piecewise-linear shift path.
pub fn velocity_bounds_on_intervals(bounds: &WellPosedness, shift: &ContinuousPath) -> Vec<f64> {
    shift
        .times
        .windows(2)
        .map(|w| bounds.velocity_bound(shift.velocity(Component::Shift, w[0]).norm()))
        .collect()
}

/// Distance from `y` to `C + u`.
pub fn distance_to_moving_set(c: &GeneratorSet, y: &Vector, u: &Vector) -> f64 {
    (y - c.project_translated(y, u).point).norm()
}

/// Worst slack of `|dist(y; C+u(t)) − dist(y; C+u(s))| ≤ |v(t) − v(s)|` over random samples.
///
/// Points are drawn from a box of half-width `radius`. A non-positive result
/// means the modulus inequality held on every sample.
pub fn moving_set_modulus_check(c: &GeneratorSet, shift: &dyn PathLike, samples: usize, radius: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = shift.horizon();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let y = Vector::from_fn(c.dim(), |_, _| rng.random_range(-radius..=radius));
        let t = rng.random_range(0.0..=horizon);
        let s = rng.random_range(0.0..=horizon);
        let dt = distance_to_moving_set(c, &y, &shift.value(Component::Shift, t));
        let ds = distance_to_moving_set(c, &y, &shift.value(Component::Shift, s));
        let (lo, hi) = if t < s { (t, s) } else { (s, t) };
        let modulus = shift.speed_integral(Component::Shift, lo, hi);
        worst = worst.max((dt - ds).abs() - modulus);
    }
    worst
}
