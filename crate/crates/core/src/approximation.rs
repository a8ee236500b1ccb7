//! Discrete approximation on a uniform mesh: the feasible-solution
//! construction, its error constants, the discrete cost `J_k` and the
//! residuals of the discrete constraints.

use serde::{Deserialize, Serialize};

use crate::dynamics::{f_image_project, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::ACTIVITY_TOL;
use crate::path::{Component, ContinuousPath, PathLike};
use crate::Vector;

/// Lower floor applied to the computed `μ`.
pub const MU_FLOOR: f64 = 1e-12;
/// Default radius of the local neighborhood constraints.
pub const DEFAULT_ILM_EPSILON: f64 = 0.5;

/// Uniform mesh `t_j = j h` on `[0, T]` with the `τ`-band indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub k: usize,
    pub h: f64,
    pub horizon: f64,
    pub tau: f64,
    /// Smallest `j` with `t_j ≥ τ`.
    pub j_tau: usize,
    /// Largest `j` with `t_j ≤ T − τ`.
    pub j_tau_upper: usize,
}

impl Mesh {
    pub fn new(horizon: f64, k: usize, tau: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::StepCount(k));
        }
        let h = horizon / k as f64;
        let fuzz = 1e-12;
        let j_tau = ((k as f64 * tau / horizon) - fuzz).ceil().max(0.0) as usize;
        let j_tau_upper = ((k as f64 * (horizon - tau) / horizon) + fuzz).floor().max(0.0) as usize;
        Ok(Self { k, h, horizon, tau, j_tau, j_tau_upper: j_tau_upper.min(k) })
    }

    pub fn for_spec(spec: &ProblemSpec, k: usize) -> Result<Self> {
        Self::new(spec.horizon, k, spec.tau)
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.k {
            self.horizon
        } else {
            j as f64 * self.h
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.k).map(|j| self.time(j)).collect()
    }

    /// Whether node `j` carries the equality `‖u_j‖ = r`.
    pub fn in_band(&self, j: usize) -> bool {
        self.j_tau <= j && j <= self.j_tau_upper
    }
}

/// Grid sequences `(x_j, u_j, a_j)`, `j = 0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTriple {
    pub mesh: Mesh,
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub a: Vec<Vector>,
}

impl DiscreteTriple {
    pub fn new(mesh: Mesh, x: Vec<Vector>, u: Vec<Vector>, a: Vec<Vector>) -> Result<Self> {
        let len = mesh.k + 1;
        if x.len() != len || u.len() != len || a.len() != len {
            return Err(Error::Dimension(format!("triple needs {len} nodes per component")));
        }
        Ok(Self { mesh, x, u, a })
    }

    /// Samples a reference at the mesh nodes.
    pub fn sample(reference: &dyn PathLike, mesh: Mesh) -> Self {
        let times = mesh.times();
        let grab = |c| times.iter().map(|&t| reference.value(c, t)).collect::<Vec<_>>();
        Self { mesh, x: grab(Component::State), u: grab(Component::Shift), a: grab(Component::Control) }
    }

    /// Piecewise-linear extension.
    pub fn to_path(&self) -> ContinuousPath {
        ContinuousPath { times: self.mesh.times(), x: self.x.clone(), u: self.u.clone(), a: self.a.clone() }
    }

    pub fn nodes(&self, c: Component) -> &[Vector] {
        match c {
            Component::State => &self.x,
            Component::Shift => &self.u,
            Component::Control => &self.a,
        }
    }

    pub fn nodes_mut(&mut self, c: Component) -> &mut Vec<Vector> {
        match c {
            Component::State => &mut self.x,
            Component::Shift => &mut self.u,
            Component::Control => &mut self.a,
        }
    }

    /// Difference quotient `(c_{j+1} − c_j)/h`.
    pub fn rate(&self, c: Component, j: usize) -> Vector {
        let n = self.nodes(c);
        (&n[j + 1] - &n[j]) / self.mesh.h
    }

    /// Stacked argument `(x_j, u_j, a_j, Δx_j/h, Δu_j/h, Δa_j/h)` of the running cost.
    pub fn stacked(&self, j: usize) -> Vector {
        let parts = [
            self.x[j].clone(),
            self.u[j].clone(),
            self.a[j].clone(),
            self.rate(Component::State, j),
            self.rate(Component::Shift, j),
            self.rate(Component::Control, j),
        ];
        Vector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flat_map(|p| p.iter().cloned()))
    }
}

/// How the discrete problem is anchored.
#[derive(Clone, Copy)]
pub enum ReferenceMode<'a> {
    /// The reference is the candidate itself: proximity blocks vanish and
    /// the initial control is free.
    FixedPoint,
    /// Proximity blocks are measured against this path and `(u_0, a_0)` is pinned.
    Path(&'a dyn PathLike),
}

impl<'a> ReferenceMode<'a> {
    pub fn path(&self) -> Option<&'a dyn PathLike> {
        match self {
            Self::FixedPoint => None,
            Self::Path(p) => Some(*p),
        }
    }

    pub fn pins_initial_control(&self) -> bool {
        matches!(self, Self::Path(_))
    }
}

/// `μ`, `μ̃` and `ε_k` for a reference on a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuConstants {
    /// The three difference-quotient quantities whose maximum is `μ`.
    pub candidates: [f64; 3],
    pub mu: f64,
    pub mu_tilde: f64,
    /// `max{3μ + 4Kμe^K, 4μe^K + μ}`, recorded for comparison.
    pub mu_tilde_proof_variant: f64,
    pub eps_k: f64,
}

/// `μ̃ = max{3μ(1 + 4K)e^K, 4μ(e^K + 1)}`.
pub fn mu_tilde(mu: f64, lipschitz: f64) -> f64 {
    let e = lipschitz.exp();
    (3.0 * mu * (1.0 + 4.0 * lipschitz) * e).max(4.0 * mu * (e + 1.0))
}

/// `ε_k = 2 h μ e^K`.
pub fn eps_k(h: f64, mu: f64, lipschitz: f64) -> f64 {
    2.0 * h * mu * lipschitz.exp()
}

pub fn mu_constants(reference: &dyn PathLike, spec: &ProblemSpec, mesh: &Mesh) -> MuConstants {
    let h = mesh.h;
    let xs: Vec<Vector> = mesh.times().iter().map(|&t| reference.value(Component::State, t)).collect();
    let us: Vec<Vector> = mesh.times().iter().map(|&t| reference.value(Component::Shift, t)).collect();
    let drift: f64 = (0..mesh.k)
        .map(|j| ((&xs[j + 1] - &xs[j]) / h - reference.velocity(Component::State, mesh.time(j))).norm())
        .sum();
    let first_rate = ((&us[1] - &us[0]) / h).norm();
    let curvature: f64 = (0..mesh.k.saturating_sub(1))
        .map(|j| ((&us[j + 2] - &us[j + 1] * 2.0 + &us[j]) / h).norm())
        .sum();
    let candidates = [drift, first_rate, curvature];
    let mu = candidates.iter().cloned().fold(MU_FLOOR, f64::max);
    let k_const = spec.field.lipschitz;
    let e = k_const.exp();
    MuConstants {
        candidates,
        mu,
        mu_tilde: mu_tilde(mu, k_const),
        mu_tilde_proof_variant: (3.0 * mu + 4.0 * k_const * mu * e).max(4.0 * mu * e + mu),
        eps_k: eps_k(h, mu, k_const),
    }
}

/// One signed constraint residual; nonpositive means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    pub name: String,
    pub value: f64,
}

/// Residual table of the discrete constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTable {
    pub entries: Vec<ConstraintResidual>,
}

impl ConstraintTable {
    fn push(&mut self, name: &str, value: f64) {
        self.entries.push(ConstraintResidual { name: name.into(), value });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }

    /// Largest residual over all entries.
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest residual over the hard feasibility constraints (the dynamics,
    /// the pin, the terminal mixed constraint and the norm band).
    pub fn worst_hard(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| HARD_CONSTRAINTS.contains(&e.name.as_str()))
            .map(|e| e.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

const HARD_CONSTRAINTS: [&str; 5] = ["dynamics_inclusion", "initial_pin", "terminal_mixed", "shift_sphere", "shift_band"];

/// Report of the feasible-solution construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub constants: MuConstants,
    pub eps_k: f64,
    pub mu: f64,
    pub mu_tilde: f64,
    pub max_state_gap: f64,
    pub variation_of_u_dot: f64,
    pub initial_shift_rate: f64,
    /// Largest radial correction applied to keep `‖u_j‖ = r`; bounds the
    /// defect in `x_j − u_j = x̄(t_j) − ū(t_j)`.
    pub max_renormalization_shift: f64,
    /// Nodes where the state had to move with the shift to stay in `C + u_j`;
    /// the discrete dynamics are exact when this is zero.
    pub state_corrections: usize,
    /// Largest distance from `−ẋ̄(t_j)` to `F(z̄(t_j))` along the reference.
    pub reference_inclusion_gap: f64,
    pub residuals: ConstraintTable,
}

fn check_reference(reference: &dyn PathLike, spec: &ProblemSpec, mesh: &Mesh) -> Result<f64> {
    let mut problems = Vec::new();
    let mut inclusion_gap: f64 = 0.0;
    let tol = 1e-6;
    for j in 0..=mesh.k {
        let t = mesh.time(j);
        let x = reference.value(Component::State, t);
        let u = reference.value(Component::Shift, t);
        let (i, excess) = spec.generators.max_violation(&(&x - &u));
        if excess > tol {
            problems.push(format!("node {j}: constraint {} violated by {excess:.3e}", i + 1));
            continue;
        }
        let norm = u.norm();
        if mesh.in_band(j) && (norm - spec.radius).abs() > tol {
            problems.push(format!("node {j}: ‖u‖ = {norm} differs from r = {}", spec.radius));
        } else if !mesh.in_band(j) && (norm < spec.radius - spec.tau - tol || norm > spec.radius + spec.tau + tol) {
            problems.push(format!("node {j}: ‖u‖ = {norm} outside the τ-band"));
        }
        if j < mesh.k {
            let a = reference.value(Component::Control, t);
            let w = -reference.velocity(Component::State, t);
            if let Ok((_, dist)) = f_image_project(&w, &x, &u, &a, spec) {
                inclusion_gap = inclusion_gap.max(dist);
            }
        }
    }
    if problems.is_empty() {
        Ok(inclusion_gap)
    } else {
        Err(Error::ReferenceInfeasible(problems.join("; ")))
    }
}

/// Feasible discrete triple tracking a feasible reference.
///
/// The shift is chosen so that `x_j − u_j = x̄(t_j) − ū(t_j)` at every node
/// and the velocity is the nearest point of `F` to the reference difference
/// quotient. Shifts drifting off the sphere `‖u‖ = r` are pulled back
/// radially; the state follows only when `x_j − u_j` would otherwise leave
/// `C`, so the discrete dynamics stay exact whenever possible.
pub fn approximate_feasible(reference: &dyn PathLike, spec: &ProblemSpec, mesh: &Mesh) -> Result<(DiscreteTriple, FeasibilityReport)> {
    let inclusion_gap = check_reference(reference, spec, mesh)?;
    let constants = mu_constants(reference, spec, mesh);
    let h = mesh.h;
    let times = mesh.times();
    let xbar: Vec<Vector> = times.iter().map(|&t| reference.value(Component::State, t)).collect();
    let ubar: Vec<Vector> = times.iter().map(|&t| reference.value(Component::Shift, t)).collect();
    let a: Vec<Vector> = times.iter().map(|&t| reference.value(Component::Control, t)).collect();
    let lo = spec.radius - spec.tau - constants.eps_k;
    let hi = spec.radius + spec.tau + constants.eps_k;

    let mut x = Vec::with_capacity(mesh.k + 1);
    let mut u = Vec::with_capacity(mesh.k + 1);
    let mut max_shift: f64 = 0.0;
    let mut state_corrections = 0;
    let mut current = spec.x0.clone();
    for j in 0..=mesh.k {
        let mut shift = &current - &xbar[j] + &ubar[j];
        let norm = shift.norm();
        let target = if mesh.in_band(j) { Some(spec.radius) } else if norm < lo { Some(lo) } else if norm > hi { Some(hi) } else { None };
        if let Some(radius) = target {
            if norm > 0.0 && (norm - radius).abs() > 0.0 {
                let moved = &shift * (radius / norm);
                let delta = &moved - &shift;
                max_shift = max_shift.max(delta.norm());
                if j == 0 || spec.generators.max_violation(&(&current - &moved)).1 > ACTIVITY_TOL {
                    current += &delta;
                    state_corrections += 1;
                }
                shift = moved;
            }
        }
        x.push(current.clone());
        u.push(shift.clone());
        if j < mesh.k {
            let w1 = (&xbar[j + 1] - &xbar[j]) / h;
            let (v, _) = f_image_project(&(-w1), &current, &shift, &a[j], spec)?;
            current = &current - v * h;
        }
    }
    let triple = DiscreteTriple::new(*mesh, x, u, a)?;
    let max_state_gap = (0..=mesh.k).map(|j| (&triple.x[j] - &xbar[j]).norm()).fold(0.0, f64::max);
    let (first_rate, curvature) = shift_variation(&triple);
    let residuals = check_discrete_constraints(
        &triple,
        ReferenceMode::Path(reference),
        spec,
        constants.eps_k,
        constants.mu_tilde,
        spec.ilm_epsilon,
    );
    let report = FeasibilityReport {
        constants,
        eps_k: constants.eps_k,
        mu: constants.mu,
        mu_tilde: constants.mu_tilde,
        max_state_gap,
        variation_of_u_dot: curvature,
        initial_shift_rate: first_rate,
        max_renormalization_shift: max_shift,
        state_corrections,
        reference_inclusion_gap: inclusion_gap,
        residuals,
    };
    Ok((triple, report))
}

/// `(‖(u_1 − u_0)/h‖, Σ_j ‖(u_{j+2} − 2u_{j+1} + u_j)/h‖)`.
pub fn shift_variation(z: &DiscreteTriple) -> (f64, f64) {
    let h = z.mesh.h;
    let first = ((&z.u[1] - &z.u[0]) / h).norm();
    let curvature = (0..z.mesh.k.saturating_sub(1))
        .map(|j| ((&z.u[j + 2] - &z.u[j + 1] * 2.0 + &z.u[j]) / h).norm())
        .sum();
    (first, curvature)
}

/// Itemized discrete cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub terminal: f64,
    pub running: f64,
    pub initial_velocity: f64,
    pub proximity: f64,
    pub dist_first: f64,
    pub dist_second: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Proximity integral plus the initial-velocity and two distance terms:
    /// the quantity driven to zero by the strong convergence result.
    pub fn convergence_sum(&self) -> f64 {
        self.proximity + self.initial_velocity + self.dist_first + self.dist_second
    }
}

fn positive_part(v: f64) -> f64 {
    v.max(0.0)
}

/// `∫_{t_j}^{t_{j+1}} ‖rate − ċ̄(t)‖² dt` expanded around the exact increment of the reference.
fn interval_mismatch(reference: &dyn PathLike, c: Component, rate: &Vector, t0: f64, t1: f64) -> f64 {
    let increment = reference.value(c, t1) - reference.value(c, t0);
    let value = (t1 - t0) * rate.norm_squared() - 2.0 * rate.dot(&increment) + reference.velocity_sq_integral(c, t0, t1);
    value.max(0.0)
}

pub fn cost_breakdown(z: &DiscreteTriple, mode: ReferenceMode<'_>, spec: &ProblemSpec, mu_tilde: f64) -> CostBreakdown {
    let mesh = &z.mesh;
    let h = mesh.h;
    let mut out = CostBreakdown { terminal: spec.terminal.value(&z.x[mesh.k]), ..Default::default() };
    out.running = h * (0..mesh.k).map(|j| spec.running.value(&z.stacked(j))).sum::<f64>();
    if let Some(reference) = mode.path() {
        out.initial_velocity = (z.rate(Component::State, 0) - reference.velocity(Component::State, 0.0)).norm_squared();
        out.proximity = (0..mesh.k)
            .map(|j| {
                Component::ALL
                    .iter()
                    .map(|&c| interval_mismatch(reference, c, &z.rate(c, j), mesh.time(j), mesh.time(j + 1)))
                    .sum::<f64>()
            })
            .sum();
    }
    let (first, curvature) = shift_variation(z);
    out.dist_first = positive_part(first - mu_tilde).powi(2);
    out.dist_second = positive_part(curvature - mu_tilde).powi(2);
    out.total = out.terminal + out.running + out.initial_velocity + out.proximity + out.dist_first + out.dist_second;
    out
}

/// Discrete cost `J_k`.
pub fn cost_jk(z: &DiscreteTriple, mode: ReferenceMode<'_>, spec: &ProblemSpec, mu_tilde: f64) -> f64 {
    cost_breakdown(z, mode, spec, mu_tilde).total
}

/// Gradient of `J_k` with respect to every node of `x`, `u` and `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradient {
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub a: Vec<Vector>,
}

impl TripleGradient {
    pub fn zeros_like(z: &DiscreteTriple) -> Self {
        let zero = |v: &[Vector]| v.iter().map(|e| Vector::zeros(e.len())).collect();
        Self { x: zero(&z.x), u: zero(&z.u), a: zero(&z.a) }
    }

    pub fn nodes_mut(&mut self, c: Component) -> &mut Vec<Vector> {
        match c {
            Component::State => &mut self.x,
            Component::Shift => &mut self.u,
            Component::Control => &mut self.a,
        }
    }
}

/// Proximity weights `θ_j = 2 ∫ (Δc_j/h − ċ̄(t)) dt` for one component.
pub fn theta(z: &DiscreteTriple, reference: &dyn PathLike, c: Component, j: usize) -> Vector {
    let t0 = z.mesh.time(j);
    let t1 = z.mesh.time(j + 1);
    (z.rate(c, j) * (t1 - t0) - (reference.value(c, t1) - reference.value(c, t0))) * 2.0
}

pub fn cost_gradient(z: &DiscreteTriple, mode: ReferenceMode<'_>, spec: &ProblemSpec, mu_tilde: f64) -> TripleGradient {
    let mesh = &z.mesh;
    let k = mesh.k;
    let h = mesh.h;
    let n = spec.state_dim();
    let d = spec.control_dim;
    let mut g = TripleGradient::zeros_like(z);
    g.x[k] += spec.terminal.gradient(&z.x[k]);
    let blocks = [(Component::State, 0, n), (Component::Shift, n, n), (Component::Control, 2 * n, d)];
    let offset = 2 * n + d;
    for j in 0..k {
        let grad = spec.running.gradient(&z.stacked(j));
        for &(c, start, len) in &blocks {
            let position = grad.rows(start, len).into_owned();
            let velocity = grad.rows(offset + start, len).into_owned();
            let nodes = g.nodes_mut(c);
            nodes[j] += position * h - &velocity;
            nodes[j + 1] += velocity;
        }
    }
    if let Some(reference) = mode.path() {
        let initial = (z.rate(Component::State, 0) - reference.velocity(Component::State, 0.0)) * (2.0 / h);
        g.x[1] += &initial;
        g.x[0] -= &initial;
        for j in 0..k {
            for c in Component::ALL {
                let th = theta(z, reference, c, j) / h;
                let nodes = g.nodes_mut(c);
                nodes[j + 1] += &th;
                nodes[j] -= &th;
            }
        }
    }
    let (first, curvature) = shift_variation(z);
    let excess_first = positive_part(first - mu_tilde);
    if excess_first > 0.0 {
        let du = &z.u[1] - &z.u[0];
        let dir = &du * (2.0 * excess_first / (h * du.norm()));
        g.u[1] += &dir;
        g.u[0] -= &dir;
    }
    let excess_second = positive_part(curvature - mu_tilde);
    if excess_second > 0.0 {
        for j in 0..k.saturating_sub(1) {
            let s = &z.u[j + 2] - &z.u[j + 1] * 2.0 + &z.u[j];
            let norm = s.norm();
            if norm == 0.0 {
                continue;
            }
            let e = s * (2.0 * excess_second / (h * norm));
            g.u[j + 2] += &e;
            g.u[j + 1] -= &e * 2.0;
            g.u[j] += &e;
        }
    }
    g
}

/// Signed residuals of the discrete constraints.
pub fn check_discrete_constraints(
    z: &DiscreteTriple,
    mode: ReferenceMode<'_>,
    spec: &ProblemSpec,
    eps_k: f64,
    mu_tilde: f64,
    ilm_epsilon: f64,
) -> ConstraintTable {
    let mesh = &z.mesh;
    let k = mesh.k;
    let h = mesh.h;
    let mut table = ConstraintTable::default();

    let inclusion = (0..k)
        .map(|j| {
            let w = (&z.x[j] - &z.x[j + 1]) / h;
            match f_image_project(&w, &z.x[j], &z.u[j], &z.a[j], spec) {
                Ok((_, dist)) => dist,
                Err(_) => spec.generators.max_violation(&(&z.x[j] - &z.u[j])).1.max(ACTIVITY_TOL) / h,
            }
        })
        .fold(0.0, f64::max);
    table.push("dynamics_inclusion", inclusion);

    let pin = match mode.path() {
        Some(r) => {
            (&z.x[0] - &spec.x0).norm()
                + (&z.u[0] - r.value(Component::Shift, 0.0)).norm()
                + (&z.a[0] - r.value(Component::Control, 0.0)).norm()
        }
        None => (&z.x[0] - &spec.x0).norm(),
    };
    table.push("initial_pin", pin);
    table.push("terminal_mixed", spec.generators.max_violation(&(&z.x[k] - &z.u[k])).1);

    let lo = spec.radius - spec.tau - eps_k;
    let hi = spec.radius + spec.tau + eps_k;
    let mut sphere: f64 = 0.0;
    let mut band = f64::NEG_INFINITY;
    for j in 0..=k {
        let norm = z.u[j].norm();
        if mesh.in_band(j) {
            sphere = sphere.max((norm - spec.radius).abs());
        } else {
            band = band.max((lo - norm).max(norm - hi));
        }
    }
    table.push("shift_sphere", sphere);
    table.push("shift_band", if band.is_finite() { band } else { 0.0 });

    let (node_gap, velocity_gap) = match mode.path() {
        Some(r) => {
            let node = (0..k)
                .map(|j| {
                    let t = mesh.time(j);
                    ((&z.x[j] - r.value(Component::State, t)).norm_squared()
                        + (&z.u[j] - r.value(Component::Shift, t)).norm_squared()
                        + (&z.a[j] - r.value(Component::Control, t)).norm_squared())
                    .sqrt()
                })
                .fold(0.0, f64::max);
            let integral: f64 = (0..k)
                .map(|j| {
                    Component::ALL
                        .iter()
                        .map(|&c| interval_mismatch(r, c, &z.rate(c, j), mesh.time(j), mesh.time(j + 1)))
                        .sum::<f64>()
                })
                .sum();
            (node, integral)
        }
        None => (0.0, 0.0),
    };
    table.push("node_proximity", node_gap - ilm_epsilon / 2.0);
    table.push("velocity_proximity", velocity_gap - ilm_epsilon / 2.0);
    let (first, curvature) = shift_variation(z);
    table.push("initial_shift_rate", first - (mu_tilde + 1.0));
    table.push("shift_curvature", curvature - (mu_tilde + 1.0));
    table
}
