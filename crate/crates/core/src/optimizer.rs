//! Numerical solution of the discrete problems: an augmented-Lagrangian
//! method for the dynamics inclusion with projected Barzilai-Borwein inner
//! iterations, a grid-search oracle for tiny instances and the convergence
//! study over increasing `k`.

use serde::{Deserialize, Serialize};

use crate::approximation::{
    approximate_feasible, check_discrete_constraints, cost_breakdown, cost_gradient, mu_constants, ConstraintTable, CostBreakdown, DiscreteTriple, Mesh, MuConstants,
    ReferenceMode, TripleGradient,
};
use crate::dynamics::{f_image_project, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::ACTIVITY_TOL;
use crate::linalg::lstsq;
use crate::path::{Component, PathLike};
use crate::{Matrix, Vector};

/// Tuning of [`solve_pk`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    /// Sup-norm of the projected gradient at which inner iterations stop.
    pub stationarity_tol: f64,
    /// Hard-constraint residual required for convergence.
    pub constraint_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_outer: 40, max_inner: 4000, rho0: 10.0, rho_growth: 10.0, rho_max: 1e9, stationarity_tol: 1e-10, constraint_tol: 1e-9 }
    }
}

/// Outcome of a discrete solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub z_opt: DiscreteTriple,
    pub j_value: f64,
    pub breakdown: CostBreakdown,
    pub residuals: ConstraintTable,
    pub constants: MuConstants,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    /// `J_k` after every outer iteration.
    pub history: Vec<f64>,
}

/// Free coordinates of a triple: pinned initial data are excluded.
#[derive(Debug, Clone)]
struct Layout {
    entries: Vec<(Component, usize, usize)>,
}

impl Layout {
    fn new(z: &DiscreteTriple, mode: ReferenceMode<'_>) -> Self {
        let mut entries = Vec::new();
        for c in Component::ALL {
            let first = match c {
                Component::Control if !mode.pins_initial_control() => 0,
                _ => 1,
            };
            for j in first..=z.mesh.k {
                for r in 0..z.nodes(c)[j].len() {
                    entries.push((c, j, r));
                }
            }
        }
        Self { entries }
    }

    fn gather(&self, z: &DiscreteTriple) -> Vector {
        Vector::from_iterator(self.entries.len(), self.entries.iter().map(|&(c, j, r)| z.nodes(c)[j][r]))
    }

    fn gather_grad(&self, g: &TripleGradient) -> Vector {
        let pick = |c: Component| match c {
            Component::State => &g.x,
            Component::Shift => &g.u,
            Component::Control => &g.a,
        };
        Vector::from_iterator(self.entries.len(), self.entries.iter().map(|&(c, j, r)| pick(c)[j][r]))
    }

    fn scatter(&self, z: &mut DiscreteTriple, v: &Vector) {
        for (&(c, j, r), &val) in self.entries.iter().zip(v.iter()) {
            z.nodes_mut(c)[j][r] = val;
        }
    }
}

/// Constants defining the discrete problem for a mode.
pub fn problem_constants(spec: &ProblemSpec, mode: ReferenceMode<'_>, mesh: &Mesh, warm: &DiscreteTriple) -> MuConstants {
    match mode.path() {
        Some(r) => mu_constants(r, spec, mesh),
        None => mu_constants(&warm.to_path(), spec, mesh),
    }
}

/// Default starting point: the feasible construction around the reference,
/// or the catching-up trajectory with the initial shift and zero control.
pub fn warm_start(spec: &ProblemSpec, mode: ReferenceMode<'_>, mesh: &Mesh) -> Result<DiscreteTriple> {
    if let Some(r) = mode.path() {
        match approximate_feasible(r, spec, mesh) {
            Ok((z, _)) => return Ok(z),
            Err(e) => log::warn!("feasible construction failed ({e}); sampling the reference instead"),
        }
        let mut z = DiscreteTriple::sample(r, *mesh);
        z.x[0] = spec.x0.clone();
        return Ok(project_triple(spec, mesh, z, f64::INFINITY));
    }
    let mut z = DiscreteTriple::new(*mesh, vec![spec.x0.clone(); mesh.k + 1], vec![spec.u0.clone(); mesh.k + 1], vec![Vector::zeros(spec.control_dim); mesh.k + 1])?;
    for j in 0..mesh.k {
        let step = &z.x[j] - spec.field.eval(&z.x[j], &z.a[j]) * mesh.h;
        z.x[j + 1] = spec.generators.project_translated(&step, &z.u[j + 1]).point;
    }
    Ok(z)
}

fn project_shift(spec: &ProblemSpec, mesh: &Mesh, j: usize, u: &Vector, eps: f64) -> Vector {
    let norm = u.norm();
    let (lo, hi) = if mesh.in_band(j) { (spec.radius, spec.radius) } else { (spec.radius - spec.tau - eps, spec.radius + spec.tau + eps) };
    let target = norm.clamp(lo.max(0.0), hi);
    if norm < 1e-300 {
        let dir = spec.u0.normalize();
        return dir * target;
    }
    if (target - norm).abs() <= 0.0 {
        u.clone()
    } else {
        u * (target / norm)
    }
}

/// Projects shifts radially onto the norm constraints and states onto `C + u_j`.
fn project_triple(spec: &ProblemSpec, mesh: &Mesh, mut z: DiscreteTriple, eps: f64) -> DiscreteTriple {
    for j in 1..=mesh.k {
        z.u[j] = project_shift(spec, mesh, j, &z.u[j], eps);
        z.x[j] = spec.generators.project_translated(&z.x[j], &z.u[j]).point;
    }
    z
}

fn inclusion_gap(spec: &ProblemSpec, z: &DiscreteTriple, j: usize) -> Vector {
    &z.x[j] - &z.x[j + 1] - spec.field.eval(&z.x[j], &z.a[j]) * z.mesh.h
}

fn active_set(spec: &ProblemSpec, z: &DiscreteTriple, j: usize) -> Vec<usize> {
    spec.generators.active_indices(&(&z.x[j] - &z.u[j]), ACTIVITY_TOL).indices
}

fn cone_residual(spec: &ProblemSpec, s: &Vector, active: &[usize]) -> Vector {
    if active.is_empty() {
        s.clone()
    } else {
        s - spec.generators.project_onto_cone(s, active).0
    }
}

/// Adds `(∂g_j/∂z)ᵀ r` to `grad`.
fn add_gap_adjoint(spec: &ProblemSpec, z: &DiscreteTriple, j: usize, r: &Vector, grad: &mut TripleGradient) {
    let h = z.mesh.h;
    let jx = spec.field.jacobian_state(&z.x[j], &z.a[j]);
    let ja = spec.field.jacobian_control(&z.x[j], &z.a[j]);
    grad.x[j] += r - jx.transpose() * r * h;
    grad.x[j + 1] -= r;
    grad.a[j] -= ja.transpose() * r * h;
}

struct Merit<'a> {
    spec: &'a ProblemSpec,
    mode: ReferenceMode<'a>,
    mu_tilde: f64,
    rho: f64,
    multipliers: Vec<Vector>,
}

impl Merit<'_> {
    fn eval(&self, z: &DiscreteTriple) -> (f64, TripleGradient) {
        let mesh = &z.mesh;
        let mut value = cost_breakdown(z, self.mode, self.spec, self.mu_tilde).total;
        let mut grad = cost_gradient(z, self.mode, self.spec, self.mu_tilde);
        for j in 0..mesh.k {
            let s = inclusion_gap(self.spec, z, j) + &self.multipliers[j] / self.rho;
            let res = cone_residual(self.spec, &s, &active_set(self.spec, z, j));
            value += 0.5 * self.rho * res.norm_squared() - self.multipliers[j].norm_squared() / (2.0 * self.rho);
            add_gap_adjoint(self.spec, z, j, &(res * self.rho), &mut grad);
        }
        if let Some(r) = self.mode.path() {
            let half = self.spec.ilm_epsilon / 2.0;
            for j in 0..mesh.k {
                let t = mesh.time(j);
                let deltas: Vec<Vector> = Component::ALL.iter().map(|&c| &z.nodes(c)[j] - r.value(c, t)).collect();
                let norm = deltas.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
                let excess = norm - half;
                if excess > 0.0 {
                    value += 0.5 * self.rho * excess * excess;
                    for (c, d) in Component::ALL.iter().zip(&deltas) {
                        grad.nodes_mut(*c)[j] += d * (self.rho * excess / norm);
                    }
                }
            }
            let b = cost_breakdown(z, self.mode, self.spec, self.mu_tilde);
            let excess = b.proximity - half;
            if excess > 0.0 {
                value += 0.5 * self.rho * excess * excess;
                for j in 0..mesh.k {
                    for c in Component::ALL {
                        let th = crate::approximation::theta(z, r, c, j) / mesh.h * (self.rho * excess);
                        let nodes = grad.nodes_mut(c);
                        nodes[j + 1] += &th;
                        nodes[j] -= &th;
                    }
                }
            }
        }
        (value, grad)
    }
}

/// Least-squares multiplier estimate making the Lagrangian stationary at `z`.
fn estimate_multipliers(spec: &ProblemSpec, z: &DiscreteTriple, layout: &Layout, grad_j: &Vector) -> Vec<Vector> {
    let k = z.mesh.k;
    let n = spec.state_dim();
    let mut columns = Matrix::zeros(layout.entries.len(), k * n);
    for j in 0..k {
        for r in 0..n {
            let mut unit = Vector::zeros(n);
            unit[r] = 1.0;
            let mut g = TripleGradient::zeros_like(z);
            add_gap_adjoint(spec, z, j, &unit, &mut g);
            columns.set_column(j * n + r, &layout.gather_grad(&g));
        }
    }
    let flat = lstsq(&columns, &(-grad_j));
    (0..k)
        .map(|j| {
            let m = flat.rows(j * n, n).into_owned();
            let active = active_set(spec, z, j);
            if active.is_empty() {
                m
            } else {
                // Keep only the part in the polar of the active cone.
                cone_residual(spec, &m, &active)
            }
        })
        .collect()
}

const NONMONOTONE_MEMORY: usize = 10;
const NEWTON_MAX_VARIABLES: usize = 1500;

/// Orthonormal basis of the directions along which a node may move without
/// leaving its active constraints: the tangent of the norm constraint for
/// shifts on it, the face of `C + u_j` for states on the boundary.
fn node_tangent(spec: &ProblemSpec, z: &DiscreteTriple, c: Component, j: usize, eps: f64) -> Matrix {
    let dim = z.nodes(c)[j].len();
    let orthogonal_complement = |rows: &Matrix| -> Matrix {
        if rows.nrows() == 0 {
            return Matrix::identity(dim, dim);
        }
        let projector = Matrix::identity(dim, dim) - rows.transpose() * rows.clone().pseudo_inverse(1e-12).expect("pseudo-inverse") ;
        let eig = projector.symmetric_eigen();
        let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        Matrix::from_fn(dim, keep.len(), |r, col| eig.eigenvectors[(r, keep[col])])
    };
    match c {
        Component::Control => Matrix::identity(dim, dim),
        Component::Shift => {
            let mesh = &z.mesh;
            let norm = z.u[j].norm();
            let on_bound = mesh.in_band(j)
                || (norm - (spec.radius - spec.tau - eps)).abs() <= ACTIVITY_TOL
                || (norm - (spec.radius + spec.tau + eps)).abs() <= ACTIVITY_TOL;
            if on_bound && norm > 0.0 {
                orthogonal_complement(&Matrix::from_row_slice(1, dim, z.u[j].as_slice()))
            } else {
                Matrix::identity(dim, dim)
            }
        }
        Component::State => {
            let active = active_set(spec, z, j);
            orthogonal_complement(&spec.generators.columns(&active).transpose())
        }
    }
}

/// Newton direction in the tangent space of the active constraints, from a
/// finite-difference Hessian of the merit function, shifted towards positive
/// definiteness when needed.
fn newton_step(merit: &Merit<'_>, layout: &Layout, z: &DiscreteTriple, g: &Vector, eps: f64) -> Option<Vector> {
    let base = layout.gather(z);
    let count = base.len();
    let mut columns: Vec<Vector> = Vec::new();
    let mut group_start = 0;
    while group_start < count {
        let (c, j, _) = layout.entries[group_start];
        let dim = z.nodes(c)[j].len();
        let tangent = node_tangent(merit.spec, z, c, j, eps);
        for col in 0..tangent.ncols() {
            let mut v = Vector::zeros(count);
            v.rows_mut(group_start, dim).copy_from(&tangent.column(col));
            columns.push(v);
        }
        group_start += dim;
    }
    if columns.is_empty() {
        return None;
    }
    let basis = Matrix::from_columns(&columns);
    let reduced = basis.ncols();
    let mut hessian = Matrix::zeros(reduced, reduced);
    let mut probe = z.clone();
    for i in 0..reduced {
        let delta = 1e-6 * (1.0 + base.amax());
        layout.scatter(&mut probe, &(&base + basis.column(i) * delta));
        let column = basis.transpose() * ((layout.gather_grad(&merit.eval(&probe).1) - g) / delta);
        hessian.set_column(i, &column);
    }
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let rg = basis.transpose() * g;
    let scale = hessian.diagonal().amax().max(1e-12);
    for shift in [0.0, 1e-12, 1e-9, 1e-6, 1e-3] {
        let shifted = &hessian + Matrix::identity(reduced, reduced) * (shift * scale);
        if let Some(chol) = shifted.cholesky() {
            let d = &basis * -chol.solve(&rg);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
    }
    None
}

struct InnerOutcome {
    z: DiscreteTriple,
    iterations: usize,
    stationary: bool,
}

fn inner_solve(merit: &Merit<'_>, layout: &Layout, mut z: DiscreteTriple, eps: f64, config: &OptimizerConfig) -> InnerOutcome {
    let spec = merit.spec;
    let mesh = z.mesh;
    let project = |v: &Vector, template: &DiscreteTriple| {
        let mut t = template.clone();
        layout.scatter(&mut t, v);
        project_triple(spec, &mesh, t, eps)
    };
    let (mut value, grad) = merit.eval(&z);
    let mut g = layout.gather_grad(&grad);
    let mut step = 1.0 / (1.0 + g.amax());
    let mut prev: Option<(Vector, Vector)> = None;
    let mut recent = std::collections::VecDeque::from([value]);
    let mut newton = layout.entries.len() <= NEWTON_MAX_VARIABLES;
    for it in 0..config.max_inner {
        let x = layout.gather(&z);
        let probe = layout.gather(&project(&(&x - &g), &z));
        if (&probe - &x).amax() <= config.stationarity_tol {
            return InnerOutcome { z, iterations: it, stationary: true };
        }
        if newton {
            match newton_step(merit, layout, &z, &g, eps) {
                Some(d) => {
                    let trial = project(&(&x + &d), &z);
                    let (tv, tg) = merit.eval(&trial);
                    let flat = tv <= value + 1e-13 * (1.0 + value.abs()) && layout.gather_grad(&tg).amax() < g.amax();
                    if tv < value || flat {
                        prev = Some((x, g));
                        z = trial;
                        value = tv;
                        recent.push_back(value);
                        if recent.len() > NONMONOTONE_MEMORY {
                            recent.pop_front();
                        }
                        g = layout.gather_grad(&tg);
                        continue;
                    }
                    newton = false;
                }
                None => newton = false,
            }
        }
        if let Some((px, pg)) = &prev {
            let s = &x - px;
            let y = &g - pg;
            let sy = s.dot(&y);
            if sy > 0.0 {
                step = (s.norm_squared() / sy).clamp(1e-14, 1e14);
            }
        }
        let mut accepted = None;
        let mut alpha = step;
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..60 {
            let trial = project(&(&x - &g * alpha), &z);
            let moved = &layout.gather(&trial) - &x;
            let (tv, tg) = merit.eval(&trial);
            if tv <= reference - 1e-4 / alpha * moved.norm_squared() || moved.amax() == 0.0 {
                accepted = Some((trial, tv, tg));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, tv, tg)) = accepted else {
            return InnerOutcome { z, iterations: it, stationary: false };
        };
        prev = Some((x, g));
        z = trial;
        value = tv;
        recent.push_back(value);
        if recent.len() > NONMONOTONE_MEMORY {
            recent.pop_front();
        }
        g = layout.gather_grad(&tg);
    }
    InnerOutcome { z, iterations: config.max_inner, stationary: false }
}

fn max_inclusion_violation(spec: &ProblemSpec, z: &DiscreteTriple) -> f64 {
    (0..z.mesh.k)
        .map(|j| {
            let w = (&z.x[j] - &z.x[j + 1]) / z.mesh.h;
            f_image_project(&w, &z.x[j], &z.u[j], &z.a[j], spec).map(|(_, d)| d).unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max)
}

/// The terminal control `a_k` enters `J_k` only through the last control
/// rate; when it does not enter at all it is set to `a_{k−1}`.
fn tie_terminal_control(spec: &ProblemSpec, mode: ReferenceMode<'_>, z: &mut DiscreteTriple, mu_tilde: f64) {
    let k = z.mesh.k;
    let before = cost_breakdown(z, mode, spec, mu_tilde).total;
    let mut tied = z.clone();
    tied.a[k] = z.a[k - 1].clone();
    let mut probe = tied.clone();
    probe.a[k] = &probe.a[k] + Vector::from_element(spec.control_dim, 1.0);
    let after = cost_breakdown(&tied, mode, spec, mu_tilde).total;
    let moved = cost_breakdown(&probe, mode, spec, mu_tilde).total;
    if after == before && moved == after {
        *z = tied;
    }
}

/// Solves the discrete problem `(P_k)` from the default warm start.
pub fn solve_pk(spec: &ProblemSpec, mode: ReferenceMode<'_>, mesh: &Mesh, config: &OptimizerConfig) -> Result<SolveResult> {
    let warm = warm_start(spec, mode, mesh)?;
    solve_pk_from(spec, mode, warm, config)
}

/// Solves `(P_k)` starting from `start`, whose pinned entries are kept.
pub fn solve_pk_from(spec: &ProblemSpec, mode: ReferenceMode<'_>, start: DiscreteTriple, config: &OptimizerConfig) -> Result<SolveResult> {
    spec.validate()?;
    let mesh = start.mesh;
    let constants = problem_constants(spec, mode, &mesh, &start);
    let layout = Layout::new(&start, mode);
    let mut z = project_triple(spec, &mesh, start, constants.eps_k);
    let grad_j = layout.gather_grad(&cost_gradient(&z, mode, spec, constants.mu_tilde));
    let mut merit = Merit { spec, mode, mu_tilde: constants.mu_tilde, rho: config.rho0, multipliers: estimate_multipliers(spec, &z, &layout, &grad_j) };
    let mut history = Vec::new();
    let mut inner_total = 0;
    let mut converged = false;
    let mut outer = 0;
    let mut prev_violation = f64::INFINITY;
    while outer < config.max_outer {
        outer += 1;
        let out = inner_solve(&merit, &layout, z, constants.eps_k, config);
        z = out.z;
        inner_total += out.iterations;
        let violation = max_inclusion_violation(spec, &z);
        history.push(cost_breakdown(&z, mode, spec, constants.mu_tilde).total);
        log::debug!("outer {outer}: rho {:.1e}, inclusion {violation:.3e}, inner {} (stationary {})", merit.rho, out.iterations, out.stationary);
        if violation <= config.constraint_tol && out.stationary {
            converged = true;
            break;
        }
        for j in 0..mesh.k {
            let s = inclusion_gap(spec, &z, j) + &merit.multipliers[j] / merit.rho;
            merit.multipliers[j] = cone_residual(spec, &s, &active_set(spec, &z, j)) * merit.rho;
        }
        if violation > 0.25 * prev_violation {
            merit.rho = (merit.rho * config.rho_growth).min(config.rho_max);
        }
        prev_violation = violation;
    }
    if !mode.pins_initial_control() {
        tie_terminal_control(spec, mode, &mut z, constants.mu_tilde);
    }
    let breakdown = cost_breakdown(&z, mode, spec, constants.mu_tilde);
    let residuals = check_discrete_constraints(&z, mode, spec, constants.eps_k, constants.mu_tilde, spec.ilm_epsilon);
    converged &= residuals.worst_hard() <= config.constraint_tol.max(1e-9);
    if !converged {
        log::warn!("solver stopped after {outer} outer iterations with hard residual {:.3e}", residuals.worst_hard());
    }
    Ok(SolveResult { j_value: breakdown.total, breakdown, residuals, constants, outer_iterations: outer, inner_iterations: inner_total, converged, history, z_opt: z })
}

/// Grid of the brute-force oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Upper bound on evaluated grid points; the step is coarsened to fit.
    pub max_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lo: -2.0, hi: 2.0, step: 1e-3, max_points: 2_000_000 }
    }
}

/// Largest `k` accepted by [`brute_force_oracle`].
pub const ORACLE_MAX_STEPS: usize = 4;

struct ControlSearch<'a> {
    spec: &'a ProblemSpec,
    mode: ReferenceMode<'a>,
    mesh: Mesh,
    shifts: Vec<Vector>,
    mu_tilde: f64,
    pinned_control: Option<Vector>,
}

impl ControlSearch<'_> {
    fn triple(&self, free: &[f64]) -> Option<DiscreteTriple> {
        let k = self.mesh.k;
        let d = self.spec.control_dim;
        let chunk = |i: usize| Vector::from_column_slice(&free[i * d..(i + 1) * d]);
        let a: Vec<Vector> = match &self.pinned_control {
            Some(a0) => std::iter::once(a0.clone()).chain((0..k).map(chunk)).collect(),
            None => {
                let mut a: Vec<Vector> = (0..k).map(chunk).collect();
                a.push(a[k - 1].clone());
                a
            }
        };
        let mut x = vec![self.spec.x0.clone()];
        for j in 0..k {
            let step = &x[j] - self.spec.field.eval(&x[j], &a[j]) * self.mesh.h;
            let next = self.spec.generators.project_translated(&step, &self.shifts[j + 1]).point;
            let w = (&x[j] - &next) / self.mesh.h;
            match f_image_project(&w, &x[j], &self.shifts[j], &a[j], self.spec) {
                Ok((_, dist)) if dist <= 1e-9 => x.push(next),
                _ => return None,
            }
        }
        DiscreteTriple::new(self.mesh, x, self.shifts.clone(), a).ok()
    }

    fn cost(&self, free: &[f64]) -> f64 {
        self.triple(free).map_or(f64::INFINITY, |z| cost_breakdown(&z, self.mode, self.spec, self.mu_tilde).total)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Exhaustive grid search over the controls of a tiny instance, with the
/// state generated by the projection scheme, followed by a coordinate-wise
/// golden-section polish. Shifts are held at the reference (or initial) values.
pub fn brute_force_oracle(spec: &ProblemSpec, mode: ReferenceMode<'_>, mesh: &Mesh, grid: &GridSpec) -> Result<SolveResult> {
    if mesh.k > ORACLE_MAX_STEPS {
        return Err(Error::TooLarge(format!("brute-force oracle supports k ≤ {ORACLE_MAX_STEPS}, got {}", mesh.k)));
    }
    let d = spec.control_dim;
    let dims = mesh.k * d;
    let per_axis_wanted = ((grid.hi - grid.lo) / grid.step).floor() as usize + 1;
    let per_axis_cap = (grid.max_points as f64).powf(1.0 / dims as f64).floor().max(2.0) as usize;
    let per_axis = per_axis_wanted.min(per_axis_cap).max(2);
    let spacing = (grid.hi - grid.lo) / (per_axis - 1) as f64;
    let shifts: Vec<Vector> = match mode.path() {
        Some(r) => (0..=mesh.k).map(|j| project_shift(spec, mesh, j, &r.value(Component::Shift, mesh.time(j)), 0.0)).collect(),
        None => vec![spec.u0.clone(); mesh.k + 1],
    };
    let probe = DiscreteTriple::new(*mesh, vec![spec.x0.clone(); mesh.k + 1], shifts.clone(), vec![Vector::zeros(d); mesh.k + 1])?;
    let constants = problem_constants(spec, mode, mesh, &probe);
    let search = ControlSearch {
        spec,
        mode,
        mesh: *mesh,
        shifts,
        mu_tilde: constants.mu_tilde,
        pinned_control: mode.path().map(|r| r.value(Component::Control, 0.0)),
    };
    let total = per_axis.pow(dims as u32);
    let mut best = (f64::INFINITY, vec![0.0; dims]);
    let mut point = vec![0.0; dims];
    for flat in 0..total {
        let mut rest = flat;
        for p in point.iter_mut() {
            *p = grid.lo + spacing * (rest % per_axis) as f64;
            rest /= per_axis;
        }
        let value = search.cost(&point);
        if value < best.0 {
            best = (value, point.clone());
        }
    }
    if !best.0.is_finite() {
        return Err(Error::NonConvergence { iterations: total, residual: f64::INFINITY });
    }
    let (mut value, mut point) = best;
    for _ in 0..200 {
        let before = value;
        for i in 0..dims {
            let centre = point[i];
            let (arg, v) = golden_section(
                |s| {
                    let mut p = point.clone();
                    p[i] = s;
                    search.cost(&p)
                },
                centre - spacing,
                centre + spacing,
                1e-12,
            );
            if v < value {
                value = v;
                point[i] = arg;
            }
        }
        if before - value <= 1e-16 {
            break;
        }
    }
    let z = search.triple(&point).expect("finite cost implies a feasible triple");
    let breakdown = cost_breakdown(&z, mode, spec, constants.mu_tilde);
    let residuals = check_discrete_constraints(&z, mode, spec, constants.eps_k, constants.mu_tilde, spec.ilm_epsilon);
    Ok(SolveResult { j_value: breakdown.total, breakdown, residuals, constants, outer_iterations: 0, inner_iterations: total, converged: true, history: vec![breakdown.total], z_opt: z })
}

/// One row of the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub k: usize,
    pub j_value: f64,
    /// Proximity integral plus initial-velocity and distance terms.
    pub convergence_sum: f64,
    /// `max_j ‖x_j − x̄(t_j)‖`.
    pub max_state_gap: f64,
    /// `Σ_j ∫ ‖(Δz_j/h) − ż̄(t)‖² dt`.
    pub proximity: f64,
    pub converged: bool,
}

/// Rows of a study plus the two monotonicity verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    pub nonincreasing_within_noise: bool,
    pub halves_from_first_to_last: bool,
}

/// Relative slack allowed between consecutive rows.
pub const STUDY_NOISE: f64 = 0.10;

impl ConvergenceStudy {
    pub fn from_rows(rows: Vec<StudyRow>) -> Self {
        let nonincreasing_within_noise = rows.windows(2).all(|w| w[1].convergence_sum <= w[0].convergence_sum * (1.0 + STUDY_NOISE) + f64::EPSILON);
        let halves_from_first_to_last = match (rows.first(), rows.last()) {
            (Some(a), Some(b)) if rows.len() >= 2 => b.convergence_sum < 0.5 * a.convergence_sum,
            _ => false,
        };
        Self { rows, nonincreasing_within_noise, halves_from_first_to_last }
    }
}

/// Solves the reference-mode problem for every `k` (in parallel) and
/// tabulates the convergence quantities.
pub fn convergence_study(spec: &ProblemSpec, reference: &dyn PathLike, ks: &[usize], config: &OptimizerConfig) -> Result<ConvergenceStudy> {
    let results: Vec<Result<StudyRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ks
            .iter()
            .map(|&k| {
                scope.spawn(move || -> Result<StudyRow> {
                    let mesh = Mesh::for_spec(spec, k)?;
                    let mode = ReferenceMode::Path(reference);
                    let sol = solve_pk(spec, mode, &mesh, config)?;
                    let z = &sol.z_opt;
                    let max_state_gap = (0..=k).map(|j| (&z.x[j] - reference.value(Component::State, mesh.time(j))).norm()).fold(0.0, f64::max);
                    Ok(StudyRow {
                        k,
                        j_value: sol.j_value,
                        convergence_sum: sol.breakdown.convergence_sum(),
                        max_state_gap,
                        proximity: sol.breakdown.proximity,
                        converged: sol.converged,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("study worker panicked")).collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.k);
    Ok(ConvergenceStudy::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example81::{continuous_minimizer, problem, OPTIMAL_VALUE};

    #[test]
    fn solves_worked_example_in_both_modes() {
        let spec = problem();
        let reference = continuous_minimizer();
        for k in [1, 10] {
            let mesh = Mesh::for_spec(&spec, k).unwrap();
            for mode in [ReferenceMode::FixedPoint, ReferenceMode::Path(&reference)] {
                let sol = solve_pk(&spec, mode, &mesh, &OptimizerConfig::default()).unwrap();
                assert!(sol.converged, "k={k} {:?}", sol.residuals);
                assert!((sol.j_value - OPTIMAL_VALUE).abs() < 1e-8, "k={k} J={}", sol.j_value);
            }
        }
    }

    #[test]
    fn oracle_finds_worked_example_optimum() {
        let spec = problem();
        let grid = GridSpec { max_points: 20_000, ..GridSpec::default() };
        for k in [1, 2] {
            let mesh = Mesh::for_spec(&spec, k).unwrap();
            let sol = brute_force_oracle(&spec, ReferenceMode::FixedPoint, &mesh, &grid).unwrap();
            assert!((sol.j_value - OPTIMAL_VALUE).abs() < 1e-9, "k={k} J={}", sol.j_value);
        }
    }
}
