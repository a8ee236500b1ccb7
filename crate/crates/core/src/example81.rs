//! The one-dimensional worked example: `C = (−∞, 0]`, shift constrained to
//! the unit sphere, dynamics `ẋ ∈ N_{C+u}(x) + a`, cost `(x(1) − 1)²/2 + ∫ a²/2`.
//!
//! Its continuous minimizer is `x̄(t) = t/2`, `ū ≡ 1`, `ā ≡ −1/2` with value
//! `1/4`. The discrete optimality relations reduce to a linear system in the
//! controls, solved here in closed form and cross-checked elsewhere against
//! the general optimizer.

use crate::approximation::{DiscreteTriple, Mesh, ReferenceMode, DEFAULT_ILM_EPSILON};
use crate::costs::{RunningCost, TerminalCost};
use crate::dynamics::{PerturbationField, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::GeneratorSet;
use crate::optimality::DualCertificate;
use crate::path::{Component, ContinuousPath, PathLike};
use crate::{Matrix, Vector};

fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

/// Problem data of the worked example.
pub fn problem() -> ProblemSpec {
    let field = PerturbationField::affine(Matrix::zeros(1, 1), Matrix::identity(1, 1), Vector::zeros(1), 0.0, 1.0)
        .expect("static affine field");
    ProblemSpec {
        generators: GeneratorSet::new(vec![scalar(1.0)]).expect("static generator"),
        field,
        x0: scalar(0.0),
        u0: scalar(1.0),
        control_dim: 1,
        radius: 1.0,
        horizon: 1.0,
        tau: 0.0,
        terminal: TerminalCost::Quadratic { q: Matrix::identity(1, 1), target: scalar(1.0) },
        running: RunningCost::diagonal(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
        ilm_epsilon: DEFAULT_ILM_EPSILON,
    }
}

/// Optimal value of the continuous problem.
pub const OPTIMAL_VALUE: f64 = 0.25;

/// `x̄(t) = t/2`, `ū ≡ 1`, `ā ≡ −1/2`.
pub fn continuous_minimizer() -> ContinuousPath {
    ContinuousPath::new(
        vec![0.0, 1.0],
        vec![scalar(0.0), scalar(0.5)],
        vec![scalar(1.0), scalar(1.0)],
        vec![scalar(-0.5), scalar(-0.5)],
    )
    .expect("static path")
}

/// Mesh increments of a reference: `α_j = x̄(t_j) − x̄(t_{j−1})`,
/// `β_j = ā(t_j) − ā(t_{j−1})`, `j = 1..=k`, plus `ā(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceIncrements {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub initial_control: f64,
}

impl ReferenceIncrements {
    pub fn from_path(reference: &dyn PathLike, mesh: &Mesh) -> Self {
        let at = |c, j: usize| reference.value(c, mesh.time(j))[0];
        Self {
            alpha: (1..=mesh.k).map(|j| at(Component::State, j) - at(Component::State, j - 1)).collect(),
            beta: (1..=mesh.k).map(|j| at(Component::Control, j) - at(Component::Control, j - 1)).collect(),
            initial_control: at(Component::Control, 0),
        }
    }

    /// Piecewise-linear reference with these increments and `ū ≡ 1`.
    pub fn to_path(&self, mesh: &Mesh) -> Result<ContinuousPath> {
        if self.alpha.len() != mesh.k || self.beta.len() != mesh.k {
            return Err(Error::Dimension(format!("expected {} increments", mesh.k)));
        }
        let x = std::iter::once(0.0).chain(self.alpha.iter().scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        }));
        let a = std::iter::once(self.initial_control).chain(self.beta.iter().scan(self.initial_control, |s, v| {
            *s += v;
            Some(*s)
        }));
        ContinuousPath::new(mesh.times(), x.map(scalar).collect(), vec![scalar(1.0); mesh.k + 1], a.map(scalar).collect())
    }
}

/// Which discrete problem the closed form refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum Example81Mode {
    /// The discrete problem without proximity terms; `a_0` is free.
    FixedPoint,
    /// Proximity to a given reference; `a_0 = ā(0)` is pinned.
    GivenReference(ReferenceIncrements),
}

/// Discrete optimum with its dual certificate.
#[derive(Debug, Clone)]
pub struct Example81Solution {
    pub triple: DiscreteTriple,
    pub certificate: DualCertificate,
    pub reference: Option<ContinuousPath>,
    pub j_value: f64,
}

impl Example81Solution {
    pub fn mode(&self) -> ReferenceMode<'_> {
        match &self.reference {
            Some(r) => ReferenceMode::Path(r),
            None => ReferenceMode::FixedPoint,
        }
    }
}

struct Relations<'a> {
    mesh: Mesh,
    reference: Option<&'a ReferenceIncrements>,
}

impl Relations<'_> {
    fn states(&self, a: &[f64]) -> Vec<f64> {
        let h = self.mesh.h;
        std::iter::once(0.0)
            .chain(a[..self.mesh.k].iter().scan(0.0, |x, ai| {
                *x -= h * ai;
                Some(*x)
            }))
            .collect()
    }

    /// Adjoints `(p^x, p^a)` implied by the controls through transversality
    /// and the adjoint links, together with the initial-velocity term.
    fn adjoints(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.mesh.k;
        let h = self.mesh.h;
        let x = self.states(a);
        let mut chi = vec![0.0; k + 1];
        let mut p_a = vec![0.0; k + 1];
        if let Some(r) = self.reference {
            chi[1] = (2.0 / h) * ((x[1] - x[0]) / h - r.alpha[0] / h) / h;
            for j in 0..k {
                p_a[j + 1] = 2.0 * (a[j + 1] - a[j] - r.beta[j]) / h;
            }
        }
        let mut p_x = vec![0.0; k + 1];
        p_x[k] = -(x[k] - 1.0) - h * chi[k];
        for j in (1..k).rev() {
            p_x[j] = p_x[j + 1] - h * chi[j];
        }
        p_x[0] = p_x[1];
        (p_x, p_a, chi)
    }

    fn theta_state(&self, a: &[f64], j: usize) -> f64 {
        match self.reference {
            Some(r) => 2.0 * (-self.mesh.h * a[j] - r.alpha[j]),
            None => 0.0,
        }
    }

    /// Residuals of the control adjoint equations; zero at the optimum.
    fn residuals(&self, a: &[f64]) -> Vec<f64> {
        let k = self.mesh.k;
        let h = self.mesh.h;
        let (p_x, p_a, _) = self.adjoints(a);
        let first = if self.reference.is_some() { 1 } else { 0 };
        let mut out: Vec<f64> = (first..k)
            .map(|j| (p_a[j + 1] - p_a[j]) / h - a[j] - (p_x[j + 1] - self.theta_state(a, j) / h))
            .collect();
        if self.reference.is_some() {
            out.push(p_a[k]);
        }
        out
    }

    /// Full control vector from the unknowns.
    fn controls(&self, unknowns: &[f64]) -> Vec<f64> {
        match self.reference {
            Some(r) => std::iter::once(r.initial_control).chain(unknowns.iter().cloned()).collect(),
            None => {
                let mut a = unknowns.to_vec();
                a.push(*unknowns.last().expect("k ≥ 1"));
                a
            }
        }
    }
}

/// Closed-form discrete optimum for `k` steps.
///
/// The relations are affine in the unknown controls, so the system matrix is
/// assembled column by column from unit evaluations and solved by LU.
pub fn example81_solve(k: usize, mode: &Example81Mode) -> Result<Example81Solution> {
    let spec = problem();
    let mesh = Mesh::for_spec(&spec, k)?;
    let increments = match mode {
        Example81Mode::FixedPoint => None,
        Example81Mode::GivenReference(r) => Some(r),
    };
    let rel = Relations { mesh, reference: increments };
    let base = rel.residuals(&rel.controls(&vec![0.0; k]));
    let mut system = Matrix::zeros(k, k);
    for col in 0..k {
        let mut unit = vec![0.0; k];
        unit[col] = 1.0;
        let r = rel.residuals(&rel.controls(&unit));
        for row in 0..k {
            system[(row, col)] = r[row] - base[row];
        }
    }
    let rhs = -Vector::from_vec(base);
    let unknowns = system.lu().solve(&rhs).ok_or_else(|| Error::Singular("control relations".into()))?;
    let a = rel.controls(unknowns.as_slice());
    let x = rel.states(&a);
    if let Some((j, v)) = x[..k].iter().enumerate().find(|(_, v)| **v >= 1.0 - 1e-9) {
        return Err(Error::Interiority { node: j, value: *v });
    }
    let reference = increments.map(|r| r.to_path(&mesh)).transpose()?;
    let triple = DiscreteTriple::new(mesh, x.iter().map(|&v| scalar(v)).collect(), vec![scalar(1.0); k + 1], a.iter().map(|&v| scalar(v)).collect())?;
    let mode_ref = match &reference {
        Some(r) => ReferenceMode::Path(r),
        None => ReferenceMode::FixedPoint,
    };
    let mut cert = DualCertificate::skeleton(&triple, mode_ref, &spec, 1.0);
    let (p_x, p_a, _) = rel.adjoints(&a);
    for j in 0..=k {
        cert.p_x[j] = scalar(p_x[j]);
        cert.p_a[j] = scalar(p_a[j]);
    }
    if increments.is_some() {
        let y0 = cert.coderivative_argument(0, mesh.h)[0];
        cert.p_a[0] = scalar(p_a[1] - mesh.h * (a[0] + y0));
    }
    let mu_tilde = f64::INFINITY;
    let j_value = crate::approximation::cost_jk(&triple, mode_ref, &spec, mu_tilde);
    Ok(Example81Solution { triple, certificate: cert, reference, j_value })
}

/// Given-reference mode built from the continuous minimizer on a `k`-mesh.
pub fn given_reference_mode(k: usize) -> Result<Example81Mode> {
    let mesh = Mesh::for_spec(&problem(), k)?;
    Ok(Example81Mode::GivenReference(ReferenceIncrements::from_path(&continuous_minimizer(), &mesh)))
}

/// Partial-sum recursion for `S_j = a_0 + … + a_j` in given-reference mode,
/// written as a `k × k` system in `S_1..S_k`: a bidiagonal part plus the
/// rank-one coupling through `S_{k−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumSystem {
    pub lower: Matrix,
    pub coupling_row: Vector,
    pub coupling_col: Option<usize>,
    pub rhs: Vector,
}

impl PartialSumSystem {
    pub fn new(k: usize, r: &ReferenceIncrements) -> Result<Self> {
        if k < 1 || r.alpha.len() != k || r.beta.len() != k {
            return Err(Error::Dimension(format!("need k ≥ 1 and {k} increments")));
        }
        let h = 1.0 / k as f64;
        let s0 = r.initial_control;
        let mut lower = Matrix::zeros(k, k);
        let mut rhs = Vector::zeros(k);
        let coupling_row = Vector::from_fn(k, |j, _| h * h * (j + 1) as f64);
        let coupling_col = if k >= 2 { Some(k - 2) } else { None };
        for j in 0..k {
            let tail: f64 = r.alpha.iter().skip(j + 1).sum();
            rhs[j] = r.beta[j] + h * (1.0 - (j + 1) as f64 * h) / 2.0 + h * tail;
            lower[(j, j)] = 1.0;
            if j == 0 {
                rhs[j] += (1.0 + h * h / 2.0) * s0;
            } else {
                lower[(j, j - 1)] = -(1.0 + h * h / 2.0);
            }
            if coupling_col.is_none() {
                rhs[j] -= coupling_row[j] * s0;
            }
        }
        Ok(Self { lower, coupling_row, coupling_col, rhs })
    }

    pub fn dense(&self) -> Matrix {
        let mut m = self.lower.clone();
        if let Some(c) = self.coupling_col {
            for j in 0..m.nrows() {
                m[(j, c)] += self.coupling_row[j];
            }
        }
        m
    }

    /// Dense LU solve.
    pub fn solve_dense(&self) -> Result<Vector> {
        self.dense().lu().solve(&self.rhs).ok_or_else(|| Error::Singular("partial-sum system".into()))
    }

    /// Forward substitution with a Sherman-Morrison correction for the coupling.
    pub fn solve_low_rank(&self) -> Result<Vector> {
        let forward = |b: &Vector| -> Vector {
            let mut s = Vector::zeros(b.len());
            for j in 0..b.len() {
                let prev = if j > 0 { self.lower[(j, j - 1)] * s[j - 1] } else { 0.0 };
                s[j] = (b[j] - prev) / self.lower[(j, j)];
            }
            s
        };
        let base = forward(&self.rhs);
        let Some(c) = self.coupling_col else { return Ok(base) };
        let corr = forward(&self.coupling_row);
        let denom = 1.0 + corr[c];
        if denom.abs() < 1e-14 {
            return Err(Error::Singular("rank-one update".into()));
        }
        Ok(&base - corr * (base[c] / denom))
    }

    /// Controls `a_j = S_j − S_{j−1}` recovered from the partial sums.
    pub fn controls(&self, sums: &Vector, initial_control: f64) -> Vec<f64> {
        std::iter::once(initial_control)
            .chain(sums.iter().scan(initial_control, |prev, s| {
                let a = s - *prev;
                *prev = *s;
                Some(a)
            }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_optimum_is_constant_half() {
        for k in [1, 2, 5, 10] {
            let sol = example81_solve(k, &Example81Mode::FixedPoint).unwrap();
            for a in &sol.triple.a {
                assert!((a[0] + 0.5).abs() < 1e-12);
            }
            assert!((sol.j_value - OPTIMAL_VALUE).abs() < 1e-12);
            assert!((sol.triple.x[k][0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn given_reference_optimum_at_minimizer() {
        for k in [1, 3, 10] {
            let sol = example81_solve(k, &given_reference_mode(k).unwrap()).unwrap();
            for (j, a) in sol.triple.a.iter().enumerate() {
                assert!((a[0] + 0.5).abs() < 1e-10, "k={k} j={j} a={}", a[0]);
            }
        }
    }

    #[test]
    fn partial_sum_solvers_agree() {
        for k in [1, 2, 7] {
            let mesh = Mesh::for_spec(&problem(), k).unwrap();
            let r = ReferenceIncrements::from_path(&continuous_minimizer(), &mesh);
            let sys = PartialSumSystem::new(k, &r).unwrap();
            let dense = sys.solve_dense().unwrap();
            let low = sys.solve_low_rank().unwrap();
            assert!((dense - low).amax() < 1e-12);
        }
    }
}
