//! Coderivatives of the sweeping field and a sampling oracle for limiting
//! normals to the graph of the normal-cone map of a small polyhedral cone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::ProblemSpec;
use crate::error::{Error, Result};
use crate::geometry::{ActiveIndexPartition, GeneratorSet, ACTIVITY_TOL};
use crate::linalg::{mixed_sign_lstsq, nnls};
use crate::{Matrix, Vector};

/// Upper estimate of `D*F(x, u, a, w)(y)`: all triples
/// `(Jxᵀy + Σγ_i x*_i, −Σγ_i x*_i, Jaᵀy)` with `γ_i` free on the active
/// generators orthogonal to `y` and nonnegative on those with `⟨x*_i, y⟩ > 0`.
#[derive(Debug, Clone)]
pub struct CoderivativeFamily {
    pub partition: ActiveIndexPartition,
    pub y: Vector,
    pub state_part: Vector,
    pub control_part: Vector,
    /// Whether `y` meets the orthogonality pattern on generators carrying
    /// positive normal-cone weight in `w − f`.
    pub domain_pattern_ok: bool,
    generators: GeneratorSet,
}

/// Best fit of a candidate element to the family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyFit {
    pub residual: f64,
    /// Weights indexed like `zero_part` followed by `pos_part`.
    pub gamma: Vec<f64>,
}

impl CoderivativeFamily {
    /// Builds the family at a point of the graph of `F`, or fails if
    /// `(x, u, a, w)` is not in the graph.
    pub fn assemble(x: &Vector, u: &Vector, a: &Vector, w: &Vector, y: &Vector, spec: &ProblemSpec, tol: f64) -> Result<Self> {
        let c = &spec.generators;
        let rel = x - u;
        let (idx, worst) = c.max_violation(&rel);
        if worst > ACTIVITY_TOL {
            return Err(Error::Precondition(format!("x − u violates constraint {} by {worst:.3e}", idx + 1)));
        }
        let active = c.active_indices(&rel, ACTIVITY_TOL).indices;
        let excess = w - spec.field.eval(x, a);
        let weights = nnls(&c.columns(&active), &excess);
        let fit = (c.columns(&active) * &weights - &excess).norm();
        if fit > 1e-7 * (1.0 + excess.norm()) {
            return Err(Error::EmptyImage { index: 0, excess: fit });
        }
        let partition = c.split_indices(y, &active, tol);
        let domain_pattern_ok = active
            .iter()
            .zip(weights.iter())
            .all(|(&i, &wt)| wt <= tol || c.generator(i).dot(y).abs() <= tol * (1.0 + y.norm()));
        let state_part = spec.field.jacobian_state(x, a).transpose() * y;
        let control_part = spec.field.jacobian_control(x, a).transpose() * y;
        Ok(Self { partition, y: y.clone(), state_part, control_part, domain_pattern_ok, generators: c.clone() })
    }

    fn support(&self) -> Vec<usize> {
        self.partition.zero_part.iter().chain(&self.partition.pos_part).cloned().collect()
    }

    /// Element of the family for given weights on `support()`.
    pub fn element(&self, gamma: &[f64]) -> (Vector, Vector, Vector) {
        let cone = self.generators.combine(&self.support(), gamma);
        (&self.state_part + &cone, -cone, self.control_part.clone())
    }

    /// Distance from `(zx, zu, za)` to the family.
    pub fn contains(&self, zx: &Vector, zu: &Vector, za: &Vector) -> FamilyFit {
        let n = zx.len();
        let stack = |top: &Matrix| {
            let mut m = Matrix::zeros(2 * n + za.len(), top.ncols());
            m.rows_mut(0, n).copy_from(top);
            m.rows_mut(n, n).copy_from(&(-top));
            m
        };
        let free = stack(&self.generators.columns(&self.partition.zero_part));
        let pos = stack(&self.generators.columns(&self.partition.pos_part));
        let mut rhs = Vector::zeros(2 * n + za.len());
        rhs.rows_mut(0, n).copy_from(&(zx - &self.state_part));
        rhs.rows_mut(n, n).copy_from(zu);
        rhs.rows_mut(2 * n, za.len()).copy_from(&(za - &self.control_part));
        let sol = mixed_sign_lstsq(&free, &pos, &rhs);
        FamilyFit { residual: sol.residual, gamma: sol.free.iter().chain(sol.nonneg.iter()).cloned().collect() }
    }
}

/// Convenience wrapper around [`CoderivativeFamily::assemble`].
pub fn coderivative_f_upper(x: &Vector, u: &Vector, a: &Vector, w: &Vector, y: &Vector, spec: &ProblemSpec) -> Result<CoderivativeFamily> {
    CoderivativeFamily::assemble(x, u, a, w, y, spec, ACTIVITY_TOL)
}

/// Sampled limiting normal cone to `gph N_C` at a graph point.
#[derive(Debug, Clone)]
pub struct LimitingNormalOracle {
    generators: GeneratorSet,
    point: Vector,
    /// Nearby graph points at which regular normals were sampled, `point` first.
    anchors: Vec<Vector>,
    /// Unit limiting normals `(v, −y)` in `R^{2n}`.
    pub rays: Vec<Vector>,
    probe: f64,
}

const ORACLE_MAX_DIM: usize = 2;
const ORACLE_MAX_GENERATORS: usize = 3;

impl LimitingNormalOracle {
    /// Samples proximal normals around `(x̄, w̄) ∈ gph N_C`.
    pub fn sample(c: &GeneratorSet, x_bar: &Vector, w_bar: &Vector, samples: usize, seed: u64) -> Result<Self> {
        if c.dim() > ORACLE_MAX_DIM || c.count() > ORACLE_MAX_GENERATORS {
            return Err(Error::TooLarge(format!(
                "normal-cone oracle supports n ≤ {ORACLE_MAX_DIM}, m ≤ {ORACLE_MAX_GENERATORS}; got n = {}, m = {}",
                c.dim(),
                c.count()
            )));
        }
        let n = c.dim();
        let mut point = Vector::zeros(2 * n);
        point.rows_mut(0, n).copy_from(x_bar);
        point.rows_mut(n, n).copy_from(w_bar);
        let projected = project_onto_graph(c, &point);
        if (&projected - &point).norm() > 1e-9 * (1.0 + point.norm()) {
            return Err(Error::Precondition("point is not in the graph of the normal-cone map".into()));
        }
        let scale = 1.0_f64.max(point.norm());
        let radius = 1e-2 * scale;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut anchors = vec![point.clone()];
        let mut signatures = vec![face_signature(c, &point, scale)];
        let mut rays = Vec::new();
        for _ in 0..samples {
            let dir = standard_normal_vector(&mut rng, 2 * n);
            let shrink = 0.05 + 0.95 * rng.random::<f64>();
            let probe = &point + dir.normalize() * (radius * shrink);
            let q = project_onto_graph(c, &probe);
            let normal = &probe - &q;
            let len = normal.norm();
            if len <= 1e-14 * scale {
                continue;
            }
            rays.push(normal / len);
            let signature = face_signature(c, &q, scale);
            let seen = signatures.iter().filter(|s| **s == signature).count();
            if seen < ANCHORS_PER_FACE {
                signatures.push(signature);
                anchors.push(q);
            }
        }
        Ok(Self { generators: c.clone(), point, anchors, rays, probe: 1e-4 * scale })
    }

    pub fn point(&self) -> &Vector {
        &self.point
    }

    /// Violation of `n ∈ N_{gph}(point)`: the smallest relative move of a
    /// proximal step along `n` taken from a sampled nearby graph point.
    pub fn violation(&self, normal: &Vector) -> f64 {
        let len = normal.norm();
        if len == 0.0 {
            return 0.0;
        }
        let dir = normal / len;
        self.anchors
            .iter()
            .map(|q| {
                let moved = project_onto_graph(&self.generators, &(q + &dir * self.probe));
                (moved - q).norm() / self.probe
            })
            .fold(f64::INFINITY, f64::min)
    }
}

const ANCHORS_PER_FACE: usize = 2;

/// Active constraints of the state part and the support of the normal part;
/// the regular normal cone of the graph is constant on each such face.
fn face_signature(c: &GeneratorSet, q: &Vector, scale: f64) -> (Vec<usize>, Vec<usize>) {
    let n = c.dim();
    let x = q.rows(0, n).into_owned();
    let w = q.rows(n, n).into_owned();
    let active = c.active_indices(&x, 1e-12 * scale).indices;
    let coeff = nnls(&c.columns(&active), &w);
    let support = active.iter().zip(coeff.iter()).filter(|(_, v)| **v > 1e-12 * scale).map(|(i, _)| *i).collect();
    (active, support)
}

/// Nearest point of `gph N_C` to `p = (a, b)`, searching every face piece
/// `{x ∈ C : ⟨x*_i, x⟩ = 0, i ∈ S} × cone{x*_i : i ∈ S}`.
pub fn project_onto_graph(c: &GeneratorSet, p: &Vector) -> Vector {
    let n = c.dim();
    let m = c.count();
    let a = p.rows(0, n).into_owned();
    let b = p.rows(n, n).into_owned();
    let mut best: Option<(f64, Vector)> = None;
    for mask in 0u32..(1 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let Some(x) = c.project_with_equalities(&a, &subset) else { continue };
        let w = if subset.is_empty() { Vector::zeros(n) } else { c.project_onto_cone(&b, &subset).0 };
        let dist = (&a - &x).norm_squared() + (&b - &w).norm_squared();
        if best.as_ref().is_none_or(|(d, _)| dist < *d - 1e-15) {
            let mut q = Vector::zeros(2 * n);
            q.rows_mut(0, n).copy_from(&x);
            q.rows_mut(n, n).copy_from(&w);
            best = Some((dist, q));
        }
    }
    best.map(|(_, q)| q).unwrap_or_else(|| p.clone())
}

/// Sampled comparison of the coderivative family with the chain-rule image
/// of the oracle's limiting normals.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityVerdict {
    /// Largest distance from an oracle-generated element to the family.
    pub oracle_in_family: f64,
    /// Largest oracle violation of a sampled family element, when tested.
    pub family_in_oracle: Option<f64>,
    pub rays_tested: usize,
    pub family_samples_tested: usize,
    pub independent: bool,
}

impl EqualityVerdict {
    pub fn holds(&self, tol: f64) -> bool {
        self.oracle_in_family <= tol && self.family_in_oracle.is_none_or(|v| v <= tol)
    }
}

/// Tests the family against oracle rays; the reverse inclusion is tested
/// only when the active generators at `x − u` are linearly independent.
pub fn coderivative_inclusion_check(x: &Vector, u: &Vector, a: &Vector, w: &Vector, spec: &ProblemSpec, samples: usize, seed: u64) -> Result<EqualityVerdict> {
    let c = &spec.generators;
    let n = c.dim();
    let rel = x - u;
    let normal_part = w - spec.field.eval(x, a);
    let oracle = LimitingNormalOracle::sample(c, &rel, &normal_part, samples, seed)?;
    let jx = spec.field.jacobian_state(x, a);
    let ja = spec.field.jacobian_control(x, a);
    let mut forward: f64 = 0.0;
    for ray in &oracle.rays {
        let v = ray.rows(0, n).into_owned();
        let y = -ray.rows(n, n).into_owned();
        let family = CoderivativeFamily::assemble(x, u, a, w, &y, spec, ACTIVITY_TOL)?;
        let zx = jx.transpose() * &y + &v;
        let za = ja.transpose() * &y;
        forward = forward.max(family.contains(&zx, &(-&v), &za).residual);
    }
    let active = c.active_indices(&rel, ACTIVITY_TOL).indices;
    let independent = c.linearly_independent(&active);
    let mut verdict = EqualityVerdict { oracle_in_family: forward, family_in_oracle: None, rays_tested: oracle.rays.len(), family_samples_tested: 0, independent };
    if !independent {
        return Ok(verdict);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut backward: f64 = 0.0;
    let mut tested = 0;
    for s in 0..samples {
        let mut y = standard_normal_vector(&mut rng, n);
        // Every other draw is pushed onto the orthogonal complement of a random
        // subset of active generators, so the free part of the pattern is exercised.
        if s % 2 == 1 && !active.is_empty() {
            let subset: Vec<usize> = active.iter().cloned().filter(|_| rng.random::<bool>()).collect();
            if !subset.is_empty() {
                let g = c.columns(&subset);
                let coeff = crate::linalg::lstsq(&g, &y);
                y -= g * coeff;
            }
        }
        let domain_probe = {
            let mut p = Vector::zeros(2 * n);
            p.rows_mut(n, n).copy_from(&(-&y));
            p
        };
        if y.norm() > 1e-12 && oracle.violation(&domain_probe) > 1e-9 {
            continue;
        }
        let family = CoderivativeFamily::assemble(x, u, a, w, &y, spec, 1e-9)?;
        let z_count = family.partition.zero_part.len();
        let gamma: Vec<f64> = (0..z_count + family.partition.pos_part.len())
            .map(|i| {
                let g: f64 = rng.sample(StandardNormal);
                if i < z_count {
                    g
                } else {
                    g.abs()
                }
            })
            .collect();
        let v = c.combine(&family.support(), &gamma);
        let mut candidate = Vector::zeros(2 * n);
        candidate.rows_mut(0, n).copy_from(&v);
        candidate.rows_mut(n, n).copy_from(&(-&y));
        backward = backward.max(oracle.violation(&candidate));
        tested += 1;
    }
    verdict.family_in_oracle = Some(backward);
    verdict.family_samples_tested = tested;
    Ok(verdict)
}

/// Like [`coderivative_inclusion_check`] but fails when the active
/// generators are dependent, since equality is then not asserted.
pub fn coderivative_equality_check(x: &Vector, u: &Vector, a: &Vector, w: &Vector, spec: &ProblemSpec, samples: usize, seed: u64) -> Result<EqualityVerdict> {
    let c = &spec.generators;
    let active = c.active_indices(&(x - u), ACTIVITY_TOL).indices;
    if !c.linearly_independent(&active) {
        return Err(Error::RankDeficient { rank: crate::linalg::column_rank(&c.columns(&active), crate::geometry::RANK_TOL), count: active.len() });
    }
    coderivative_inclusion_check(x, u, a, w, spec, samples, seed)
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximation::DEFAULT_ILM_EPSILON;
    use crate::costs::{RunningCost, TerminalCost};
    use crate::dynamics::PerturbationField;

    fn spec_for(c: GeneratorSet) -> ProblemSpec {
        let n = c.dim();
        ProblemSpec {
            field: PerturbationField::affine(Matrix::zeros(n, n), Matrix::identity(n, n), Vector::zeros(n), 0.0, 1.0).unwrap(),
            x0: Vector::zeros(n),
            u0: Vector::zeros(n),
            control_dim: n,
            radius: 1.0,
            horizon: 1.0,
            tau: 0.0,
            terminal: TerminalCost::zero(n),
            running: RunningCost::zero(2 * (3 * n)),
            ilm_epsilon: DEFAULT_ILM_EPSILON,
            generators: c,
        }
    }

    #[test]
    fn equality_on_one_dimensional_corner() {
        let spec = spec_for(GeneratorSet::from_rows(&[&[1.0]]).unwrap());
        let z = Vector::zeros(1);
        let v = coderivative_equality_check(&z, &z, &z, &z, &spec, 256, 7).unwrap();
        assert!(v.holds(1e-9), "{v:?}");
        assert!(v.family_samples_tested > 10);
    }

    #[test]
    fn equality_on_orthogonal_corner() {
        let spec = spec_for(GeneratorSet::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap());
        let z = Vector::zeros(2);
        let v = coderivative_equality_check(&z, &z, &z, &z, &spec, 256, 11).unwrap();
        assert!(v.holds(1e-9), "{v:?}");
    }

    #[test]
    fn dependent_generators_refuse_equality() {
        let spec = spec_for(GeneratorSet::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]).unwrap());
        let z = Vector::zeros(2);
        assert!(matches!(coderivative_equality_check(&z, &z, &z, &z, &spec, 64, 3), Err(Error::RankDeficient { .. })));
        let v = coderivative_inclusion_check(&z, &z, &z, &z, &spec, 256, 3).unwrap();
        assert!(v.oracle_in_family <= 1e-9, "{v:?}");
    }

    #[test]
    fn oracle_rejects_wrong_sign() {
        let c = GeneratorSet::from_rows(&[&[1.0]]).unwrap();
        let z = Vector::zeros(1);
        let oracle = LimitingNormalOracle::sample(&c, &z, &z, 256, 5).unwrap();
        // y > 0 forces γ ≥ 0; a negative weight is not a limiting normal.
        let bad = Vector::from_vec(vec![-1.0, -1.0]);
        assert!(oracle.violation(&bad) > 1e-3);
        let good = Vector::from_vec(vec![1.0, -1.0]);
        assert!(oracle.violation(&good) <= 1e-9);
    }
}
