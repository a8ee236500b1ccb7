//! Geometry of the polyhedral cone `C = {x : <x*_i, x> <= 0}` and of its
//! translates `C + u`.

use crate::error::{Error, Result};
use crate::linalg::{column_rank, lstsq, nnls};
use crate::{Matrix, Vector};

/// Default absolute tolerance for deciding that a constraint is active.
pub const ACTIVITY_TOL: f64 = 1e-9;
/// Tolerance used by the column-pivoted rank test.
pub const RANK_TOL: f64 = 1e-10;
/// Above this many generators the projection uses the dual route.
pub const ENUMERATION_LIMIT: usize = 12;

/// The generating vectors `x*_1, ..., x*_m` of the polyhedral cone `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    generators: Vec<Vector>,
    dim: usize,
}

/// Result of an activity query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    /// Some constraint exceeds the tolerance, so the point is not in the set.
    pub outside: bool,
}

/// Split of an index set according to the sign of `<x*_i, y>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveIndexPartition {
    pub active: Vec<usize>,
    pub zero_part: Vec<usize>,
    pub pos_part: Vec<usize>,
}

/// Nearest point of `C + u` together with its KKT multipliers.
#[derive(Debug, Clone)]
pub struct Projection {
    pub point: Vector,
    /// One multiplier per generator; zero off the active set.
    pub multipliers: Vector,
}

/// Outcome of a normal-cone membership query.
#[derive(Debug, Clone)]
pub struct NormalConeMembership {
    pub contains: bool,
    pub coefficients: Vector,
    pub residual: f64,
    pub reason: Option<String>,
}

impl GeneratorSet {
    /// Build a generator set, rejecting empty sets, ragged dimensions and zero vectors.
    pub fn new(generators: Vec<Vector>) -> Result<Self> {
        let dim = generators.first().map(|g| g.len()).ok_or_else(|| Error::InvalidSpec {
            field: "generators".into(),
            reason: "at least one generator is required".into(),
        })?;
        if dim == 0 {
            return Err(Error::InvalidSpec {
                field: "generators".into(),
                reason: "state dimension must be positive".into(),
            });
        }
        for (i, g) in generators.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::InvalidSpec {
                    field: format!("generators[{i}]"),
                    reason: format!("expected length {dim}, got {}", g.len()),
                });
            }
            if g.norm() == 0.0 {
                return Err(Error::InvalidSpec {
                    field: format!("generators[{i}]"),
                    reason: "zero generator makes its inequality vacuous".into(),
                });
            }
        }
        Ok(Self { generators, dim })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Vector::from_row_slice(r)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, i: usize) -> &Vector {
        &self.generators[i]
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    /// `n × |idx|` matrix whose columns are the selected generators.
    pub fn columns(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.dim, idx.len(), |r, c| self.generators[idx[c]][r])
    }

    pub fn matrix(&self) -> Matrix {
        let all: Vec<usize> = (0..self.count()).collect();
        self.columns(&all)
    }

    /// Constraint values `<x*_i, x>`.
    pub fn values(&self, x: &Vector) -> Vec<f64> {
        self.generators.iter().map(|g| g.dot(x)).collect()
    }

    /// Largest constraint value, i.e. the signed violation of `x ∈ C`.
    pub fn max_violation(&self, x: &Vector) -> (usize, f64) {
        self.values(x)
            .into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    }

    /// `Σ_i coeff_i x*_i` over the listed indices.
    pub fn combine(&self, idx: &[usize], coeff: &[f64]) -> Vector {
        idx.iter()
            .zip(coeff)
            .fold(Vector::zeros(self.dim), |acc, (&i, &c)| acc + &self.generators[i] * c)
    }

    /// Indices with `|<x*_i, x>| <= tol`, flagging points outside `C`.
    pub fn active_indices(&self, x: &Vector, tol: f64) -> ActiveSet {
        let values = self.values(x);
        ActiveSet {
            indices: (0..values.len()).filter(|&i| values[i].abs() <= tol).collect(),
            outside: values.iter().any(|&v| v > tol),
        }
    }

    /// Split `active` into the zero part and the strictly positive part at `y`.
    pub fn split_indices(&self, y: &Vector, active: &[usize], tol: f64) -> ActiveIndexPartition {
        let mut out = ActiveIndexPartition { active: active.to_vec(), ..Default::default() };
        for &i in active {
            let v = self.generators[i].dot(y);
            if v.abs() <= tol {
                out.zero_part.push(i);
            } else if v > tol {
                out.pos_part.push(i);
            }
        }
        out
    }

    /// Whether the generators listed in `idx` are linearly independent.
    pub fn linearly_independent(&self, idx: &[usize]) -> bool {
        idx.is_empty() || column_rank(&self.columns(idx), RANK_TOL) == idx.len()
    }

    /// Projection of `y` onto `C + u`.
    ///
    /// Up to [`ENUMERATION_LIMIT`] generators every candidate active set is
    /// enumerated; beyond that the polar-cone dual is solved by NNLS.
    pub fn project_translated(&self, y: &Vector, u: &Vector) -> Projection {
        let shifted = y - u;
        let point = if self.count() <= ENUMERATION_LIMIT {
            self.project_with_equalities(&shifted, &[])
                .unwrap_or_else(|| self.project_dual(&shifted))
        } else {
            self.project_dual(&shifted)
        };
        let multipliers = self.kkt_multipliers(&shifted, &point);
        Projection { point: point + u, multipliers }
    }

    /// Projection onto `C` through the Moreau split `y = Π_C y + Π_{C°} y`.
    pub fn project_dual(&self, y: &Vector) -> Vector {
        let g = self.matrix();
        let coeff = nnls(&g, y);
        y - g * coeff
    }

    /// Projection onto the face `{x ∈ C : <x*_i, x> = 0, i ∈ equalities}`.
    ///
    /// Returns `None` only when no enumerated active set passes the KKT test,
    /// which signals numerical trouble.
    pub fn project_with_equalities(&self, y: &Vector, equalities: &[usize]) -> Option<Vector> {
        let scale = y.norm().max(1.0);
        let free_idx: Vec<usize> = (0..self.count()).filter(|i| !equalities.contains(i)).collect();
        let mut subsets: Vec<u32> = (0..(1u32 << free_idx.len())).collect();
        subsets.sort_by_key(|s| s.count_ones());
        for mask in subsets {
            let mut idx = equalities.to_vec();
            idx.extend(free_idx.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &i)| i));
            let g = self.columns(&idx);
            let lambda = lstsq(&g, y);
            let signs_ok = lambda.iter().skip(equalities.len()).all(|&l| l >= -1e-12 * scale);
            if !signs_ok {
                continue;
            }
            let p = y - &g * &lambda;
            let feasible = self.values(&p).iter().all(|&v| v <= 1e-10 * scale);
            let on_face = equalities.iter().all(|&i| self.generators[i].dot(&p).abs() <= 1e-10 * scale);
            if feasible && on_face {
                return Some(p);
            }
        }
        None
    }

    /// Minimum-norm nonnegative multipliers with `y − p = Σ λ_i x*_i` over active `i`.
    pub fn kkt_multipliers(&self, y: &Vector, p: &Vector) -> Vector {
        let scale = y.norm().max(1.0);
        let active = self.active_indices(p, 1e-9 * scale).indices;
        let coeff = nnls(&self.columns(&active), &(y - p));
        let mut out = Vector::zeros(self.count());
        for (c, &i) in active.iter().enumerate() {
            out[i] = coeff[c];
        }
        out
    }

    /// Projection of `v` onto `cone{x*_i : i ∈ idx}`; returns point and coefficients.
    pub fn project_onto_cone(&self, v: &Vector, idx: &[usize]) -> (Vector, Vector) {
        if idx.is_empty() {
            return (Vector::zeros(self.dim), Vector::zeros(0));
        }
        let g = self.columns(idx);
        let coeff = nnls(&g, v);
        (g * &coeff, coeff)
    }

    /// Whether `v ∈ N(x; C + u)`, with realizing coefficients when it is.
    pub fn normal_cone_contains(&self, x: &Vector, v: &Vector, u: &Vector, tol: f64) -> NormalConeMembership {
        let rel = x - u;
        let active = self.active_indices(&rel, tol);
        if active.outside {
            return NormalConeMembership {
                contains: false,
                coefficients: Vector::zeros(self.count()),
                residual: f64::INFINITY,
                reason: Some("x outside set".into()),
            };
        }
        let (fit, coeff) = self.project_onto_cone(v, &active.indices);
        let residual = (v - fit).norm();
        let mut coefficients = Vector::zeros(self.count());
        for (c, &i) in active.indices.iter().enumerate() {
            coefficients[i] = coeff[c];
        }
        NormalConeMembership {
            contains: residual <= tol,
            coefficients,
            residual,
            reason: (residual > tol).then(|| format!("cone residual {residual:.3e}")),
        }
    }
}

/// Free-function form of [`GeneratorSet::active_indices`].
pub fn active_indices(x: &Vector, c: &GeneratorSet, tol: f64) -> ActiveSet {
    c.active_indices(x, tol)
}

/// Free-function form of [`GeneratorSet::split_indices`].
pub fn split_indices(y: &Vector, active: &[usize], c: &GeneratorSet, tol: f64) -> ActiveIndexPartition {
    c.split_indices(y, active, tol)
}

/// Free-function form of [`GeneratorSet::project_translated`].
pub fn project_translated_polyhedron(y: &Vector, c: &GeneratorSet, u: &Vector) -> Projection {
    c.project_translated(y, u)
}

/// Free-function form of [`GeneratorSet::normal_cone_contains`].
pub fn normal_cone_contains(x: &Vector, v: &Vector, c: &GeneratorSet, u: &Vector, tol: f64) -> NormalConeMembership {
    c.normal_cone_contains(x, v, u, tol)
}

/// Rank test gating the equality clauses that need independent generators.
pub fn linear_independence_check(c: &GeneratorSet, idx: &[usize]) -> bool {
    c.linearly_independent(idx)
}
