//! Terminal and running costs: a quadratic catalog plus closure callbacks
//! differentiated by central differences.

use std::sync::Arc;

use crate::{Matrix, Vector};

type Scalar = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

fn central_gradient(f: &Scalar, s: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(s.len());
    let mut probe = s.clone();
    for i in 0..s.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = f(&probe);
        probe[i] = orig - step;
        let down = f(&probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    g
}

/// Terminal cost `φ(x)`.
#[derive(Clone)]
pub enum TerminalCost {
    /// `½ (x − target)ᵀ Q (x − target)`.
    Quadratic { q: Matrix, target: Vector },
    Callback { f: Scalar, fd_step: f64 },
}

/// Running cost `ℓ(x, u, a, ẋ, u̇, ȧ)` evaluated on the stacked vector.
#[derive(Clone)]
pub enum RunningCost {
    /// `½ sᵀ H s + bᵀ s + c`.
    Quadratic { hessian: Matrix, linear: Vector, constant: f64 },
    Callback { f: Scalar, fd_step: f64 },
}

impl std::fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Quadratic { q, target } => f.debug_struct("Quadratic").field("q", q).field("target", target).finish(),
            Self::Callback { fd_step, .. } => f.debug_struct("Callback").field("fd_step", fd_step).finish_non_exhaustive(),
        }
    }
}

impl std::fmt::Debug for RunningCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Quadratic { hessian, linear, constant } => f
                .debug_struct("Quadratic")
                .field("hessian", hessian)
                .field("linear", linear)
                .field("constant", constant)
                .finish(),
            Self::Callback { fd_step, .. } => f.debug_struct("Callback").field("fd_step", fd_step).finish_non_exhaustive(),
        }
    }
}

impl TerminalCost {
    pub fn zero(n: usize) -> Self {
        Self::Quadratic { q: Matrix::zeros(n, n), target: Vector::zeros(n) }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Self::Quadratic { q, target } => {
                let d = x - target;
                0.5 * d.dot(&(q * &d))
            }
            Self::Callback { f, .. } => f(x),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            Self::Quadratic { q, target } => (q + q.transpose()) * (x - target) * 0.5,
            Self::Callback { f, fd_step } => central_gradient(f, x, *fd_step),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Self::Quadratic { .. })
    }
}

impl RunningCost {
    pub fn zero(len: usize) -> Self {
        Self::Quadratic { hessian: Matrix::zeros(len, len), linear: Vector::zeros(len), constant: 0.0 }
    }

    /// Diagonal quadratic `½ Σ w_i s_i²`.
    pub fn diagonal(weights: &[f64]) -> Self {
        let n = weights.len();
        Self::Quadratic {
            hessian: Matrix::from_diagonal(&Vector::from_row_slice(weights)),
            linear: Vector::zeros(n),
            constant: 0.0,
        }
    }

    pub fn value(&self, s: &Vector) -> f64 {
        match self {
            Self::Quadratic { hessian, linear, constant } => 0.5 * s.dot(&(hessian * s)) + linear.dot(s) + constant,
            Self::Callback { f, .. } => f(s),
        }
    }

    pub fn gradient(&self, s: &Vector) -> Vector {
        match self {
            Self::Quadratic { hessian, linear, .. } => (hessian + hessian.transpose()) * s * 0.5 + linear,
            Self::Callback { f, fd_step } => central_gradient(f, s, *fd_step),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Self::Quadratic { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_terminal_matches_callback() {
        let quad = TerminalCost::Quadratic { q: Matrix::identity(1, 1), target: Vector::from_element(1, 1.0) };
        let cb = TerminalCost::Callback { f: Arc::new(|x: &Vector| 0.5 * (x[0] - 1.0).powi(2)), fd_step: 1e-5 };
        let x = Vector::from_element(1, 0.3);
        assert!((quad.value(&x) - cb.value(&x)).abs() < 1e-15);
        assert!((quad.gradient(&x)[0] - cb.gradient(&x)[0]).abs() < 1e-8);
    }

    #[test]
    fn running_diagonal_gradient() {
        let l = RunningCost::diagonal(&[0.0, 0.0, 1.0]);
        let s = Vector::from_row_slice(&[3.0, 1.0, -0.5]);
        assert_eq!(l.value(&s), 0.125);
        assert_eq!(l.gradient(&s), Vector::from_row_slice(&[0.0, 0.0, -0.5]));
    }
}
