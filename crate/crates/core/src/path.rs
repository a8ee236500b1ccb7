//! Time-parametrized triples `(x(t), u(t), a(t))`: piecewise-linear node
//! paths and closure-backed smooth paths.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Vector;

/// Which block of the triple is addressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    State,
    Shift,
    Control,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::State, Component::Shift, Component::Control];
}

/// A reference arc on `[0, T]` with right derivatives.
pub trait PathLike: Send + Sync {
    fn horizon(&self) -> f64;
    fn value(&self, c: Component, t: f64) -> Vector;
    /// Right derivative (left derivative at the final time).
    fn velocity(&self, c: Component, t: f64) -> Vector;
    /// `∫_{t0}^{t1} ‖ċ(t)‖² dt`.
    fn velocity_sq_integral(&self, c: Component, t0: f64, t1: f64) -> f64;
    /// `∫_{t0}^{t1} ‖ċ(t)‖ dt`.
    fn speed_integral(&self, c: Component, t0: f64, t1: f64) -> f64;
    /// True when the path is piecewise linear with breakpoints among `times`.
    fn is_piecewise_linear_on(&self, times: &[f64]) -> bool;
}

/// Piecewise-linear path through node values on increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath {
    pub times: Vec<f64>,
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub a: Vec<Vector>,
}

impl ContinuousPath {
    pub fn new(times: Vec<f64>, x: Vec<Vector>, u: Vec<Vector>, a: Vec<Vector>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Dimension("a path needs at least two nodes".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Precondition("path must start at t = 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("path times must be strictly increasing".into()));
        }
        if x.len() != times.len() || u.len() != times.len() || a.len() != times.len() {
            return Err(Error::Dimension("node count differs from time count".into()));
        }
        Ok(Self { times, x, u, a })
    }

    /// Uniform path where every component is constant.
    pub fn constant(horizon: f64, x: Vector, u: Vector, a: Vector) -> Self {
        Self { times: vec![0.0, horizon], x: vec![x.clone(), x], u: vec![u.clone(), u], a: vec![a.clone(), a] }
    }

    pub fn nodes(&self, c: Component) -> &[Vector] {
        match c {
            Component::State => &self.x,
            Component::Shift => &self.u,
            Component::Control => &self.a,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interval index `i` with `times[i] <= t < times[i+1]`, clamped.
    fn interval(&self, t: f64) -> usize {
        let last = self.times.len() - 2;
        match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    fn slope(&self, c: Component, i: usize) -> Vector {
        let nodes = self.nodes(c);
        (&nodes[i + 1] - &nodes[i]) / (self.times[i + 1] - self.times[i])
    }

    fn piecewise_integral(&self, c: Component, t0: f64, t1: f64, g: impl Fn(&Vector) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.times.len() - 1 {
            let lo = self.times[i].max(t0);
            let hi = self.times[i + 1].min(t1);
            if hi > lo {
                total += g(&self.slope(c, i)) * (hi - lo);
            }
        }
        total
    }
}

impl PathLike for ContinuousPath {
    fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty path")
    }

    fn value(&self, c: Component, t: f64) -> Vector {
        let i = self.interval(t);
        let nodes = self.nodes(c);
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        if s == 0.0 {
            return nodes[i].clone();
        }
        if s == 1.0 {
            return nodes[i + 1].clone();
        }
        &nodes[i] * (1.0 - s) + &nodes[i + 1] * s
    }

    fn velocity(&self, c: Component, t: f64) -> Vector {
        self.slope(c, self.interval(t))
    }

    fn velocity_sq_integral(&self, c: Component, t0: f64, t1: f64) -> f64 {
        self.piecewise_integral(c, t0, t1, |s| s.norm_squared())
    }

    fn speed_integral(&self, c: Component, t0: f64, t1: f64) -> f64 {
        self.piecewise_integral(c, t0, t1, |s| s.norm())
    }

    fn is_piecewise_linear_on(&self, times: &[f64]) -> bool {
        let eps = 1e-12 * self.horizon().max(1.0);
        self.times.iter().all(|t| times.iter().any(|s| (s - t).abs() <= eps))
    }
}

type Curve = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// Smooth path given by closures for values and derivatives.
#[derive(Clone)]
pub struct FnPath {
    horizon: f64,
    values: [Curve; 3],
    derivatives: [Curve; 3],
}

impl std::fmt::Debug for FnPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPath").field("horizon", &self.horizon).finish_non_exhaustive()
    }
}

fn slot(c: Component) -> usize {
    match c {
        Component::State => 0,
        Component::Shift => 1,
        Component::Control => 2,
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

impl FnPath {
    /// `values` and `derivatives` are ordered as state, shift, control.
    pub fn new(horizon: f64, values: [Curve; 3], derivatives: [Curve; 3]) -> Self {
        Self { horizon, values, derivatives }
    }

    fn gauss(&self, c: Component, t0: f64, t1: f64, g: impl Fn(&Vector) -> f64) -> f64 {
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t1 + t0);
        GAUSS3.iter().map(|&(s, w)| w * g(&(self.derivatives[slot(c)])(mid + half * s))).sum::<f64>() * half
    }
}

impl PathLike for FnPath {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, c: Component, t: f64) -> Vector {
        (self.values[slot(c)])(t)
    }

    fn velocity(&self, c: Component, t: f64) -> Vector {
        (self.derivatives[slot(c)])(t)
    }

    fn velocity_sq_integral(&self, c: Component, t0: f64, t1: f64) -> f64 {
        self.gauss(c, t0, t1, |v| v.norm_squared())
    }

    fn speed_integral(&self, c: Component, t0: f64, t1: f64) -> f64 {
        self.gauss(c, t0, t1, |v| v.norm())
    }

    fn is_piecewise_linear_on(&self, _times: &[f64]) -> bool {
        false
    }
}
