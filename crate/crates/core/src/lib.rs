//! Numerical toolkit for controlled sweeping processes over a moving
//! polyhedron `C + u(t)`.
//!
//! The crate simulates the perturbed sweeping dynamics, builds discrete
//! approximations of feasible and optimal arcs, solves the resulting finite
//! dimensional control problems and checks discrete Euler-Lagrange conditions
//! through recovered dual certificates.

pub mod approximation;
pub mod calculus;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod example81;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod optimality;
pub mod optimizer;
pub mod path;

pub use error::{Error, Result};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
