//! Least-energy solutions of the weighted semilinear problem
//! `-div(grad u / b) = (b / eps^2) (u - q_eps)_+^p` and the steady vortex
//! rings and lake vortices they describe.

pub mod cli;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod model;
pub mod operator;
pub mod solver;

pub use error::{Error, Result};
