//! Finite-difference solver and free-boundary measurements for the obstacle problem
//! `u ≥ 0`, `div(a(x, ∇u)) = f` on `{u > 0}`, with `a(x, η) = M(x)(κ + |η|²)^{(p(x)-2)/2} η`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod fields;
pub mod freeboundary;
pub mod io;
pub mod operator;
pub mod oracles;
pub mod solver;

pub use error::{Error, Result};
