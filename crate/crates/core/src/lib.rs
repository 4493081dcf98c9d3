//! Block successive convex approximation for composite problems
//! `min f(x) + sum_k g_k(x_k)` with a smooth, possibly nonconvex `f` and
//! convex, possibly nonsmooth, block-separable `g_k`.

pub mod applications;
pub mod engine;
pub mod error;
pub mod io;
pub mod line_search;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod surrogates;

pub use error::{Error, Result};
