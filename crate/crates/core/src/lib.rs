//! Anchored extragradient (EAG-V) and Popov saddle-point solvers with fixed
//! and moving anchors, stochastic oracles, and Lyapunov-based diagnostics.
//!
//! For a convex-concave `f(x, y)` the solvers drive the squared residual
//! `|G(z^k)|^2` of the saddle operator `G = (grad_x f, -grad_y f)` to zero
//! at the rate `O(1/k^2)`.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod oracles;
pub mod point;
pub mod problem;
pub mod problems;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};
pub use point::{operator_norm_sq, Point};
pub use problem::{eval_component, eval_operator, SaddleProblem};
