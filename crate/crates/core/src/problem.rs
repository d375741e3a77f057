//! The saddle-operator abstraction consumed by every solver.
//!
//! For a saddle function `f(x, y)` the saddle operator is
//! `G(z) = (grad_x f(x, y), -grad_y f(x, y))`. Zeros of `G` are saddle
//! points, and `G` is monotone whenever `f` is convex-concave.

use crate::error::{Error, Result};
use crate::point::Point;

pub trait SaddleProblem: Send + Sync {
    fn name(&self) -> &str;

    fn dim_primal(&self) -> usize;

    fn dim_dual(&self) -> usize;

    /// Number of operator components, `N = n + m`.
    fn dim(&self) -> usize {
        self.dim_primal() + self.dim_dual()
    }

    /// Lipschitz constant `R` of the operator returned by [`apply`](Self::apply).
    fn lipschitz(&self) -> f64;

    /// Known saddle point, used only by diagnostics.
    fn solution(&self) -> Option<&Point> {
        None
    }

    /// Writes `G(z)` into `out`. Both slices have length `dim()`.
    fn apply(&self, z: &[f64], out: &mut [f64]);

    /// The saddle function itself, when the operator is derived from one.
    fn objective(&self, _z: &[f64]) -> Option<f64> {
        None
    }

    /// Dense row-major matrix `M` with `G(z) = M z`, for linear operators.
    fn linear_map(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Whether `G` is monotone on the whole space.
    fn is_monotone(&self) -> bool {
        true
    }
}

fn check_point(problem: &dyn SaddleProblem, z: &Point) -> Result<()> {
    if z.dim_primal() != problem.dim_primal() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim_primal(),
            found: z.dim_primal(),
        });
    }
    if z.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: z.len(),
        });
    }
    if !z.is_finite() {
        return Err(Error::NonFinite {
            context: "operator argument",
        });
    }
    Ok(())
}

/// Evaluates the full saddle operator `G(z)`.
pub fn eval_operator(problem: &dyn SaddleProblem, z: &Point) -> Result<Point> {
    check_point(problem, z)?;
    let mut out = z.zeros_like();
    problem.apply(z.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Evaluates the coordinate component `G_i(z) = N * e_i e_i^T G(z)` for a
/// 1-based index `i`. Averaging over all `i` recovers `G(z)`.
pub fn eval_component(problem: &dyn SaddleProblem, i: usize, z: &Point) -> Result<Point> {
    let n = problem.dim();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let g = eval_operator(problem, z)?;
    Ok(coordinate_mask(&g, i))
}

/// `N * e_i e_i^T g` for a 1-based index.
pub(crate) fn coordinate_mask(g: &Point, i: usize) -> Point {
    let mut out = g.zeros_like();
    out[i - 1] = g.len() as f64 * g[i - 1];
    out
}
