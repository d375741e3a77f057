use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::SaddleProblem;

/// `f(x, y) = eps |x|^2 / 2 + <x, y> - eps |y|^2 / 2` with `x, y` in `R^d`.
///
/// The operator is linear, `G(x, y) = (eps x + y, -x + eps y)`, with
/// Lipschitz constant `sqrt(1 + eps^2)` and the unique saddle point at the
/// origin.
#[derive(Debug, Clone)]
pub struct AlmostBilinear {
    epsilon: f64,
    d: usize,
    origin: Point,
}

impl AlmostBilinear {
    pub fn new(epsilon: f64, d: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::config(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if d == 0 {
            return Err(Error::config("almost-bilinear dimension must be >= 1"));
        }
        Ok(AlmostBilinear {
            epsilon,
            d,
            origin: Point::zeros(d, d),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lipschitz_bound(&self) -> f64 {
        (1.0 + self.epsilon * self.epsilon).sqrt()
    }
}

impl SaddleProblem for AlmostBilinear {
    fn name(&self) -> &str {
        "almost_bilinear"
    }

    fn dim_primal(&self) -> usize {
        self.d
    }

    fn dim_dual(&self) -> usize {
        self.d
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_bound()
    }

    fn solution(&self) -> Option<&Point> {
        Some(&self.origin)
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        let (x, y) = z.split_at(self.d);
        let (gx, gy) = out.split_at_mut(self.d);
        let eps = self.epsilon;
        for i in 0..self.d {
            gx[i] = eps * x[i] + y[i];
            gy[i] = -x[i] + eps * y[i];
        }
    }

    fn objective(&self, z: &[f64]) -> Option<f64> {
        let (x, y) = z.split_at(self.d);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        Some(0.5 * self.epsilon * xx + xy - 0.5 * self.epsilon * yy)
    }

    fn linear_map(&self) -> Option<Vec<Vec<f64>>> {
        let n = 2 * self.d;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..self.d {
            m[i][i] = self.epsilon;
            m[i][self.d + i] = 1.0;
            m[self.d + i][i] = -1.0;
            m[self.d + i][self.d + i] = self.epsilon;
        }
        Some(m)
    }
}
