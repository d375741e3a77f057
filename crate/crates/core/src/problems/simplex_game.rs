//! Quadratic two-player game over probability simplices,
//! `min_{x in D^n} max_{y in D^m} <Qx, x>/2 + <Kx, y>`.
//!
//! The simplex constraints are handled by a forward-backward residual: the
//! smooth saddle operator is evaluated, a projected step with parameter
//! `lambda` is taken, and the scaled displacement
//! `F(z) = (z - P(z - lambda G(z))) / lambda` is handed to the solvers as their
//! operator. Zeros of `F` are exactly the constrained saddle points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::simplex::project_simplex;
use crate::error::{Error, Result};
use crate::point::{dot, Point};
use crate::problem::SaddleProblem;

pub const DEFAULT_LAMBDA: f64 = 0.01;

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct SimplexGame {
    n: usize,
    m: usize,
    /// n x n, row-major.
    q: Vec<f64>,
    /// m x n, row-major.
    k: Vec<f64>,
    seed: Option<u64>,
    lambda: f64,
    smooth_lipschitz: f64,
}

impl SimplexGame {
    /// Random instance: `A` is `rows x n` standard normal, `Q = A^T A`, and `K`
    /// is `m x n` uniform on `[-1, 1]`. All entries come from one ChaCha8
    /// stream seeded with `seed`, normals first.
    pub fn generate(n: usize, m: usize, rows: usize, seed: u64, lambda: f64) -> Result<Self> {
        if n == 0 || m == 0 || rows == 0 {
            return Err(Error::config("game dimensions n, m and rows must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..rows * n).map(|_| rng.sample(StandardNormal)).collect();
        let k: Vec<f64> = (0..m * n)
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..rows).map(|r| a[r * n + i] * a[r * n + j]).sum();
                q[i * n + j] = s;
                q[j * n + i] = s;
            }
        }
        let mut game = Self::assemble(n, m, q, k, lambda)?;
        game.seed = Some(seed);
        Ok(game)
    }

    /// Instance from explicit `Q` (n x n, symmetric PSD) and `K` (m x n).
    pub fn from_matrices(q: &[Vec<f64>], k: &[Vec<f64>], lambda: f64) -> Result<Self> {
        let n = q.len();
        let m = k.len();
        if n == 0 || m == 0 {
            return Err(Error::config("game matrices must be nonempty"));
        }
        if q.iter().any(|r| r.len() != n) || k.iter().any(|r| r.len() != n) {
            return Err(Error::config("Q must be n x n and K must be m x n"));
        }
        Self::assemble(n, m, q.concat(), k.concat(), lambda)
    }

    fn assemble(n: usize, m: usize, q: Vec<f64>, k: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config(format!("lambda must be > 0, got {lambda}")));
        }
        let mut game = SimplexGame {
            n,
            m,
            q,
            k,
            seed: None,
            lambda,
            smooth_lipschitz: 0.0,
        };
        game.smooth_lipschitz = game.spectral_norm()?;
        Ok(game)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Spectral-norm bound of the smooth part `[[Q, K^T], [-K, 0]]`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.smooth_lipschitz
    }

    /// Uniform mixed strategies for both players.
    pub fn uniform_point(&self) -> Point {
        let x = vec![1.0 / self.n as f64; self.n];
        let y = vec![1.0 / self.m as f64; self.m];
        Point::from_blocks(&x, &y).expect("game blocks are nonempty")
    }

    /// Projection onto the product of simplices, block by block.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let mut out = project_simplex(&z[..self.n]);
        out.extend(project_simplex(&z[self.n..]));
        out
    }

    /// `G(x, y) = (Qx + K^T y, -Kx)`.
    pub fn smooth_operator(&self, z: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let (x, y) = z.split_at(n);
        let (gx, gy) = out.split_at_mut(n);
        for (g, q_row) in gx.iter_mut().zip(self.q.chunks_exact(n)) {
            *g = dot(q_row, x);
        }
        for j in 0..m {
            let row = &self.k[j * n..(j + 1) * n];
            for i in 0..n {
                gx[i] += row[i] * y[j];
            }
            gy[j] = -dot(row, x);
        }
    }

    /// Forward-backward residual `(z - P(z - lambda G(z))) / lambda`.
    pub fn split_step_operator(&self, z: &Point, lambda: f64) -> Point {
        let mut out = z.zeros_like();
        self.split_step_into(z.as_slice(), lambda, out.as_mut_slice());
        out
    }

    fn split_step_into(&self, z: &[f64], lambda: f64, out: &mut [f64]) {
        self.smooth_operator(z, out);
        let shifted: Vec<f64> = z
            .iter()
            .zip(out.iter())
            .map(|(a, g)| a - lambda * g)
            .collect();
        let p = self.project(&shifted);
        for ((o, a), b) in out.iter_mut().zip(z).zip(&p) {
            *o = (a - b) / lambda;
        }
    }

    fn dense_smooth(&self) -> Vec<Vec<f64>> {
        let dim = self.n + self.m;
        let mut rows = vec![vec![0.0; dim]; dim];
        for col in 0..dim {
            let mut e = vec![0.0; dim];
            e[col] = 1.0;
            let mut g = vec![0.0; dim];
            self.smooth_operator(&e, &mut g);
            for (i, v) in g.into_iter().enumerate() {
                rows[i][col] = v;
            }
        }
        rows
    }

    /// Power iteration on `M^T M`, converged to `POWER_TOL` relative on the
    /// Rayleigh quotient.
    fn spectral_norm(&self) -> Result<f64> {
        let m = self.dense_smooth();
        let dim = m.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Vec<f64> = (0..dim).map(|_| 0.5 + rng.random::<f64>()).collect();
        normalize(&mut v);
        let mut prev = 0.0;
        for _ in 0..POWER_MAX_ITER {
            let mv: Vec<f64> = m.iter().map(|r| dot(r, &v)).collect();
            let mut w = vec![0.0; dim];
            for (r, s) in m.iter().zip(&mv) {
                for (wi, ri) in w.iter_mut().zip(r) {
                    *wi += ri * s;
                }
            }
            let rayleigh = dot(&v, &w);
            if rayleigh == 0.0 {
                return Ok(0.0);
            }
            if (rayleigh - prev).abs() <= 1e-4 * POWER_TOL * rayleigh {
                return Ok(rayleigh.sqrt() * (1.0 + POWER_TOL));
            }
            prev = rayleigh;
            v = w;
            normalize(&mut v);
        }
        Err(Error::Estimation(format!(
            "power iteration did not converge in {POWER_MAX_ITER} iterations"
        )))
    }
}

fn normalize(v: &mut [f64]) {
    let s = dot(v, v).sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

impl SaddleProblem for SimplexGame {
    fn name(&self) -> &str {
        "simplex_game"
    }

    fn dim_primal(&self) -> usize {
        self.n
    }

    fn dim_dual(&self) -> usize {
        self.m
    }

    /// Lipschitz constant of the forward-backward residual:
    /// `|F(z1) - F(z2)| <= (1/lambda + 2 L) |z1 - z2|` with `L` the smooth bound.
    fn lipschitz(&self) -> f64 {
        1.0 / self.lambda + 2.0 * self.smooth_lipschitz
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        self.split_step_into(z, self.lambda, out);
    }

    fn objective(&self, z: &[f64]) -> Option<f64> {
        let (x, y) = z.split_at(self.n);
        let n = self.n;
        let quad: f64 = (0..n)
            .map(|i| x[i] * dot(&self.q[i * n..(i + 1) * n], x))
            .sum();
        let bil: f64 = (0..self.m)
            .map(|j| y[j] * dot(&self.k[j * n..(j + 1) * n], x))
            .sum();
        Some(0.5 * quad + bil)
    }

    fn is_monotone(&self) -> bool {
        false
    }
}
