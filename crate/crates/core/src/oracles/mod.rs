//! Stochastic estimators `G_theta(z)` of the saddle operator.
//!
//! Every oracle is unbiased, `E[G_theta(z) | z] = G(z)`. They differ in how
//! their variance scales:
//!
//! * `exact`: `G_theta = G`, zero variance.
//! * `coordinate`: `G_i = N e_i e_i^T G`; variance `(N - 1) |G|^2`, so it
//!   decays only as fast as `|G|^2` itself.
//! * `minibatch(b)`: mean of `b` distinct coordinate estimators taken from a
//!   cyclic window starting at the sampled index.
//! * `additive_noise(p, sigma)`: `G + xi` with Rademacher `xi`,
//!   `|xi|^2 = sigma^2 / (k+1)^p` exactly.

mod sampler;

use std::fmt::Debug;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub use sampler::{IndexSampler, StepDraws};

use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::{coordinate_mask, eval_operator, SaddleProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Coordinate,
    Minibatch {
        batch: usize,
    },
    AdditiveNoise {
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

fn default_decay() -> f64 {
    4.0
}

fn default_scale() -> f64 {
    1.0
}

impl OracleKind {
    pub fn build(&self) -> Result<Box<dyn Oracle>> {
        Ok(match *self {
            OracleKind::Exact => Box::new(ExactOracle),
            OracleKind::Coordinate => Box::new(CoordinateOracle),
            OracleKind::Minibatch { batch } => {
                if batch == 0 {
                    return Err(Error::config("minibatch size must be >= 1"));
                }
                Box::new(MinibatchOracle { batch })
            }
            OracleKind::AdditiveNoise { decay, scale } => {
                if !(decay.is_finite() && decay >= 0.0 && scale.is_finite() && scale >= 0.0) {
                    return Err(Error::config(format!(
                        "additive noise needs decay >= 0 and scale >= 0 (got {decay}, {scale})"
                    )));
                }
                Box::new(AdditiveNoiseOracle { decay, scale })
            }
        })
    }

    pub fn label(&self) -> String {
        match *self {
            OracleKind::Exact => "exact".into(),
            OracleKind::Coordinate => "coordinate".into(),
            OracleKind::Minibatch { batch } => format!("minibatch{batch}"),
            OracleKind::AdditiveNoise { decay, scale } => format!("noise_p{decay}_s{scale}"),
        }
    }
}

pub trait Oracle: Send + Sync + Debug {
    fn kind(&self) -> OracleKind;

    /// One draw of `G_theta(z)` at step `k` for the sampled 1-based index `i`.
    /// Oracles that need extra randomness take it from `rng`.
    fn estimate(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        i: usize,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Point>;

    /// `E |G_theta(z) - G(z)|^2` at step `k`. Closed form where one exists,
    /// otherwise a Monte-Carlo mean over `n_samples` fresh draws from `rng`.
    fn variance(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        k: usize,
        n_samples: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64>;

    /// `K_bar_G = N * C_bar_G` implied by the oracle's worst-case condition
    /// number, used when the config gives no override.
    fn theoretical_k_bar(&self, n: usize) -> f64;
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOracle;

impl Oracle for ExactOracle {
    fn kind(&self) -> OracleKind {
        OracleKind::Exact
    }

    fn estimate(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        i: usize,
        _k: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Point> {
        check_index(i, problem.dim())?;
        eval_operator(problem, z)
    }

    fn variance(
        &self,
        _problem: &dyn SaddleProblem,
        _z: &Point,
        _k: usize,
        _n_samples: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<f64> {
        Ok(0.0)
    }

    fn theoretical_k_bar(&self, _n: usize) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoordinateOracle;

impl Oracle for CoordinateOracle {
    fn kind(&self) -> OracleKind {
        OracleKind::Coordinate
    }

    fn estimate(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        i: usize,
        _k: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Point> {
        check_index(i, problem.dim())?;
        Ok(coordinate_mask(&eval_operator(problem, z)?, i))
    }

    /// `(1/N) sum_i |G_i|^2 - |G|^2 = (N - 1) |G|^2`.
    fn variance(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        _k: usize,
        _n_samples: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let g = eval_operator(problem, z)?;
        Ok((problem.dim() as f64 - 1.0) * g.norm_sq())
    }

    fn theoretical_k_bar(&self, n: usize) -> f64 {
        (n * n) as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinibatchOracle {
    batch: usize,
}

impl MinibatchOracle {
    fn window_estimate(&self, g: &Point, i: usize) -> Point {
        let n = g.len();
        let scale = n as f64 / self.batch as f64;
        let mut out = g.zeros_like();
        for j in 0..self.batch {
            let c = (i - 1 + j) % n;
            out[c] = scale * g[c];
        }
        out
    }

    fn check_batch(&self, n: usize) -> Result<()> {
        if self.batch > n {
            return Err(Error::config(format!(
                "minibatch size {} exceeds component count {n}",
                self.batch
            )));
        }
        Ok(())
    }
}

impl Oracle for MinibatchOracle {
    fn kind(&self) -> OracleKind {
        OracleKind::Minibatch { batch: self.batch }
    }

    fn estimate(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        i: usize,
        _k: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Point> {
        self.check_batch(problem.dim())?;
        check_index(i, problem.dim())?;
        let g = eval_operator(problem, z)?;
        if self.batch == g.len() {
            return Ok(g);
        }
        Ok(self.window_estimate(&g, i))
    }

    /// Exact expectation over the `N` windows.
    fn variance(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        _k: usize,
        _n_samples: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<f64> {
        self.check_batch(problem.dim())?;
        let g = eval_operator(problem, z)?;
        let n = g.len();
        if self.batch == n {
            return Ok(0.0);
        }
        let total: f64 = (1..=n)
            .map(|i| self.window_estimate(&g, i).dist_sq(&g))
            .sum();
        Ok(total / n as f64)
    }

    fn theoretical_k_bar(&self, n: usize) -> f64 {
        if self.batch >= n {
            1.0
        } else {
            (n * n) as f64 / self.batch as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdditiveNoiseOracle {
    decay: f64,
    scale: f64,
}

impl AdditiveNoiseOracle {
    /// Per-coordinate magnitude `sigma / ((k+1)^{p/2} sqrt(N))`.
    fn magnitude(&self, k: usize, n: usize) -> f64 {
        self.scale / (((k + 1) as f64).powf(self.decay / 2.0) * (n as f64).sqrt())
    }

    fn noise(&self, k: usize, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        let a = self.magnitude(k, n);
        (0..n)
            .map(|_| if rng.random::<bool>() { a } else { -a })
            .collect()
    }
}

impl Oracle for AdditiveNoiseOracle {
    fn kind(&self) -> OracleKind {
        OracleKind::AdditiveNoise {
            decay: self.decay,
            scale: self.scale,
        }
    }

    fn estimate(
        &self,
        problem: &dyn SaddleProblem,
        z: &Point,
        i: usize,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Point> {
        check_index(i, problem.dim())?;
        let mut g = eval_operator(problem, z)?;
        for (gi, xi) in g
            .as_mut_slice()
            .iter_mut()
            .zip(self.noise(k, problem.dim(), rng))
        {
            *gi += xi;
        }
        Ok(g)
    }

    fn variance(
        &self,
        problem: &dyn SaddleProblem,
        _z: &Point,
        k: usize,
        n_samples: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        if n_samples < 2 {
            return Err(Error::config("variance estimate needs at least 2 samples"));
        }
        let n = problem.dim();
        let total: f64 = (0..n_samples)
            .map(|_| self.noise(k, n, rng).iter().map(|x| x * x).sum::<f64>())
            .sum();
        Ok(total / n_samples as f64)
    }

    fn theoretical_k_bar(&self, _n: usize) -> f64 {
        1.0
    }
}

/// Variance measured at an iterate and at its extrapolation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub k: usize,
    pub var_zk: f64,
    pub var_zk_half: f64,
    pub n_samples: usize,
}

pub fn measure_variance(
    oracle: &dyn Oracle,
    problem: &dyn SaddleProblem,
    z: &Point,
    k: usize,
    n_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if n_samples < 2 {
        return Err(Error::config("variance estimate needs at least 2 samples"));
    }
    oracle.variance(problem, z, k, n_samples, rng)
}

/// `(1/N) sum_i |G_i(z)|^2` by enumerating the coordinate components.
pub fn component_energy(problem: &dyn SaddleProblem, z: &Point) -> Result<f64> {
    let n = problem.dim();
    let mut total = 0.0;
    for i in 1..=n {
        total += crate::problem::eval_component(problem, i, z)?.norm_sq();
    }
    Ok(total / n as f64)
}

/// Lipschitz constants `R_i = N |row_i(M)|` of the coordinate components
/// `G_i(z) = N e_i e_i^T M z` of a linear operator.
pub fn coordinate_component_lipschitz(problem: &dyn SaddleProblem) -> Option<Vec<f64>> {
    let m = problem.linear_map()?;
    let n = problem.dim() as f64;
    Some(
        m.iter()
            .map(|row| n * row.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect(),
    )
}

/// Per-step values of `(C_G(z) - 1) |G(z)|^2`, which equals the oracle
/// variance, together with the constants that make
/// `v_k <= C / (k+1)^4` hold over the whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub var_zk: Vec<f64>,
    pub var_half: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// Log-log growth rate of `v_k (k+1)^4` over the last 90% of the trace.
    pub growth_zk: Option<f64>,
    pub growth_half: Option<f64>,
    pub summable: bool,
}

/// `v_k (k+1)^4` may grow no faster than this power of `k` before the trace
/// is declared not `O(k^-4)`.
pub const GROWTH_TOLERANCE: f64 = 0.5;

pub fn fit_condition_constants(var_zk: &[f64], var_half: &[f64]) -> ConditionReport {
    let scaled = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(k, x)| x * ((k + 1) as f64).powi(4))
            .collect()
    };
    let s1 = scaled(var_zk);
    let s2 = scaled(var_half);
    let max = |s: &[f64]| s.iter().cloned().fold(0.0, f64::max);
    let growth_zk = tail_growth(&s1);
    let growth_half = tail_growth(&s2);
    let ok = |g: Option<f64>| g.is_none_or(|g| g <= GROWTH_TOLERANCE);
    ConditionReport {
        var_zk: var_zk.to_vec(),
        var_half: var_half.to_vec(),
        c1: max(&s1),
        c2: max(&s2),
        growth_zk,
        growth_half,
        summable: ok(growth_zk) && ok(growth_half),
    }
}

fn tail_growth(scaled: &[f64]) -> Option<f64> {
    let len = scaled.len();
    let lo = (len / 10).max(1);
    let pts: Vec<(f64, f64)> = (lo..len)
        .filter(|&k| scaled[k] > 0.0)
        .map(|k| (((k + 1) as f64).ln(), scaled[k].ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    crate::diagnostics::least_squares(&pts).map(|(slope, _, _)| slope)
}

/// Measures the oracle variance along a trajectory of `(z^k, z^{k+1/2})`
/// pairs and fits the summability constants.
pub fn check_condition_numbers(
    oracle: &dyn Oracle,
    problem: &dyn SaddleProblem,
    trajectory: &[(Point, Point)],
    n_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if trajectory.is_empty() {
        return Err(Error::config("condition check needs a nonempty trajectory"));
    }
    let sampler = IndexSampler::new(seed, problem.dim());
    let mut v1 = Vec::with_capacity(trajectory.len());
    let mut v2 = Vec::with_capacity(trajectory.len());
    for (k, (z, zh)) in trajectory.iter().enumerate() {
        let mut rng = sampler.stream(k);
        v1.push(measure_variance(
            oracle, problem, z, k, n_samples, &mut rng,
        )?);
        v2.push(measure_variance(
            oracle, problem, zh, k, n_samples, &mut rng,
        )?);
    }
    Ok(fit_condition_constants(&v1, &v2))
}

/// Writes `k, var_zk, var_zk_half, bound_C1_over_k4` rows.
pub fn write_variance_csv<W: std::io::Write>(report: &ConditionReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "var_zk", "var_zk_half", "bound_C1_over_k4"])
        .map_err(crate::schedules::csv_err)?;
    for (k, v) in report.var_zk.iter().enumerate() {
        let half = report
            .var_half
            .get(k)
            .map(|&x| fmt_f64(x))
            .unwrap_or_default();
        let bound = report.c1 / ((k + 1) as f64).powi(4);
        w.write_record([k.to_string(), fmt_f64(*v), half, fmt_f64(bound)])
            .map_err(crate::schedules::csv_err)?;
    }
    w.flush()?;
    Ok(())
}
