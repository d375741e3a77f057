//! Coefficient sequences shared by the anchored solvers.
//!
//! With `beta_k = 1/(k+2)` the coupled sequences are
//!
//! ```text
//! alpha_{k+1} = alpha_k (1 - (alpha_k R)^2 / ((k+1)(k+3)(1 - (alpha_k R)^2)))
//! B_k         = k + 1
//! A_k         = alpha_k (k+1)(k+2) / 2
//! c_{k+1}     = c_k / (1 + delta_k)
//! gamma_{k+1} = +- B_{k+1} / (c_{k+1} K (1 + 1/delta_k))
//! ```
//!
//! where `K = 1` gives the deterministic anchor step size and `K = K_bar`
//! the stochastic one. Neither `alpha_inf` nor `c_inf` has a closed form, so
//! [`limit_bounds`] returns certified lower bounds for both.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Summable sequence `delta_k`, chosen so that `sum log(1 + delta_k) < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DeltaRule {
    /// `delta_k = 1/(k+1)^2`.
    #[default]
    InverseSquare,
    /// `delta_k = ratio^k`, `0 < ratio < 1`.
    Geometric { ratio: f64 },
}

impl DeltaRule {
    pub fn delta(&self, k: usize) -> f64 {
        match *self {
            DeltaRule::InverseSquare => {
                let j = (k + 1) as f64;
                1.0 / (j * j)
            }
            DeltaRule::Geometric { ratio } => ratio.powi(k as i32),
        }
    }

    /// Upper bound on `sum_{j >= k} delta_j`.
    pub fn tail_bound(&self, k: usize) -> f64 {
        match *self {
            DeltaRule::InverseSquare if k == 0 => PI * PI / 6.0,
            DeltaRule::InverseSquare => 1.0 / k as f64,
            DeltaRule::Geometric { ratio } => ratio.powi(k as i32) / (1.0 - ratio),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DeltaRule::Geometric { ratio } if !(ratio > 0.0 && ratio < 1.0) => Err(Error::config(
                format!("geometric delta ratio must lie in (0, 1), got {ratio}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Direction of the anchor step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub alpha0: f64,
    pub c0: f64,
    pub lipschitz: f64,
    /// `K_bar_G`; 1 for deterministic runs.
    pub k_bar: f64,
    pub delta_rule: DeltaRule,
    pub gamma_sign: Sign,
}

impl ScheduleConfig {
    /// Initialization constants used for the stochastic experiments:
    /// `alpha0 = 0.9 (3/4) / (R sqrt(K))`, `c0 = 1.01 (4/3) e^{pi^2/6} R sqrt(K)`.
    pub fn recommended(lipschitz: f64, k_bar: f64, gamma_sign: Sign) -> Self {
        let (alpha0, c0) = default_stochastic_init(lipschitz, k_bar);
        ScheduleConfig {
            alpha0,
            c0,
            lipschitz,
            k_bar,
            delta_rule: DeltaRule::InverseSquare,
            gamma_sign,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.lipschitz.is_finite() && self.lipschitz > 0.0) {
            return Err(Error::config(format!(
                "lipschitz must be > 0, got {}",
                self.lipschitz
            )));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::config(format!("c0 must be > 0, got {}", self.c0)));
        }
        if !(self.k_bar.is_finite() && self.k_bar >= 1.0) {
            return Err(Error::config(format!(
                "k_bar must be >= 1, got {}",
                self.k_bar
            )));
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return Err(Error::config(format!(
                "alpha0 must be > 0, got {}",
                self.alpha0
            )));
        }
        self.delta_rule.validate()
    }

    /// `0 < alpha0 < 3 / (4R)`.
    pub fn validate_deterministic(&self) -> Result<()> {
        self.validate_common()?;
        let bound = deterministic_alpha_bound(self.lipschitz);
        if self.alpha0 >= bound {
            return Err(Error::config(format!(
                "alpha0 = {} must be below 3/(4R) = {bound}",
                self.alpha0
            )));
        }
        Ok(())
    }

    /// `0 < alpha0 < min(3 / (4 R sqrt(K_bar)), 1 / (sqrt(2) R))`.
    pub fn validate_stochastic(&self) -> Result<()> {
        self.validate_common()?;
        let bound = stochastic_alpha_bound(self.lipschitz, self.k_bar);
        if self.alpha0 >= bound {
            return Err(Error::config(format!(
                "alpha0 = {} must be below min(3/(4R sqrt(K)), 1/(sqrt(2) R)) = {bound}",
                self.alpha0
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> ScheduleState {
        ScheduleState {
            k: 0,
            alpha: self.alpha0,
            beta: 0.5,
            a: self.alpha0,
            b: 1.0,
            c: self.c0,
            delta: self.delta_rule.delta(0),
            gamma: 0.0,
            gamma_tilde: 0.0,
        }
    }
}

pub fn deterministic_alpha_bound(lipschitz: f64) -> f64 {
    3.0 / (4.0 * lipschitz)
}

pub fn stochastic_alpha_bound(lipschitz: f64, k_bar: f64) -> f64 {
    (3.0 / (4.0 * lipschitz * k_bar.sqrt())).min(1.0 / (2f64.sqrt() * lipschitz))
}

/// Snapshot of every coefficient at iteration `k`. `gamma` and `gamma_tilde`
/// are the signed anchor step sizes used to produce this state's anchor (zero
/// at `k = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub gamma: f64,
    pub gamma_tilde: f64,
}

pub fn alpha_next(alpha: f64, k: usize, lipschitz: f64) -> Result<f64> {
    let ar = alpha * lipschitz;
    if !(ar > 0.0 && ar < 1.0) {
        return Err(Error::ScheduleDivergence { product: ar });
    }
    let ar2 = ar * ar;
    let kk = ((k + 1) * (k + 3)) as f64;
    Ok(alpha * (1.0 - ar2 / ((1.0 - ar2) * kk)))
}

/// `sign * B_{k+1} / (c_{k+1} K_bar (1 + 1/delta_k))`.
pub fn gamma_next(b_next: f64, c_next: f64, delta_k: f64, k_bar: f64, sign: f64) -> f64 {
    sign * b_next / (c_next * k_bar * (1.0 + 1.0 / delta_k))
}

/// Moves every coefficient from `k` to `k + 1` in the fixed order
/// delta -> c -> B -> gamma -> alpha -> A.
pub fn advance(state: &ScheduleState, config: &ScheduleConfig) -> Result<ScheduleState> {
    let k = state.k;
    let delta = state.delta;
    let c = state.c / (1.0 + delta);
    let b = (k + 2) as f64;
    let sign = config.gamma_sign.value();
    let gamma = gamma_next(b, c, delta, 1.0, sign);
    let gamma_tilde = gamma_next(b, c, delta, config.k_bar, sign);
    let alpha = alpha_next(state.alpha, k, config.lipschitz)?;
    let a = alpha * ((k + 2) * (k + 3)) as f64 / 2.0;
    Ok(ScheduleState {
        k: k + 1,
        alpha,
        beta: 1.0 / (k + 3) as f64,
        a,
        b,
        c,
        delta: config.delta_rule.delta(k + 1),
        gamma,
        gamma_tilde,
    })
}

/// Returns `(alpha0, c0)` for Lipschitz constant `R` and bound `K_bar`.
pub fn default_stochastic_init(lipschitz: f64, k_bar: f64) -> (f64, f64) {
    let sk = k_bar.sqrt();
    let alpha0 = 0.9 * (3.0 / 4.0) * (1.0 / lipschitz) * (1.0 / sk);
    let c0 = 1.01 * (4.0 / 3.0) * (PI * PI / 6.0).exp() * lipschitz * sk;
    (alpha0, c0)
}

/// `eta = (1/2)(1/(N+1) + 1/(N+2)) rho^2 / (1 - rho^2)` with `rho = alpha_N R`.
///
/// When `eta < 1`, every later term satisfies `alpha_{N+j} >= (1 - eta) alpha_N`.
pub fn eta_bound(alpha_n: f64, n: usize, lipschitz: f64) -> f64 {
    let rho = alpha_n * lipschitz;
    let nn = n as f64;
    0.5 * (1.0 / (nn + 1.0) + 1.0 / (nn + 2.0)) * rho * rho / (1.0 - rho * rho)
}

/// Lower bound on `alpha_inf`: the best `(1 - eta_N) alpha_N` over `N <= horizon`.
pub fn alpha_limit_lower_bound(alpha0: f64, lipschitz: f64, horizon: usize) -> Result<f64> {
    let mut alpha = alpha0;
    let mut best = 0.0f64;
    for n in 0..=horizon {
        let eta = eta_bound(alpha, n, lipschitz);
        if eta < 1.0 {
            best = best.max((1.0 - eta) * alpha);
        }
        alpha = alpha_next(alpha, n, lipschitz)?;
    }
    if best <= 0.0 {
        return Err(Error::Estimation(format!(
            "no certified lower bound for alpha_inf from alpha0 = {alpha0}"
        )));
    }
    // Slack for the rounding accumulated over `horizon` recurrence steps.
    Ok(best * (1.0 - 1e-12))
}

/// Lower bound on `c_inf = c_H prod_{j >= H} 1/(1 + delta_j) >= c_H exp(-sum_{j>=H} delta_j)`.
pub fn c_limit_lower_bound(c0: f64, rule: DeltaRule, horizon: usize) -> f64 {
    let mut c = c0;
    for k in 0..horizon {
        c /= 1.0 + rule.delta(k);
    }
    c * (-rule.tail_bound(horizon)).exp() * (1.0 - 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitBounds {
    pub alpha_inf_lb: f64,
    pub c_inf_lb: f64,
}

impl LimitBounds {
    /// Whether `c_inf alpha_inf >= 1` is certified by the lower bounds.
    pub fn rate_precondition_met(&self) -> bool {
        self.alpha_inf_lb * self.c_inf_lb >= 1.0
    }
}

pub const LIMIT_HORIZON: usize = 10_000;

pub fn limit_bounds(config: &ScheduleConfig) -> Result<LimitBounds> {
    Ok(LimitBounds {
        alpha_inf_lb: alpha_limit_lower_bound(config.alpha0, config.lipschitz, LIMIT_HORIZON)?,
        c_inf_lb: c_limit_lower_bound(config.c0, config.delta_rule, LIMIT_HORIZON),
    })
}

/// Writes `count` schedule states starting from the initial one as CSV.
pub fn write_schedule_csv<W: Write>(config: &ScheduleConfig, count: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = [
        "k",
        "alpha_k",
        "beta_k",
        "A_k",
        "B_k",
        "c_k",
        "delta_k",
        "gamma_k",
        "gamma_tilde_k",
    ];
    w.write_record(header).map_err(csv_err)?;
    let mut s = config.initial_state();
    for i in 0..count {
        w.write_record([
            s.k.to_string(),
            s.alpha.to_string(),
            s.beta.to_string(),
            s.a.to_string(),
            s.b.to_string(),
            s.c.to_string(),
            s.delta.to_string(),
            s.gamma.to_string(),
            s.gamma_tilde.to_string(),
        ])
        .map_err(csv_err)?;
        if i + 1 < count {
            s = advance(&s, config)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
