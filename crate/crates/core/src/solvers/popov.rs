use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::{eval_operator, SaddleProblem};
use crate::schedules::{advance, ScheduleConfig, ScheduleState, Sign};

use super::{Solver, SolverContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopovMode {
    Fixed,
    /// Anchor moves along `G(z^{k+1})`, one extra evaluation per step.
    MovingV1(Sign),
    /// Anchor moves along the already computed `G(z_hat^k)`.
    MovingV2(Sign),
}

impl PopovMode {
    pub fn label(self) -> &'static str {
        match self {
            PopovMode::Fixed => "fixed",
            PopovMode::MovingV1(_) => "v1",
            PopovMode::MovingV2(_) => "v2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EtaRule {
    /// `eta_k = alpha_k / 2`.
    #[default]
    HalfAlpha,
    Constant {
        eta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    /// `beta_k = 1/(k+2)`.
    #[default]
    Harmonic,
    Zero,
}

/// How `z_hat^k` is assembled. Both are algebraically identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PopovForm {
    /// `beta_k z_bar^k + (1 - beta_k) z^k - eta_k G(z_hat^{k-1})`.
    #[default]
    Direct,
    /// The same point with `G(z_hat^{k-1})` eliminated through the previous
    /// update, `r = eta_k / eta_{k-1}`:
    /// `beta_k z_bar^k - r beta_{k-1} z_bar^{k-1} + (1 - beta_k + r) z^k - r (1 - beta_{k-1}) z^{k-1}`.
    /// With `beta = 0` and constant `eta` this is `2 z^k - z^{k-1}`.
    Recurrence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopovState {
    pub k: usize,
    pub z: Point,
    pub z_bar: Point,
    pub z_hat_prev: Point,
    /// `G(z_hat^{k-1})`; absent before the first step.
    pub g_hat_prev: Option<Point>,
    pub z_prev: Option<Point>,
    pub z_bar_prev: Option<Point>,
    pub eta_prev: f64,
    pub beta_prev: f64,
    pub schedule: ScheduleState,
}

/// `beta z_bar + (1 - beta) z`, exactly `z` when `beta = 0`.
fn convex(z: &Point, z_bar: &Point, beta: f64, i: usize) -> f64 {
    if beta == 0.0 {
        z[i]
    } else {
        beta * z_bar[i] + (1.0 - beta) * z[i]
    }
}

/// Anchored Popov (optimistic) scheme. Moving-anchor variants have no
/// convergence proof and are flagged experimental.
pub struct PopovSolver {
    problem: Arc<dyn SaddleProblem>,
    config: ScheduleConfig,
    mode: PopovMode,
    eta_rule: EtaRule,
    beta_rule: BetaRule,
    form: PopovForm,
    initial: Point,
    seed: u64,
    state: PopovState,
    evals: usize,
}

impl PopovSolver {
    pub fn new(ctx: &SolverContext, mode: PopovMode) -> Result<Self> {
        let mut config = ctx.schedule;
        config.gamma_sign = match mode {
            PopovMode::Fixed => Sign::default(),
            PopovMode::MovingV1(s) | PopovMode::MovingV2(s) => s,
        };
        config.validate_deterministic()?;
        if let EtaRule::Constant { eta } = ctx.options.popov_eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::config(format!(
                    "constant eta must be > 0, got {eta}"
                )));
            }
        }
        let z0 = ctx.initial.clone();
        Ok(PopovSolver {
            problem: Arc::clone(&ctx.problem),
            config,
            mode,
            eta_rule: ctx.options.popov_eta,
            beta_rule: ctx.options.popov_beta,
            form: ctx.options.popov_form,
            initial: z0.clone(),
            seed: ctx.seed,
            state: PopovState {
                k: 0,
                z: z0.clone(),
                z_bar: z0.clone(),
                z_hat_prev: z0,
                g_hat_prev: None,
                z_prev: None,
                z_bar_prev: None,
                eta_prev: 0.0,
                beta_prev: 0.0,
                schedule: config.initial_state(),
            },
            evals: 0,
        })
    }

    pub fn state(&self) -> &PopovState {
        &self.state
    }

    pub fn mode(&self) -> PopovMode {
        self.mode
    }

    fn eta(&self) -> f64 {
        match self.eta_rule {
            EtaRule::HalfAlpha => self.state.schedule.alpha / 2.0,
            EtaRule::Constant { eta } => eta,
        }
    }

    fn beta_k(&self) -> f64 {
        match self.beta_rule {
            BetaRule::Harmonic => 1.0 / (self.state.k + 2) as f64,
            BetaRule::Zero => 0.0,
        }
    }

    fn eval(&mut self, z: &Point) -> Result<Point> {
        self.evals += 1;
        eval_operator(self.problem.as_ref(), z)
    }

    fn z_hat(&self, beta: f64, eta: f64, g_prev: &Point) -> Point {
        let s = &self.state;
        let mut out = s.z.zeros_like();
        match (self.form, &s.z_prev, &s.z_bar_prev) {
            (PopovForm::Recurrence, Some(zp), Some(zbp)) => {
                let r = eta / s.eta_prev;
                let c1 = 1.0 - beta + r;
                let c2 = r * (1.0 - s.beta_prev);
                let rb = r * s.beta_prev;
                for i in 0..out.len() {
                    let mut v = c1 * s.z[i] - c2 * zp[i];
                    if beta != 0.0 {
                        v += beta * s.z_bar[i];
                    }
                    if rb != 0.0 {
                        v -= rb * zbp[i];
                    }
                    out[i] = v;
                }
            }
            _ => {
                for i in 0..out.len() {
                    out[i] = convex(&s.z, &s.z_bar, beta, i) - eta * g_prev[i];
                }
            }
        }
        out
    }
}

impl Solver for PopovSolver {
    fn family(&self) -> &'static str {
        match self.mode {
            PopovMode::Fixed => "popov_fixed",
            PopovMode::MovingV1(_) => "popov_v1",
            PopovMode::MovingV2(_) => "popov_v2",
        }
    }

    fn k(&self) -> usize {
        self.state.k
    }

    fn iterate(&self) -> &Point {
        &self.state.z
    }

    fn anchor(&self) -> &Point {
        &self.state.z_bar
    }

    fn initial(&self) -> &Point {
        &self.initial
    }

    fn problem(&self) -> &dyn SaddleProblem {
        self.problem.as_ref()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn half_point(&self) -> Option<&Point> {
        (self.state.k > 0).then_some(&self.state.z_hat_prev)
    }

    fn schedule(&self) -> &ScheduleState {
        &self.state.schedule
    }

    fn step_size(&self) -> f64 {
        self.eta()
    }

    fn beta(&self) -> f64 {
        self.beta_k()
    }

    fn anchor_step(&self) -> f64 {
        match self.mode {
            PopovMode::Fixed => 0.0,
            _ => self.state.schedule.gamma,
        }
    }

    fn eval_count(&self) -> usize {
        self.evals
    }

    fn tracks_lyapunov(&self) -> bool {
        false
    }

    fn experimental(&self) -> bool {
        self.mode != PopovMode::Fixed
    }

    fn mode_label(&self) -> Option<&'static str> {
        Some(self.mode.label())
    }

    fn notes(&self) -> Vec<String> {
        let mut notes = vec!["z_hat^-1 initialized to z^0".to_string()];
        if self.mode != PopovMode::Fixed {
            notes.push("anchor step reuses the EAG gamma_k sequence".to_string());
        }
        notes
    }

    fn step(&mut self) -> Result<()> {
        let beta = self.beta_k();
        let eta = self.eta();
        let g_prev = match self.state.g_hat_prev.take() {
            Some(g) => g,
            None => {
                let z_hat_prev = self.state.z_hat_prev.clone();
                self.eval(&z_hat_prev)?
            }
        };
        let z_hat = self.z_hat(beta, eta, &g_prev);
        let g_hat = self.eval(&z_hat)?;
        let s = &self.state;
        let mut z_next = s.z.zeros_like();
        for i in 0..z_next.len() {
            z_next[i] = convex(&s.z, &s.z_bar, beta, i) - eta * g_hat[i];
        }
        let schedule = advance(&s.schedule, &self.config)?;
        let direction = match self.mode {
            PopovMode::Fixed => None,
            PopovMode::MovingV1(_) => Some(self.eval(&z_next)?),
            PopovMode::MovingV2(_) => Some(g_hat.clone()),
        };
        let s = &self.state;
        let mut z_bar_next = s.z_bar.clone();
        if let Some(d) = direction {
            for i in 0..z_bar_next.len() {
                z_bar_next[i] += schedule.gamma * d[i];
            }
        }
        self.state = PopovState {
            k: s.k + 1,
            z_prev: Some(s.z.clone()),
            z_bar_prev: Some(s.z_bar.clone()),
            z: z_next,
            z_bar: z_bar_next,
            z_hat_prev: z_hat,
            g_hat_prev: Some(g_hat),
            eta_prev: eta,
            beta_prev: beta,
            schedule,
        };
        Ok(())
    }
}

/// `z^{k+1} = z^k - eta G(2 z^k - z^{k-1})`.
pub struct ReflectedSolver {
    problem: Arc<dyn SaddleProblem>,
    initial: Point,
    seed: u64,
    z: Point,
    z_prev: Point,
    reflected: Option<Point>,
    eta: f64,
    k: usize,
    evals: usize,
    schedule: ScheduleState,
}

impl ReflectedSolver {
    /// Bootstraps `z^{-1} = z^0 + eta G(z^0)`, so the first reflected point
    /// is `z^0 - eta G(z^0)`.
    pub fn new(ctx: &SolverContext, eta: f64) -> Result<Self> {
        let g0 = eval_operator(ctx.problem.as_ref(), &ctx.initial)?;
        let mut z_prev = ctx.initial.clone();
        z_prev.axpy(eta, &g0);
        let mut s = Self::from_pair(Arc::clone(&ctx.problem), z_prev, ctx.initial.clone(), eta)?;
        s.evals = 1;
        s.seed = ctx.seed;
        Ok(s)
    }

    /// Starts from an explicit pair `(z^{k-1}, z^k)`, counted as `k = 0`.
    pub fn from_pair(
        problem: Arc<dyn SaddleProblem>,
        z_prev: Point,
        z: Point,
        eta: f64,
    ) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config(format!(
                "reflected eta must be > 0, got {eta}"
            )));
        }
        if !z.same_layout(&z_prev) {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                found: z_prev.len(),
            });
        }
        Ok(ReflectedSolver {
            problem,
            initial: z.clone(),
            seed: 0,
            z,
            z_prev,
            reflected: None,
            eta,
            k: 0,
            evals: 0,
            schedule: ScheduleState {
                k: 0,
                alpha: eta,
                beta: 0.0,
                a: 0.0,
                b: 0.0,
                c: 0.0,
                delta: 0.0,
                gamma: 0.0,
                gamma_tilde: 0.0,
            },
        })
    }

    pub fn previous(&self) -> &Point {
        &self.z_prev
    }
}

impl Solver for ReflectedSolver {
    fn family(&self) -> &'static str {
        "reflected"
    }

    fn k(&self) -> usize {
        self.k
    }

    fn iterate(&self) -> &Point {
        &self.z
    }

    fn anchor(&self) -> &Point {
        &self.initial
    }

    fn initial(&self) -> &Point {
        &self.initial
    }

    fn problem(&self) -> &dyn SaddleProblem {
        self.problem.as_ref()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn half_point(&self) -> Option<&Point> {
        self.reflected.as_ref()
    }

    fn schedule(&self) -> &ScheduleState {
        &self.schedule
    }

    fn anchor_step(&self) -> f64 {
        0.0
    }

    fn eval_count(&self) -> usize {
        self.evals
    }

    fn tracks_lyapunov(&self) -> bool {
        false
    }

    fn mode_label(&self) -> Option<&'static str> {
        Some("reflected")
    }

    fn step(&mut self) -> Result<()> {
        let mut w = self.z.zeros_like();
        for i in 0..w.len() {
            w[i] = 2.0 * self.z[i] - self.z_prev[i];
        }
        let g = eval_operator(self.problem.as_ref(), &w)?;
        self.evals += 1;
        let mut next = self.z.zeros_like();
        for i in 0..next.len() {
            next[i] = self.z[i] - self.eta * g[i];
        }
        self.z_prev = std::mem::replace(&mut self.z, next);
        self.reflected = Some(w);
        self.k += 1;
        self.schedule.k = self.k;
        Ok(())
    }
}
