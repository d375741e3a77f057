use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracles::{IndexSampler, Oracle};
use crate::point::Point;
use crate::problem::{eval_operator, SaddleProblem};
use crate::schedules::{advance, ScheduleConfig, ScheduleState, Sign};

use super::{Solver, SolverContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EagMode {
    Deterministic { sign: Option<Sign>, cache: bool },
    Stochastic { sign: Option<Sign> },
}

impl EagMode {
    pub fn sign(self) -> Option<Sign> {
        match self {
            EagMode::Deterministic { sign, .. } | EagMode::Stochastic { sign } => sign,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EagState {
    pub k: usize,
    pub z: Point,
    pub z_bar: Point,
    /// `z^{k-1/2}` from the step that produced this state.
    pub z_half: Option<Point>,
    pub schedule: ScheduleState,
    /// `G(z^k)`, carried over from the previous anchor step.
    pub last_grad: Option<Point>,
}

impl EagState {
    pub fn initial(z0: Point, schedule: ScheduleState) -> Self {
        EagState {
            k: 0,
            z_bar: z0.clone(),
            z: z0,
            z_half: None,
            schedule,
            last_grad: None,
        }
    }
}

/// `z + beta (z_bar - z) - alpha g`, coordinate by coordinate.
fn extrapolate(z: &Point, z_bar: &Point, beta: f64, alpha: f64, g: &Point) -> Point {
    let mut out = z.zeros_like();
    for i in 0..z.len() {
        out[i] = z[i] + beta * (z_bar[i] - z[i]) - alpha * g[i];
    }
    out
}

fn move_anchor(z_bar: &Point, gamma: f64, g: &Point) -> Point {
    let mut out = z_bar.clone();
    for i in 0..out.len() {
        out[i] += gamma * g[i];
    }
    out
}

/// Extra-anchored gradient with a fixed or moving anchor.
pub struct EagSolver {
    problem: Arc<dyn SaddleProblem>,
    config: ScheduleConfig,
    mode: EagMode,
    oracle: Option<Arc<dyn Oracle>>,
    sampler: Option<IndexSampler>,
    initial: Point,
    seed: u64,
    state: EagState,
    evals: usize,
}

impl EagSolver {
    pub fn deterministic(ctx: &SolverContext, sign: Option<Sign>) -> Result<Self> {
        let mut config = ctx.schedule;
        if config.k_bar != 1.0 {
            return Err(Error::config(format!(
                "deterministic EAG needs k_bar = 1, got {}",
                config.k_bar
            )));
        }
        config.gamma_sign = sign.unwrap_or_default();
        config.validate_deterministic()?;
        let mode = EagMode::Deterministic {
            sign,
            cache: ctx.options.cache_gradient,
        };
        Ok(Self::build(ctx, config, mode, None))
    }

    pub fn stochastic(ctx: &SolverContext) -> Result<Self> {
        let oracle = ctx
            .oracle
            .clone()
            .ok_or_else(|| Error::config("eag_stochastic needs an oracle"))?;
        let sign = ctx.anchor.sign();
        let mut config = ctx.schedule;
        config.gamma_sign = sign.unwrap_or_default();
        config.validate_stochastic()?;
        let mode = EagMode::Stochastic { sign };
        Ok(Self::build(ctx, config, mode, Some(oracle)))
    }

    fn build(
        ctx: &SolverContext,
        config: ScheduleConfig,
        mode: EagMode,
        oracle: Option<Arc<dyn Oracle>>,
    ) -> Self {
        let sampler = oracle
            .as_ref()
            .map(|_| IndexSampler::new(ctx.seed, ctx.problem.dim()));
        EagSolver {
            problem: Arc::clone(&ctx.problem),
            config,
            mode,
            oracle,
            sampler,
            initial: ctx.initial.clone(),
            seed: ctx.seed,
            state: EagState::initial(ctx.initial.clone(), config.initial_state()),
            evals: 0,
        }
    }

    pub fn mode(&self) -> EagMode {
        self.mode
    }

    pub fn state(&self) -> &EagState {
        &self.state
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    fn eval(&mut self, z: &Point) -> Result<Point> {
        self.evals += 1;
        eval_operator(self.problem.as_ref(), z)
    }

    fn step_deterministic(&mut self, sign: Option<Sign>, cache: bool) -> Result<()> {
        let cached = self.state.last_grad.take();
        let s = &self.state;
        let (z, z_bar) = (s.z.clone(), s.z_bar.clone());
        let (alpha, beta) = (s.schedule.alpha, s.schedule.beta);
        let g0 = match cached {
            Some(g) => g,
            None => self.eval(&z)?,
        };
        let z_half = extrapolate(&z, &z_bar, beta, alpha, &g0);
        let g_half = self.eval(&z_half)?;
        let z_next = extrapolate(&z, &z_bar, beta, alpha, &g_half);
        let schedule = advance(&self.state.schedule, &self.config)?;
        let g_next = if cache || sign.is_some() {
            Some(self.eval(&z_next)?)
        } else {
            None
        };
        let z_bar_next = match (sign, &g_next) {
            (Some(_), Some(g)) => move_anchor(&z_bar, schedule.gamma, g),
            _ => z_bar,
        };
        self.state = EagState {
            k: self.state.k + 1,
            z: z_next,
            z_bar: z_bar_next,
            z_half: Some(z_half),
            schedule,
            last_grad: if cache { g_next } else { None },
        };
        Ok(())
    }

    fn step_stochastic(&mut self, sign: Option<Sign>) -> Result<()> {
        let oracle = Arc::clone(self.oracle.as_ref().expect("stochastic mode has an oracle"));
        let sampler = self.sampler.expect("stochastic mode has a sampler");
        let problem = self.problem.as_ref();
        let s = &self.state;
        let draws = sampler.draws(s.k);
        let [i1, i2, i3] = draws.indices;
        let mut rng = draws.rng;
        let (alpha, beta) = (s.schedule.alpha, s.schedule.beta);
        let g0 = oracle.estimate(problem, &s.z, i1, s.k, &mut rng)?;
        let z_half = extrapolate(&s.z, &s.z_bar, beta, alpha, &g0);
        let g_half = oracle.estimate(problem, &z_half, i2, s.k, &mut rng)?;
        let z_next = extrapolate(&s.z, &s.z_bar, beta, alpha, &g_half);
        let g_next = oracle.estimate(problem, &z_next, i3, s.k, &mut rng)?;
        let schedule = advance(&s.schedule, &self.config)?;
        let z_bar_next = match sign {
            Some(_) => move_anchor(&s.z_bar, schedule.gamma_tilde, &g_next),
            None => s.z_bar.clone(),
        };
        self.evals += 3;
        self.state = EagState {
            k: s.k + 1,
            z: z_next,
            z_bar: z_bar_next,
            z_half: Some(z_half),
            schedule,
            last_grad: None,
        };
        Ok(())
    }
}

impl Solver for EagSolver {
    fn family(&self) -> &'static str {
        match self.mode {
            EagMode::Deterministic { sign: None, .. } => "eag_fixed",
            EagMode::Deterministic { .. } => "eag_moving",
            EagMode::Stochastic { .. } => "eag_stochastic",
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

    fn half_point(&self) -> Option<&Point> {
        self.state.z_half.as_ref()
    }

    fn schedule(&self) -> &ScheduleState {
        &self.state.schedule
    }

    fn anchor_step(&self) -> f64 {
        match self.mode {
            EagMode::Deterministic { sign: Some(_), .. } => self.state.schedule.gamma,
            EagMode::Stochastic { sign: Some(_) } => self.state.schedule.gamma_tilde,
            _ => 0.0,
        }
    }

    fn eval_count(&self) -> usize {
        self.evals
    }

    fn oracle(&self) -> Option<&dyn Oracle> {
        self.oracle.as_deref()
    }

    fn problem(&self) -> &dyn SaddleProblem {
        self.problem.as_ref()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn tracks_lyapunov(&self) -> bool {
        true
    }

    fn mode_label(&self) -> Option<&'static str> {
        None
    }

    fn step(&mut self) -> Result<()> {
        match self.mode {
            EagMode::Deterministic { sign, cache } => self.step_deterministic(sign, cache),
            EagMode::Stochastic { sign } => self.step_stochastic(sign),
        }
    }
}
