//! Anchored solver families behind one stepping interface.
//!
//! Every solver is a single-threaded state machine over `(z^k, z_bar^k)`.
//! The [`SolverRegistry`] maps family names to constructors so experiment
//! configs can select an algorithm at runtime.

mod eag;
mod popov;
mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use eag::{EagMode, EagSolver, EagState};
pub use popov::{
    BetaRule, EtaRule, PopovForm, PopovMode, PopovSolver, PopovState, ReflectedSolver,
};
pub use run::{check_iterate, run, RecordPolicy, RunOptions, RunOutput, DIVERGENCE_LIMIT};

use crate::error::{Error, Result};
use crate::oracles::Oracle;
use crate::point::Point;
use crate::problem::SaddleProblem;
use crate::schedules::{ScheduleConfig, ScheduleState, Sign};

/// How the anchor moves between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Fixed,
    Plus,
    Minus,
}

impl Anchor {
    pub fn sign(self) -> Option<Sign> {
        match self {
            Anchor::Fixed => None,
            Anchor::Plus => Some(Sign::Plus),
            Anchor::Minus => Some(Sign::Minus),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Anchor::Fixed => "fixed",
            Anchor::Plus => "plus",
            Anchor::Minus => "minus",
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Knobs that only some families read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Reuse `G(z^{k+1})` as the next step's `G(z^k)` in deterministic EAG.
    pub cache_gradient: bool,
    pub popov_eta: EtaRule,
    pub popov_beta: BetaRule,
    pub popov_form: PopovForm,
    /// Constant step for the reflected-gradient solver; `alpha0 / 2` if unset.
    pub reflected_eta: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            cache_gradient: true,
            popov_eta: EtaRule::HalfAlpha,
            popov_beta: BetaRule::Harmonic,
            popov_form: PopovForm::Direct,
            reflected_eta: None,
        }
    }
}

/// Everything a constructor needs. `schedule.gamma_sign` is overwritten from
/// `anchor` by the families that move their anchor.
#[derive(Clone)]
pub struct SolverContext {
    pub problem: Arc<dyn SaddleProblem>,
    pub initial: Point,
    pub schedule: ScheduleConfig,
    pub anchor: Anchor,
    pub oracle: Option<Arc<dyn Oracle>>,
    pub seed: u64,
    pub options: SolverOptions,
}

impl SolverContext {
    pub fn new(problem: Arc<dyn SaddleProblem>, initial: Point, schedule: ScheduleConfig) -> Self {
        SolverContext {
            problem,
            initial,
            schedule,
            anchor: Anchor::Fixed,
            oracle: None,
            seed: 0,
            options: SolverOptions::default(),
        }
    }

    pub fn with_anchor(mut self, anchor: Anchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn with_oracle(mut self, oracle: Arc<dyn Oracle>) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn check_initial(&self) -> Result<()> {
        let p = &self.problem;
        if self.initial.dim_primal() != p.dim_primal() || self.initial.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: self.initial.len(),
            });
        }
        check_iterate(&self.initial)
            .map_err(|reason| Error::config(format!("initial point: {reason}")))
    }
}

pub trait Solver: Send {
    /// Registry name of the family.
    fn family(&self) -> &'static str;

    fn k(&self) -> usize;

    /// `z^k`.
    fn iterate(&self) -> &Point;

    /// `z_bar^k`.
    fn anchor(&self) -> &Point;

    fn initial(&self) -> &Point;

    fn problem(&self) -> &dyn SaddleProblem;

    /// Seed of the run; also salts the diagnostic variance sampler.
    fn seed(&self) -> u64;

    /// The extrapolation point of the most recent step (`z^{k-1/2}` or
    /// `z_hat^{k-1}`), if a step has been taken.
    fn half_point(&self) -> Option<&Point>;

    fn schedule(&self) -> &ScheduleState;

    /// Step size actually applied in the next step; differs from `alpha_k`
    /// for the Popov family.
    fn step_size(&self) -> f64 {
        self.schedule().alpha
    }

    /// `beta_k` used by the next step.
    fn beta(&self) -> f64 {
        self.schedule().beta
    }

    /// Signed anchor step that produced the current anchor.
    fn anchor_step(&self) -> f64;

    /// Fresh operator (or component) evaluations so far.
    fn eval_count(&self) -> usize;

    fn oracle(&self) -> Option<&dyn Oracle> {
        None
    }

    /// Whether `V_k` is meaningful for this family.
    fn tracks_lyapunov(&self) -> bool;

    /// No convergence theory backs this family; keep it out of bound checks.
    fn experimental(&self) -> bool {
        false
    }

    /// Trace `mode` column value, for families that carry one.
    fn mode_label(&self) -> Option<&'static str> {
        None
    }

    /// Facts about initialization worth recording in trace metadata.
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }

    fn step(&mut self) -> Result<()>;
}

pub type SolverFactory = fn(&SolverContext) -> Result<Box<dyn Solver>>;

/// Name -> constructor table.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    factories: BTreeMap<String, SolverFactory>,
}

pub const FAMILIES: [&str; 7] = [
    "eag_fixed",
    "eag_moving",
    "eag_stochastic",
    "popov_fixed",
    "popov_v1",
    "popov_v2",
    "reflected",
];

fn moving_sign(ctx: &SolverContext, family: &str) -> Result<Sign> {
    ctx.anchor
        .sign()
        .ok_or_else(|| Error::config(format!("{family} needs anchor = \"plus\" or \"minus\"")))
}

fn require_fixed(ctx: &SolverContext, family: &str) -> Result<()> {
    if ctx.anchor != Anchor::Fixed {
        return Err(Error::config(format!(
            "{family} has a fixed anchor, got {}",
            ctx.anchor
        )));
    }
    Ok(())
}

fn eag_fixed(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    require_fixed(ctx, "eag_fixed")?;
    Ok(Box::new(EagSolver::deterministic(ctx, None)?))
}

fn eag_moving(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    let sign = moving_sign(ctx, "eag_moving")?;
    Ok(Box::new(EagSolver::deterministic(ctx, Some(sign))?))
}

fn eag_stochastic(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    Ok(Box::new(EagSolver::stochastic(ctx)?))
}

fn popov_fixed(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    require_fixed(ctx, "popov_fixed")?;
    Ok(Box::new(PopovSolver::new(ctx, PopovMode::Fixed)?))
}

fn popov_v1(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    let sign = moving_sign(ctx, "popov_v1")?;
    Ok(Box::new(PopovSolver::new(ctx, PopovMode::MovingV1(sign))?))
}

fn popov_v2(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    let sign = moving_sign(ctx, "popov_v2")?;
    Ok(Box::new(PopovSolver::new(ctx, PopovMode::MovingV2(sign))?))
}

fn reflected(ctx: &SolverContext) -> Result<Box<dyn Solver>> {
    require_fixed(ctx, "reflected")?;
    let eta = ctx
        .options
        .reflected_eta
        .unwrap_or(ctx.schedule.alpha0 / 2.0);
    Ok(Box::new(ReflectedSolver::new(ctx, eta)?))
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        let builtins: [(&str, SolverFactory); 7] = [
            ("eag_fixed", eag_fixed),
            ("eag_moving", eag_moving),
            ("eag_stochastic", eag_stochastic),
            ("popov_fixed", popov_fixed),
            ("popov_v1", popov_v1),
            ("popov_v2", popov_v2),
            ("reflected", reflected),
        ];
        for (name, f) in builtins {
            r.register(name, f);
        }
        r
    }

    /// Adds or replaces a family.
    pub fn register(&mut self, name: &str, factory: SolverFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, ctx: &SolverContext) -> Result<Box<dyn Solver>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::config(format!(
                "unknown solver family {name:?}; known: {}",
                self.names().join(", ")
            ))
        })?;
        ctx.check_initial()?;
        factory(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::AlmostBilinear;

    fn ctx() -> SolverContext {
        let p = Arc::new(AlmostBilinear::new(0.01, 1).unwrap());
        let sched = ScheduleConfig::recommended(p.lipschitz(), 1.0, Sign::Plus);
        SolverContext::new(p, Point::new(vec![1.0, 1.0], 1).unwrap(), sched)
    }

    #[test]
    fn registry_knows_every_family() {
        let r = SolverRegistry::with_defaults();
        let mut names = r.names();
        names.sort_unstable();
        let mut expected = FAMILIES.to_vec();
        expected.sort_unstable();
        assert_eq!(names, expected);
    }

    #[test]
    fn unknown_family_and_bad_anchor_are_config_errors() {
        let r = SolverRegistry::with_defaults();
        assert!(matches!(r.create("feg", &ctx()), Err(Error::Config(_))));
        assert!(matches!(
            r.create("eag_moving", &ctx()),
            Err(Error::Config(_))
        ));
        let moving = ctx().with_anchor(Anchor::Minus);
        assert!(matches!(
            r.create("eag_fixed", &moving),
            Err(Error::Config(_))
        ));
        assert!(r.create("eag_moving", &moving).is_ok());
    }

    #[test]
    fn custom_family_can_be_registered() {
        let mut r = SolverRegistry::with_defaults();
        r.register("my_eag", eag_fixed);
        assert!(r.create("my_eag", &ctx()).is_ok());
    }

    #[test]
    fn mismatched_initial_point_is_rejected() {
        let mut c = ctx();
        c.initial = Point::new(vec![1.0, 1.0, 1.0], 1).unwrap();
        assert!(matches!(
            SolverRegistry::with_defaults().create("eag_fixed", &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
