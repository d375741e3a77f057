use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{Oracle, OracleKind};
use crate::point::Point;
use crate::problem::SaddleProblem;
use crate::problems::ProblemSpec;
use crate::schedules::{default_stochastic_init, DeltaRule, ScheduleConfig, Sign};
use crate::solvers::{
    Anchor, BetaRule, EtaRule, PopovForm, RecordPolicy, RunOptions, SolverContext, SolverOptions,
    SolverRegistry,
};

/// One experiment: a problem, a list of solver cells and the seeds each cell
/// runs with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub execution: ExecutionSpec,
    #[serde(rename = "solver")]
    pub solvers: Vec<SolverSpec>,
}

/// Missing `alpha0` or `c0` take the defaults
/// `0.675 / (R sqrt(K_bar))` and `1.01 (4/3) e^{pi^2/6} R sqrt(K_bar)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default)]
    pub delta_rule: DeltaRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionSpec {
    pub max_iter: usize,
    /// Stop a cell once `|G(z^k)|^2` reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    pub seeds: Vec<u64>,
    /// Output directory, relative to the config file.
    pub output: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_samples")]
    pub variance_samples: usize,
    /// Keep about this many records per decade past `k = 100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_grid: Option<usize>,
    /// Inclusive `[lo, hi]` window of the rate fit; `[10, last]` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_window: Option<(usize, usize)>,
}

fn one() -> usize {
    1
}

fn default_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub family: String,
    #[serde(default = "fixed_anchor")]
    pub anchor: Anchor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleKind>,
    /// Overrides the oracle's own `K_bar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_bar: Option<f64>,
    /// File-name stem; `family_anchor` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popov_eta: Option<EtaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popov_beta: Option<BetaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popov_form: Option<PopovForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflected_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_gradient: Option<bool>,
}

fn fixed_anchor() -> Anchor {
    Anchor::Fixed
}

impl SolverSpec {
    pub fn new(family: &str, anchor: Anchor) -> Self {
        SolverSpec {
            family: family.to_string(),
            anchor,
            oracle: None,
            k_bar: None,
            label: None,
            popov_eta: None,
            popov_beta: None,
            popov_form: None,
            reflected_eta: None,
            cache_gradient: None,
        }
    }

    pub fn with_oracle(mut self, oracle: OracleKind) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}_{}", self.family, self.anchor))
    }

    fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            cache_gradient: self.cache_gradient.unwrap_or(d.cache_gradient),
            popov_eta: self.popov_eta.unwrap_or(d.popov_eta),
            popov_beta: self.popov_beta.unwrap_or(d.popov_beta),
            popov_form: self.popov_form.unwrap_or(d.popov_form),
            reflected_eta: self.reflected_eta.or(d.reflected_eta),
        }
    }
}

/// A validated config with its problem built and every output path fixed.
#[derive(Clone)]
pub struct Plan {
    pub config: RunConfig,
    pub problem: Arc<dyn SaddleProblem>,
    pub initial: Point,
    pub output: PathBuf,
    pub cells: Vec<CellPlan>,
}

#[derive(Clone)]
pub struct CellPlan {
    /// Position of the solver in the config.
    pub solver: usize,
    pub label: String,
    pub seed: u64,
    pub context: SolverContext,
    pub trace_path: PathBuf,
}

fn field(path: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::config(format!("{path}: {msg}")),
        other => Error::config(format!("{path}: {other}")),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The schedule of solver `i`, before the solver applies its own sign.
    pub fn schedule_for(
        &self,
        i: usize,
        lipschitz: f64,
        oracle: Option<&dyn Oracle>,
    ) -> ScheduleConfig {
        let s = &self.solvers[i];
        let n = self.problem.dims().0 + self.problem.dims().1;
        let k_bar = s
            .k_bar
            .or_else(|| oracle.map(|o| o.theoretical_k_bar(n)))
            .unwrap_or(1.0);
        let (alpha0, c0) = default_stochastic_init(lipschitz, k_bar);
        ScheduleConfig {
            alpha0: self.schedule.alpha0.unwrap_or(alpha0),
            c0: self.schedule.c0.unwrap_or(c0),
            lipschitz,
            k_bar,
            delta_rule: self.schedule.delta_rule,
            gamma_sign: s.anchor.sign().unwrap_or(Sign::Plus),
        }
    }

    pub fn run_options(&self, label: &str) -> RunOptions {
        let e = &self.execution;
        RunOptions {
            max_iter: e.max_iter,
            grad_tol: e.grad_tol.unwrap_or(f64::INFINITY),
            variance_samples: e.variance_samples,
            keep_iterates: false,
            label: Some(label.to_string()),
            record: match e.log_grid {
                Some(per_decade) => RecordPolicy::LogGrid { per_decade },
                None => RecordPolicy::Every,
            },
        }
    }

    /// Checks every field and constructs every solver once, so that a bad
    /// config fails before any file is written. `base` anchors a relative
    /// output path.
    pub fn plan(&self, base: &Path, registry: &SolverRegistry) -> Result<Plan> {
        let e = &self.execution;
        if e.seeds.is_empty() {
            return Err(Error::config("execution.seeds: list is empty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &e.seeds {
            if !seen.insert(s) {
                return Err(Error::config(format!(
                    "execution.seeds: duplicate seed {s}"
                )));
            }
        }
        if e.max_iter == 0 {
            return Err(Error::config("execution.max_iter: must be >= 1"));
        }
        if e.workers == 0 {
            return Err(Error::config("execution.workers: must be >= 1"));
        }
        if e.variance_samples < 2 {
            return Err(Error::config("execution.variance_samples: must be >= 2"));
        }
        if let Some(t) = e.grad_tol {
            if t.is_nan() || t < 0.0 {
                return Err(Error::config(format!(
                    "execution.grad_tol: must be >= 0, got {t}"
                )));
            }
        }
        if e.log_grid == Some(0) {
            return Err(Error::config("execution.log_grid: must be >= 1"));
        }
        if let Some((lo, hi)) = e.rate_window {
            if lo < 1 || hi <= lo {
                return Err(Error::config("execution.rate_window: needs 1 <= lo < hi"));
            }
        }
        if e.output.as_os_str().is_empty() {
            return Err(Error::config("execution.output: empty path"));
        }
        if self.solvers.is_empty() {
            return Err(Error::config(
                "solver: at least one [[solver]] table is required",
            ));
        }
        let problem = self.problem.build().map_err(|err| field("problem", err))?;
        let initial = self
            .problem
            .default_initial()
            .map_err(|err| field("problem", err))?;
        let lipschitz = problem.lipschitz();
        let output = base.join(&e.output);

        let mut labels = std::collections::BTreeSet::new();
        let mut cells = Vec::new();
        for (i, s) in self.solvers.iter().enumerate() {
            let at = format!("solver[{i}]");
            let label = s.label();
            if label.is_empty()
                || !label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
            {
                return Err(Error::config(format!(
                    "{at}.label: {label:?} must be nonempty and use only [A-Za-z0-9_.-]"
                )));
            }
            if !labels.insert(label.clone()) {
                return Err(Error::config(format!(
                    "{at}.label: duplicate label {label:?}"
                )));
            }
            if !registry.contains(&s.family) {
                return Err(Error::config(format!(
                    "{at}.family: unknown family {:?}; known: {}",
                    s.family,
                    registry.names().join(", ")
                )));
            }
            if let Some(k) = s.k_bar {
                if !(k.is_finite() && k >= 1.0) {
                    return Err(Error::config(format!("{at}.k_bar: must be >= 1, got {k}")));
                }
            }
            let oracle: Option<Arc<dyn Oracle>> = match s.oracle {
                Some(kind) => Some(Arc::from(
                    kind.build()
                        .map_err(|err| field(&format!("{at}.oracle"), err))?,
                )),
                None if s.family == "eag_stochastic" => {
                    return Err(Error::config(format!(
                        "{at}.oracle: eag_stochastic needs an oracle"
                    )))
                }
                None => None,
            };
            if oracle.is_some() && s.family != "eag_stochastic" {
                return Err(Error::config(format!(
                    "{at}.oracle: family {} is deterministic",
                    s.family
                )));
            }
            let schedule = self.schedule_for(i, lipschitz, oracle.as_deref());
            for &seed in &e.seeds {
                let mut context = SolverContext::new(problem.clone(), initial.clone(), schedule)
                    .with_anchor(s.anchor)
                    .with_seed(seed)
                    .with_options(s.options());
                if let Some(o) = &oracle {
                    context = context.with_oracle(o.clone());
                }
                cells.push(CellPlan {
                    solver: i,
                    label: label.clone(),
                    seed,
                    context,
                    trace_path: output
                        .join("traces")
                        .join(format!("{label}_seed{seed}.csv")),
                });
            }
            // Constructing once surfaces schedule and anchor errors early.
            registry
                .create(&s.family, &cells.last().expect("seeds nonempty").context)
                .map_err(|err| field(&at, err))?;
        }
        Ok(Plan {
            config: self.clone(),
            problem,
            initial,
            output,
            cells,
        })
    }
}
