use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{lyapunov_value, Trace, TraceMeta, TraceRecord};
use crate::error::{Error, Result};
use crate::oracles::measure_variance;
use crate::point::Point;
use crate::problem::eval_operator;

use super::Solver;

/// Any coordinate beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Keeps diagnostic variance draws off the solver's own random streams.
const DIAGNOSTIC_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn check_iterate(z: &Point) -> std::result::Result<(), String> {
    for (i, &v) in z.as_slice().iter().enumerate() {
        if !v.is_finite() {
            return Err(format!("coordinate {i} is {v}"));
        }
        if v.abs() > DIVERGENCE_LIMIT {
            return Err(format!(
                "coordinate {i} = {v:e} exceeds {DIVERGENCE_LIMIT:e}"
            ));
        }
    }
    Ok(())
}

/// Which iterations become trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordPolicy {
    #[default]
    Every,
    /// Every `k <= 100`, then about `per_decade` records per factor of ten.
    /// The last iteration is always kept.
    LogGrid { per_decade: usize },
}

impl RecordPolicy {
    pub fn keeps(self, k: usize) -> bool {
        match self {
            RecordPolicy::Every => true,
            RecordPolicy::LogGrid { .. } if k <= 100 => true,
            RecordPolicy::LogGrid { per_decade } => {
                let bucket = |j: usize| (per_decade as f64 * (j as f64).log10()).floor();
                bucket(k) != bucket(k - 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Iterations `k = 0, ..., max_iter - 1` at most.
    pub max_iter: usize,
    /// Stop once `|G(z^k)|^2 <= grad_tol`; an infinite value never stops.
    pub grad_tol: f64,
    /// Monte-Carlo draws per variance estimate.
    pub variance_samples: usize,
    /// Keep every `z^k` and extrapolation point.
    pub keep_iterates: bool,
    /// Trace label; the family name when unset.
    pub label: Option<String>,
    pub record: RecordPolicy,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_iter: 1000,
            grad_tol: f64::INFINITY,
            variance_samples: 64,
            keep_iterates: false,
            label: None,
            record: RecordPolicy::Every,
        }
    }
}

impl RunOptions {
    pub fn iterations(max_iter: usize) -> Self {
        RunOptions {
            max_iter,
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, grad_tol: f64) -> Self {
        self.grad_tol = grad_tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    /// `z^k` per record when requested.
    pub iterates: Vec<Point>,
    /// Extrapolation point of step `k` per record (one fewer than records).
    pub half_points: Vec<Point>,
    pub final_point: Point,
    pub final_anchor: Point,
    pub reached_tol: bool,
}

/// Steps `solver` until `max_iter` records exist or the squared residual
/// drops below tolerance. The residual, `V_k` and variance probes evaluate
/// the operator outside the solver's evaluation count.
pub fn run(solver: &mut dyn Solver, options: &RunOptions) -> Result<RunOutput> {
    if options.max_iter == 0 {
        return Err(Error::config("max_iter must be >= 1"));
    }
    let problem = solver.problem();
    let solution = problem.solution().cloned();
    let lyapunov = solver.tracks_lyapunov() && solution.is_some();
    let mut notes = solver.notes();
    if lyapunov {
        notes.push("lyapunov uses the problem's canonical solution".into());
    }
    let mut trace = Trace::new(TraceMeta {
        solver: options
            .label
            .clone()
            .unwrap_or_else(|| solver.family().to_string()),
        seed: solver.seed(),
        dim_primal: problem.dim_primal(),
        experimental: solver.experimental(),
        notes,
    });
    let mut diag_rng = ChaCha8Rng::seed_from_u64(solver.seed() ^ DIAGNOSTIC_SALT);
    let mut iterates = Vec::new();
    let mut half_points = Vec::new();
    let z0 = solver.initial().clone();

    loop {
        let k = solver.k();
        let z = solver.iterate();
        let z_bar = solver.anchor();
        if let Err(reason) = check_iterate(z).and_then(|_| check_iterate(z_bar)) {
            return Err(Error::Diverged {
                k,
                reason,
                partial: Box::new(trace),
            });
        }
        let problem = solver.problem();
        let g = eval_operator(problem, z)?;
        let grad_norm_sq = g.norm_sq();
        let done = (grad_norm_sq <= options.grad_tol && options.grad_tol.is_finite())
            || k + 1 == options.max_iter;
        let keep = done || options.record.keeps(k);
        let sched = solver.schedule();
        let var_zk = match solver.oracle() {
            Some(o) if keep => {
                diag_rng.set_stream(k as u64);
                Some(measure_variance(
                    o,
                    problem,
                    z,
                    k,
                    options.variance_samples,
                    &mut diag_rng,
                )?)
            }
            _ => None,
        };
        if keep {
            trace.records.push(TraceRecord {
                k,
                grad_norm_sq,
                lyapunov: solution
                    .as_ref()
                    .filter(|_| lyapunov)
                    .map(|zs| lyapunov_value(sched.a, sched.b, sched.c, &g, z, z_bar, zs)),
                anchor: z_bar.clone(),
                anchor_dist: z_bar.dist_sq(&z0).sqrt(),
                alpha: sched.alpha,
                beta: solver.beta(),
                c: sched.c,
                gamma: solver.anchor_step(),
                var_zk,
                var_half: None,
                eval_count: solver.eval_count(),
                mode: solver.mode_label().map(String::from),
            });
        }
        if options.keep_iterates {
            iterates.push(z.clone());
        }
        if done {
            let reached_tol = grad_norm_sq <= options.grad_tol;
            return Ok(RunOutput {
                trace,
                iterates,
                half_points,
                final_point: solver.iterate().clone(),
                final_anchor: solver.anchor().clone(),
                reached_tol,
            });
        }
        match solver.step() {
            Ok(()) => {}
            Err(Error::NonFinite { context }) => {
                return Err(Error::Diverged {
                    k: k + 1,
                    reason: format!("non-finite value in {context}"),
                    partial: Box::new(trace),
                })
            }
            Err(e) => return Err(e),
        }
        let half = solver.half_point().cloned();
        if let (true, Some(o), Some(zh)) = (keep, solver.oracle(), &half) {
            if let Err(reason) = check_iterate(zh) {
                return Err(Error::Diverged {
                    k: k + 1,
                    reason,
                    partial: Box::new(trace),
                });
            }
            let v = measure_variance(
                o,
                solver.problem(),
                zh,
                k,
                options.variance_samples,
                &mut diag_rng,
            )?;
            trace.records.last_mut().expect("record pushed").var_half = Some(v);
        }
        if options.keep_iterates {
            if let Some(zh) = half {
                half_points.push(zh);
            }
        }
    }
}
