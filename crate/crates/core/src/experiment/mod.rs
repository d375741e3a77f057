//! Config-driven experiment grids: one trace per (solver, seed) cell, a
//! summary table, and a verification pass over stored traces.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! traces/<label>_seed<seed>.csv
//! summary.csv   solver, seed, final_grad_sq, iters_to_tol, slope, violations
//! medians.csv   solver, k, median_grad_sq, seeds   (decade checkpoints)
//! plot.py       matplotlib stub reading medians.csv
//! ```

mod config;
mod presets;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{CellPlan, ExecutionSpec, Plan, RunConfig, ScheduleSpec, SolverSpec};
pub use presets::{preset, PRESETS};

use crate::diagnostics::{
    check_descent, check_theorem_bound, fit_rate, fmt_f64, median, variance_sums, BoundInputs,
    DescentMode, DescentReport, Trace,
};
use crate::error::{Error, Result};
use crate::oracles::fit_condition_constants;
use crate::schedules::{limit_bounds, ScheduleConfig};
use crate::solvers::{run, Anchor, SolverRegistry};

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub solver: String,
    pub seed: u64,
    pub final_grad_sq: f64,
    pub iters_to_tol: Option<usize>,
    pub slope: Option<f64>,
    /// Strict Lyapunov descent violations, for deterministic EAG only.
    pub violations: Option<usize>,
    /// Divergence reason; the trace on disk is partial.
    pub diverged: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: PathBuf,
    pub cells: Vec<CellSummary>,
}

impl RunReport {
    pub fn diverged(&self) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(|c| c.diverged.is_some())
    }
}

fn strict_family(family: &str) -> bool {
    matches!(family, "eag_fixed" | "eag_moving")
}

fn rate_window(config: &RunConfig, trace: &Trace) -> Option<(usize, usize)> {
    let last = trace.last()?.k;
    match config.execution.rate_window {
        Some(w) => Some(w),
        None if last > 10 => Some((10, last)),
        None => None,
    }
}

fn summarize(
    config: &RunConfig,
    family: &str,
    trace: &Trace,
    diverged: Option<String>,
) -> CellSummary {
    let slope = rate_window(config, trace)
        .and_then(|w| fit_rate(trace, w).ok())
        .map(|f| f.slope);
    let violations = if strict_family(family) {
        match check_descent(&[trace], DescentMode::Strict) {
            DescentReport::Checked { violations, .. } => Some(violations.len()),
            DescentReport::NotCheckable(_) => None,
        }
    } else {
        None
    };
    CellSummary {
        solver: trace.meta.solver.clone(),
        seed: trace.meta.seed,
        final_grad_sq: trace.last().map_or(f64::NAN, |r| r.grad_norm_sq),
        iters_to_tol: config
            .execution
            .grad_tol
            .and_then(|t| trace.iters_to_tol(t)),
        slope,
        violations,
        diverged,
    }
}

fn run_cell(plan: &Plan, cell: &CellPlan, registry: &SolverRegistry) -> Result<CellSummary> {
    let spec = &plan.config.solvers[cell.solver];
    let mut solver = registry.create(&spec.family, &cell.context)?;
    let options = plan.config.run_options(&cell.label);
    let (trace, diverged) = match run(solver.as_mut(), &options) {
        Ok(out) => (out.trace, None),
        Err(Error::Diverged { k, reason, partial }) => {
            (*partial, Some(format!("k = {k}: {reason}")))
        }
        Err(e) => return Err(e),
    };
    trace.save(&cell.trace_path)?;
    Ok(summarize(&plan.config, &spec.family, &trace, diverged))
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_summary(path: &Path, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(crate::schedules::csv_err)?;
    w.write_record([
        "solver",
        "seed",
        "final_grad_sq",
        "iters_to_tol",
        "slope",
        "violations",
    ])
    .map_err(crate::schedules::csv_err)?;
    for c in cells {
        w.write_record([
            c.solver.clone(),
            c.seed.to_string(),
            fmt_f64(c.final_grad_sq),
            opt(c.iters_to_tol),
            c.slope.map(fmt_f64).unwrap_or_default(),
            opt(c.violations),
        ])
        .map_err(crate::schedules::csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `k = 0, 1, 10, 100, ...` up to `max_k`.
pub fn decade_checkpoints(max_k: usize) -> Vec<usize> {
    let mut ks = vec![0];
    let mut k = 1;
    while k <= max_k {
        ks.push(k);
        k = k.saturating_mul(10);
    }
    ks
}

/// Median `|G(z^k)|^2` over seeds at each decade checkpoint, per solver.
/// Seeds whose trace lacks `k` are left out of that median.
pub fn checkpoint_medians(
    traces: &[(String, Vec<Trace>)],
    max_k: usize,
) -> Vec<(String, usize, f64, usize)> {
    let mut rows = Vec::new();
    for (label, group) in traces {
        let lookup: Vec<BTreeMap<usize, f64>> = group
            .iter()
            .map(|t| t.records.iter().map(|r| (r.k, r.grad_norm_sq)).collect())
            .collect();
        for k in decade_checkpoints(max_k) {
            let vals: Vec<f64> = lookup.iter().filter_map(|m| m.get(&k).copied()).collect();
            if !vals.is_empty() {
                rows.push((label.clone(), k, median(&vals), vals.len()));
            }
        }
    }
    rows
}

fn write_medians(path: &Path, rows: &[(String, usize, f64, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(crate::schedules::csv_err)?;
    w.write_record(["solver", "k", "median_grad_sq", "seeds"])
        .map_err(crate::schedules::csv_err)?;
    for (label, k, m, n) in rows {
        w.write_record([label.clone(), k.to_string(), fmt_f64(*m), n.to_string()])
            .map_err(crate::schedules::csv_err)?;
    }
    w.flush()?;
    Ok(())
}

const PLOT_STUB: &str = r#"# Plots median squared residual against iteration from medians.csv.
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

rows = defaultdict(list)
with open("medians.csv") as f:
    for r in csv.DictReader(f):
        k = int(r["k"])
        if k > 0:
            rows[r["solver"]].append((k, float(r["median_grad_sq"])))

for label, pts in sorted(rows.items()):
    ks, gs = zip(*pts)
    plt.loglog(ks, gs, marker="o", label=label)
plt.xlabel("iteration k")
plt.ylabel("median |G(z^k)|^2")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "figure.png", dpi=150)
"#;

/// Validates, then runs every cell. Relative output paths resolve against
/// `base`. Divergent cells keep their partial traces and are flagged in the
/// report rather than aborting the grid.
pub fn run_experiment(config: &RunConfig, base: &Path) -> Result<RunReport> {
    let registry = SolverRegistry::with_defaults();
    let plan = config.plan(base, &registry)?;
    fs::create_dir_all(plan.output.join("traces"))?;
    let workers = config.execution.workers;
    let cells: Vec<CellSummary> = if workers == 1 {
        plan.cells
            .iter()
            .map(|c| run_cell(&plan, c, &registry))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::config(format!("execution.workers: {e}")))?;
        pool.install(|| {
            plan.cells
                .par_iter()
                .map(|c| run_cell(&plan, c, &registry))
                .collect::<Result<_>>()
        })?
    };
    write_summary(&plan.output.join("summary.csv"), &cells)?;
    let groups = load_groups(&plan)?;
    let rows = checkpoint_medians(&groups, config.execution.max_iter);
    write_medians(&plan.output.join("medians.csv"), &rows)?;
    fs::write(plan.output.join("plot.py"), PLOT_STUB)?;
    Ok(RunReport {
        output: plan.output,
        cells,
    })
}

/// Reads and runs a config file; outputs land relative to its directory.
pub fn run_config_file(path: &Path) -> Result<RunReport> {
    let config = RunConfig::load(path)?;
    run_experiment(&config, path.parent().unwrap_or(Path::new(".")))
}

fn load_trace(path: &Path) -> Result<Trace> {
    Trace::load(path).map_err(|e| Error::TraceUnavailable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Traces grouped by solver label in config order.
fn load_groups(plan: &Plan) -> Result<Vec<(String, Vec<Trace>)>> {
    let mut groups: Vec<(String, Vec<Trace>)> = Vec::new();
    for cell in &plan.cells {
        let t = load_trace(&cell.trace_path)?;
        match groups.last_mut() {
            Some((label, v)) if *label == cell.label => v.push(t),
            _ => groups.push((cell.label.clone(), vec![t])),
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
    /// Reported for reference; never fails verification.
    Info,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
            CheckStatus::Info => "INFO",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub solver: String,
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn find(&self, solver: &str, name: &str) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| c.solver == solver && c.name == name)
    }

    fn push(&mut self, solver: &str, name: &'static str, status: CheckStatus, detail: String) {
        self.checks.push(Check {
            solver: solver.to_string(),
            name,
            status,
            detail,
        });
    }
}

/// Descent is only guaranteed for fixed and `+gamma` anchors. A `-gamma`
/// anchor adds `2 B_{k+1} |gamma_{k+1}| |G(z^{k+1})|^2` to `V` at each anchor
/// move, so its violations are reported as information, not failures.
fn descent_check(
    family: &str,
    anchor: Anchor,
    traces: &[&Trace],
    lipschitz: f64,
) -> (CheckStatus, String) {
    let mode = match family {
        f if strict_family(f) => DescentMode::Strict,
        "eag_stochastic" => DescentMode::StochasticSlack { lipschitz },
        _ => {
            return (
                CheckStatus::Skipped,
                format!("{family} has no Lyapunov functional"),
            )
        }
    };
    match check_descent(traces, mode) {
        DescentReport::Checked { pairs, violations } if violations.is_empty() => {
            (CheckStatus::Pass, format!("{pairs} pairs, no violations"))
        }
        DescentReport::Checked { pairs, violations } => (
            if anchor == Anchor::Minus {
                CheckStatus::Info
            } else {
                CheckStatus::Fail
            },
            format!(
                "{} of {pairs} pairs violate, first at k = {}{}",
                violations.len(),
                violations[0],
                if anchor == Anchor::Minus {
                    " (-gamma anchor, no descent guarantee)"
                } else {
                    ""
                }
            ),
        ),
        DescentReport::NotCheckable(why) => (CheckStatus::Skipped, why),
    }
}

fn bound_check(
    family: &str,
    moving: bool,
    schedule: &ScheduleConfig,
    plan: &Plan,
    traces: &[&Trace],
) -> Result<(CheckStatus, String)> {
    if !(moving && matches!(family, "eag_moving" | "eag_stochastic")) {
        return Ok((
            CheckStatus::Skipped,
            "bound stated for moving-anchor EAG only".into(),
        ));
    }
    let Some(z_star) = plan.problem.solution() else {
        return Ok((CheckStatus::Skipped, "problem has no known solution".into()));
    };
    let lb = limit_bounds(schedule)?;
    if !lb.rate_precondition_met() {
        return Ok((
            CheckStatus::Skipped,
            format!(
                "precondition unmet, skipped (c_inf alpha_inf >= {:.4} certified, need >= 1)",
                lb.alpha_inf_lb * lb.c_inf_lb
            ),
        ));
    }
    let inputs = BoundInputs {
        alpha_inf_lb: lb.alpha_inf_lb,
        alpha0: schedule.alpha0,
        c0: schedule.c0,
        lipschitz: schedule.lipschitz,
        z0_dist_sq: plan.initial.dist_sq(z_star),
    };
    if family != "eag_stochastic" {
        let (mut failures, mut records) = (0, 0);
        for t in traces {
            let r = check_theorem_bound(t, &inputs, None);
            failures += r.failures().len();
            records += r.within.len();
        }
        let status = if failures == 0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        return Ok((
            status,
            format!("{failures} of {records} records above the bound"),
        ));
    }
    // The stochastic bound holds in expectation and is linear in the variance
    // sum, so seed means are compared against the bound at the mean sum.
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let mut sums = Vec::new();
    for t in traces {
        match variance_sums(t, schedule.lipschitz) {
            Some(s) => sums.push(s),
            None => {
                return Ok((
                    CheckStatus::Skipped,
                    "variance sums need unthinned traces".into(),
                ))
            }
        }
    }
    let n = traces.len() as f64;
    let mut failures = 0;
    for i in 0..len {
        let g = traces
            .iter()
            .map(|t| t.records[i].grad_norm_sq)
            .sum::<f64>()
            / n;
        let extra = sums.iter().map(|s| s[i]).sum::<f64>() / n;
        if g > inputs.bound(traces[0].records[i].k, extra) {
            failures += 1;
        }
    }
    let status = if failures == 0 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok((
        status,
        format!("{failures} of {len} seed-mean records above the bound"),
    ))
}

fn condition_check(traces: &[&Trace]) -> (CheckStatus, String) {
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let mean_at = |k: usize, f: &dyn Fn(&crate::diagnostics::TraceRecord) -> Option<f64>| {
        let vals: Option<Vec<f64>> = traces.iter().map(|t| f(&t.records[k])).collect();
        vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    if traces.iter().any(|t| {
        t.records
            .iter()
            .take(len)
            .enumerate()
            .any(|(i, r)| r.k != i)
    }) {
        return (
            CheckStatus::Skipped,
            "condition fit needs unthinned traces".into(),
        );
    }
    let vz: Option<Vec<f64>> = (0..len).map(|k| mean_at(k, &|r| r.var_zk)).collect();
    let vh: Option<Vec<f64>> = (0..len.saturating_sub(1))
        .map(|k| mean_at(k, &|r| r.var_half))
        .collect();
    let (Some(vz), Some(vh)) = (vz, vh) else {
        return (
            CheckStatus::Skipped,
            "traces carry no variance columns".into(),
        );
    };
    let r = fit_condition_constants(&vz, &vh);
    let growth = |g: Option<f64>| g.map_or("n/a".into(), |g| format!("{g:.3}"));
    let verdict = if r.summable {
        "summable"
    } else {
        "flagged: variance not O(1/k^4)"
    };
    (
        CheckStatus::Info,
        format!(
            "{verdict}; C1 = {:.3e}, C2 = {:.3e}, growth {} / {}",
            r.c1,
            r.c2,
            growth(r.growth_zk),
            growth(r.growth_half)
        ),
    )
}

/// Runs the diagnostics suite over the traces a config produced.
pub fn verify(config: &RunConfig, base: &Path) -> Result<VerifyReport> {
    let registry = SolverRegistry::with_defaults();
    let plan = config.plan(base, &registry)?;
    let groups = load_groups(&plan)?;
    let mut report = VerifyReport::default();
    for (label, traces) in &groups {
        let cell = plan
            .cells
            .iter()
            .find(|c| &c.label == label)
            .expect("group from plan");
        let spec = &config.solvers[cell.solver];
        let refs: Vec<&Trace> = traces.iter().collect();
        let lipschitz = plan.problem.lipschitz();

        let (status, detail) = descent_check(&spec.family, spec.anchor, &refs, lipschitz);
        report.push(label, "descent", status, detail);

        let slopes: Vec<f64> = traces
            .iter()
            .filter_map(|t| rate_window(config, t).and_then(|w| fit_rate(t, w).ok()))
            .map(|f| f.slope)
            .collect();
        let detail = if slopes.is_empty() {
            "no fit window".into()
        } else {
            format!(
                "median log-log slope {:.4} over {} seeds",
                median(&slopes),
                slopes.len()
            )
        };
        report.push(label, "rate", CheckStatus::Info, detail);

        let schedule = &cell.context.schedule;
        let (status, detail) = bound_check(
            &spec.family,
            spec.anchor.sign().is_some(),
            schedule,
            &plan,
            &refs,
        )?;
        report.push(label, "theorem_bound", status, detail);

        if spec.oracle.is_some() {
            let (status, detail) = condition_check(&refs);
            report.push(label, "oracle_conditions", status, detail);
        }
    }
    Ok(report)
}

pub fn verify_config_file(path: &Path) -> Result<VerifyReport> {
    let config = RunConfig::load(path)?;
    verify(&config, path.parent().unwrap_or(Path::new(".")))
}
