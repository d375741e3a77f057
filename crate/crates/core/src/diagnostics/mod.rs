//! Lyapunov descent, rate fitting and rate-bound checks over recorded traces.

mod trace;

pub use trace::{fmt_f64, Trace, TraceMeta, TraceRecord};

use crate::error::{Error, Result};
use crate::point::Point;

/// `V_k = A_k |g|^2 + B_k <g, z - z_bar> + c_k |z_star - z_bar|^2`.
pub fn lyapunov_value(
    a: f64,
    b: f64,
    c: f64,
    g: &Point,
    z: &Point,
    z_bar: &Point,
    z_star: &Point,
) -> f64 {
    let cross: f64 = (0..g.len()).map(|i| g[i] * (z[i] - z_bar[i])).sum();
    a * g.norm_sq() + b * cross + c * z_star.dist_sq(z_bar)
}

/// Relative and absolute slack allowed on `V_{k+1} <= V_k`.
pub const DESCENT_TOLERANCE: f64 = 1e-12;

/// Width of the Monte-Carlo band, in standard errors of the seed mean.
pub const SLACK_BAND_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DescentMode {
    Strict,
    /// Seed-averaged `V_k - V_{k+1}` against the variance slack
    /// `-2 A_k alpha_k R (var(z^k) + var(z^{k+1/2}) / (1 - beta_k))`.
    StochasticSlack {
        lipschitz: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DescentReport {
    Checked {
        pairs: usize,
        violations: Vec<usize>,
    },
    NotCheckable(String),
}

impl DescentReport {
    /// `Some(true)` only when the check ran and found nothing.
    pub fn passed(&self) -> Option<bool> {
        match self {
            DescentReport::Checked { violations, .. } => Some(violations.is_empty()),
            DescentReport::NotCheckable(_) => None,
        }
    }

    pub fn violations(&self) -> &[usize] {
        match self {
            DescentReport::Checked { violations, .. } => violations,
            DescentReport::NotCheckable(_) => &[],
        }
    }
}

/// Lists every `k` at which descent fails. Strict mode checks each trace on
/// its own; slack mode averages over the traces (one per seed).
pub fn check_descent(traces: &[&Trace], mode: DescentMode) -> DescentReport {
    if traces.is_empty() {
        return DescentReport::NotCheckable("no traces".into());
    }
    match mode {
        DescentMode::Strict => strict_descent(traces),
        DescentMode::StochasticSlack { lipschitz } => slack_descent(traces, lipschitz),
    }
}

fn lyapunov_series(t: &Trace) -> Option<Vec<f64>> {
    t.records.iter().map(|r| r.lyapunov).collect()
}

/// Thinned traces skip iterations; only adjacent iterations form a pair.
fn adjacent(t: &Trace, i: usize) -> bool {
    t.records[i + 1].k == t.records[i].k + 1
}

fn strict_descent(traces: &[&Trace]) -> DescentReport {
    let mut violations = Vec::new();
    let mut pairs = 0;
    for t in traces {
        let Some(v) = lyapunov_series(t) else {
            return DescentReport::NotCheckable(format!(
                "trace {} seed {} has no Lyapunov values",
                t.meta.solver, t.meta.seed
            ));
        };
        for (i, w) in v.windows(2).enumerate() {
            if !adjacent(t, i) {
                continue;
            }
            pairs += 1;
            if w[1] > w[0] * (1.0 + DESCENT_TOLERANCE) + DESCENT_TOLERANCE {
                violations.push(t.records[i].k);
            }
        }
    }
    violations.sort_unstable();
    violations.dedup();
    DescentReport::Checked { pairs, violations }
}

fn slack_descent(traces: &[&Trace], lipschitz: f64) -> DescentReport {
    let s = traces.len();
    if s < 2 {
        return DescentReport::NotCheckable("slack check needs at least 2 seeds".into());
    }
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let mut margins = vec![Vec::with_capacity(s); len.saturating_sub(1)];
    for t in traces {
        for (k, column) in margins.iter_mut().enumerate() {
            let (r, next) = (&t.records[k], &t.records[k + 1]);
            if r.k != k || next.k != k + 1 {
                return DescentReport::NotCheckable("slack check needs unthinned traces".into());
            }
            let (Some(v0), Some(v1), Some(vz), Some(vh)) =
                (r.lyapunov, next.lyapunov, r.var_zk, r.var_half)
            else {
                return DescentReport::NotCheckable(format!(
                    "seed {} lacks Lyapunov or variance data at k = {k}",
                    t.meta.seed
                ));
            };
            let slack = -2.0 * r.a() * r.alpha * lipschitz * (vz + vh / (1.0 - r.beta));
            column.push((v0 - v1) - slack);
        }
    }
    let violations = margins
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let (mean, sd) = mean_sd(m);
            mean < -SLACK_BAND_SIGMAS * sd / (s as f64).sqrt()
        })
        .map(|(k, _)| k)
        .collect();
    DescentReport::Checked {
        pairs: margins.len(),
        violations,
    }
}

/// Sample mean and (n - 1)-normalized standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, rms residual)`.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Some((slope, intercept, (rss / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (usize, usize),
    pub residual: f64,
    /// Set when a zero gradient cut the window short.
    pub truncated_at: Option<usize>,
}

/// Least-squares slope of `log |G(z^k)|^2` against `log k` over the inclusive
/// window. The window is clipped to the trace and cut short at the first
/// exactly-zero gradient.
pub fn fit_rate(trace: &Trace, window: (usize, usize)) -> Result<RateFit> {
    let (lo, hi) = window;
    if lo < 1 || hi <= lo {
        return Err(Error::config(format!(
            "rate window {window:?} needs 1 <= lo < hi"
        )));
    }
    let mut pts = Vec::new();
    let mut truncated_at = None;
    let mut last = lo;
    for r in trace.records.iter().filter(|r| r.k >= lo && r.k <= hi) {
        if r.grad_norm_sq <= 0.0 {
            truncated_at = Some(r.k);
            break;
        }
        pts.push(((r.k as f64).ln(), r.grad_norm_sq.ln()));
        last = r.k;
    }
    let (slope, intercept, residual) = least_squares(&pts).ok_or_else(|| {
        Error::Estimation(format!("fewer than two usable points in window {window:?}"))
    })?;
    Ok(RateFit {
        slope,
        intercept,
        window: (lo, last),
        residual,
        truncated_at,
    })
}

/// `sum(k-1) = sum_{j<k} 2 A_j alpha_j R (var(z^j) + var(z^{j+1/2}) / (1 - beta_j))`,
/// returned for every record index `k` (so the first entry is 0).
pub fn variance_sums(trace: &Trace, lipschitz: f64) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    for (i, r) in trace.records.iter().enumerate() {
        out.push(acc);
        if i + 1 < trace.len() {
            if !adjacent(trace, i) {
                return None;
            }
            let (vz, vh) = (r.var_zk?, r.var_half?);
            acc += 2.0 * r.a() * r.alpha * lipschitz * (vz + vh / (1.0 - r.beta));
        }
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bounds: Vec<f64>,
    pub within: Vec<bool>,
}

impl BoundReport {
    pub fn failures(&self) -> Vec<usize> {
        self.within
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn all_within(&self) -> bool {
        self.within.iter().all(|&ok| ok)
    }
}

/// Constants entering the `O(1/k^2)` bound on `|G(z^k)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub alpha_inf_lb: f64,
    pub alpha0: f64,
    pub c0: f64,
    pub lipschitz: f64,
    pub z0_dist_sq: f64,
}

impl BoundInputs {
    /// `4 [(alpha0 R^2 + c0) |z0 - z*|^2 + extra] / (alpha_inf (k+1)(k+2))`.
    pub fn bound(&self, k: usize, extra: f64) -> f64 {
        let r2 = self.lipschitz * self.lipschitz;
        let num = 4.0 * ((self.alpha0 * r2 + self.c0) * self.z0_dist_sq + extra);
        num / (self.alpha_inf_lb * ((k + 1) * (k + 2)) as f64)
    }
}

/// Checks `|G(z^k)|^2` against the bound at every record, inclusive.
/// `sum_variance[k]` is the accumulated stochastic slack up to `k - 1`.
pub fn check_theorem_bound(
    trace: &Trace,
    inputs: &BoundInputs,
    sum_variance: Option<&[f64]>,
) -> BoundReport {
    let bounds: Vec<f64> = trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| inputs.bound(r.k, sum_variance.map_or(0.0, |s| s[i])))
        .collect();
    let within = trace
        .records
        .iter()
        .zip(&bounds)
        .map(|(r, b)| r.grad_norm_sq <= *b)
        .collect();
    BoundReport { bounds, within }
}
