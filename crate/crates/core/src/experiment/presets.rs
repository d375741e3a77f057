use std::path::PathBuf;

use super::config::{ExecutionSpec, RunConfig, ScheduleSpec, SolverSpec};
use crate::error::{Error, Result};
use crate::oracles::OracleKind;
use crate::problems::{ProblemSpec, DEFAULT_LAMBDA};
use crate::solvers::Anchor;

pub const PRESETS: [&str; 3] = ["figure1", "figure2", "figure3"];

const NOISE: OracleKind = OracleKind::AdditiveNoise {
    decay: 4.0,
    scale: 1.0,
};

fn eag_triple() -> Vec<SolverSpec> {
    [Anchor::Fixed, Anchor::Plus, Anchor::Minus]
        .into_iter()
        .map(|a| {
            let mut s = SolverSpec::new("eag_stochastic", a).with_oracle(NOISE);
            s.k_bar = Some(1.0);
            s
        })
        .collect()
}

fn execution(max_iter: usize, seeds: Vec<u64>, workers: usize) -> ExecutionSpec {
    ExecutionSpec {
        max_iter,
        grad_tol: None,
        seeds,
        output: PathBuf::from("."),
        workers,
        variance_samples: 64,
        log_grid: None,
        rate_window: None,
    }
}

/// The config behind each figure. Outputs land in the config's directory;
/// `seed_base` shifts the seed list.
///
/// * `figure1`: almost-bilinear `eps = 0.01`, stochastic EAG with fixed, `+gamma`
///   and `-gamma` anchors, additive noise decaying as `(k+1)^-4`, 32 seeds,
///   1000 steps.
/// * `figure2`: the 48 x 2 simplex game, the same three solvers and oracle,
///   16 seeds, 10^4 steps on a log grid.
/// * `figure3`: almost-bilinear `eps = 10`, Popov fixed and both moving
///   variants with `-gamma`, run to `|G|^2 <= 1e-10`.
pub fn preset(name: &str, seed_base: u64, workers: usize) -> Result<RunConfig> {
    let seeds = |n: u64| (seed_base..seed_base + n).collect::<Vec<_>>();
    Ok(match name {
        "figure1" => RunConfig {
            problem: ProblemSpec::AlmostBilinear {
                epsilon: 0.01,
                dim: 1,
            },
            schedule: ScheduleSpec::default(),
            execution: execution(1001, seeds(32), workers),
            solvers: eag_triple(),
        },
        "figure2" => RunConfig {
            problem: ProblemSpec::SimplexGame {
                n: 48,
                m: 2,
                rows: None,
                seed: 7,
                lambda: DEFAULT_LAMBDA,
            },
            schedule: ScheduleSpec::default(),
            execution: ExecutionSpec {
                log_grid: Some(20),
                ..execution(10_001, seeds(16), workers)
            },
            solvers: eag_triple(),
        },
        "figure3" => RunConfig {
            problem: ProblemSpec::AlmostBilinear {
                epsilon: 10.0,
                dim: 1,
            },
            schedule: ScheduleSpec::default(),
            execution: ExecutionSpec {
                grad_tol: Some(1e-10),
                log_grid: Some(20),
                rate_window: Some((100, 10_000)),
                ..execution(10_000_000, seeds(1), workers)
            },
            solvers: vec![
                SolverSpec::new("popov_fixed", Anchor::Fixed),
                SolverSpec::new("popov_v1", Anchor::Minus),
                SolverSpec::new("popov_v2", Anchor::Minus),
            ],
        },
        other => {
            return Err(Error::config(format!(
                "unknown preset {other:?}; known: {}",
                PRESETS.join(", ")
            )))
        }
    })
}
