//! Benchmark problems and their text-config descriptions.

mod almost_bilinear;
mod simplex;
mod simplex_game;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use almost_bilinear::AlmostBilinear;
pub use simplex::project_simplex;
pub use simplex_game::{SimplexGame, DEFAULT_LAMBDA};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::SaddleProblem;

/// A problem instance fully described by a few scalars, so that an experiment
/// is reproducible from one text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    AlmostBilinear {
        epsilon: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    SimplexGame {
        n: usize,
        m: usize,
        /// Row count of `A` in `Q = A^T A`; defaults to `n`.
        #[serde(default)]
        rows: Option<usize>,
        seed: u64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

fn one() -> usize {
    1
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Arc<dyn SaddleProblem>> {
        Ok(match *self {
            ProblemSpec::AlmostBilinear { epsilon, dim } => {
                Arc::new(AlmostBilinear::new(epsilon, dim)?)
            }
            ProblemSpec::SimplexGame {
                n,
                m,
                rows,
                seed,
                lambda,
            } => Arc::new(SimplexGame::generate(
                n,
                m,
                rows.unwrap_or(n),
                seed,
                lambda,
            )?),
        })
    }

    /// Default starting point: all ones for the almost-bilinear toy, uniform
    /// mixed strategies for the game.
    pub fn default_initial(&self) -> Result<Point> {
        match *self {
            ProblemSpec::AlmostBilinear { dim, .. } => {
                Point::from_blocks(&vec![1.0; dim], &vec![1.0; dim])
            }
            ProblemSpec::SimplexGame { n, m, .. } => {
                if n == 0 || m == 0 {
                    return Err(Error::config("game dimensions must be >= 1"));
                }
                Point::from_blocks(&vec![1.0 / n as f64; n], &vec![1.0 / m as f64; m])
            }
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match *self {
            ProblemSpec::AlmostBilinear { dim, .. } => (dim, dim),
            ProblemSpec::SimplexGame { n, m, .. } => (n, m),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }
}
