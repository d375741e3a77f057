//! Fixed-seed ten-step traces of every solver family.

use std::path::PathBuf;
use std::sync::Arc;

use anchored::oracles::{Oracle, OracleKind};
use anchored::problems::AlmostBilinear;
use anchored::schedules::{ScheduleConfig, Sign};
use anchored::solvers::{run, Anchor, RunOptions, SolverContext, SolverRegistry};
use anchored::{Point, SaddleProblem};

pub const SEED: u64 = 42;

/// `(file stem, family, anchor, oracle)`.
pub fn cells() -> Vec<(&'static str, &'static str, Anchor, Option<OracleKind>)> {
    let noise = OracleKind::AdditiveNoise {
        decay: 4.0,
        scale: 1.0,
    };
    vec![
        ("eag_fixed", "eag_fixed", Anchor::Fixed, None),
        ("eag_moving_plus", "eag_moving", Anchor::Plus, None),
        ("eag_moving_minus", "eag_moving", Anchor::Minus, None),
        (
            "eag_stochastic_coordinate_minus",
            "eag_stochastic",
            Anchor::Minus,
            Some(OracleKind::Coordinate),
        ),
        (
            "eag_stochastic_noise_fixed",
            "eag_stochastic",
            Anchor::Fixed,
            Some(noise),
        ),
        (
            "eag_stochastic_minibatch_plus",
            "eag_stochastic",
            Anchor::Plus,
            Some(OracleKind::Minibatch { batch: 1 }),
        ),
        ("popov_fixed", "popov_fixed", Anchor::Fixed, None),
        ("popov_v1_minus", "popov_v1", Anchor::Minus, None),
        ("popov_v2_minus", "popov_v2", Anchor::Minus, None),
        ("reflected", "reflected", Anchor::Fixed, None),
    ]
}

pub fn trace_csv(family: &str, anchor: Anchor, oracle: Option<OracleKind>) -> Vec<u8> {
    let p: Arc<dyn SaddleProblem> = Arc::new(AlmostBilinear::new(0.01, 1).unwrap());
    let o: Option<Arc<dyn Oracle>> = oracle.map(|k| Arc::from(k.build().unwrap()));
    let k_bar = o.as_ref().map_or(1.0, |o| o.theoretical_k_bar(p.dim()));
    let sched = ScheduleConfig::recommended(p.lipschitz(), k_bar, Sign::Plus);
    let mut ctx = SolverContext::new(p, Point::new(vec![1.0, 1.0], 1).unwrap(), sched)
        .with_anchor(anchor)
        .with_seed(SEED);
    if let Some(o) = o {
        ctx = ctx.with_oracle(o);
    }
    let mut s = SolverRegistry::with_defaults()
        .create(family, &ctx)
        .unwrap();
    let out = run(s.as_mut(), &RunOptions::iterations(11)).unwrap();
    assert_eq!(out.trace.len(), 11);
    let mut buf = Vec::new();
    out.trace.write_csv(&mut buf).unwrap();
    buf
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
}
