use std::sync::Arc;

use anchored::diagnostics::{Trace, TraceMeta, TraceRecord};
use anchored::oracles::{IndexSampler, OracleKind};
use anchored::problems::{project_simplex, AlmostBilinear, SimplexGame, DEFAULT_LAMBDA};
use anchored::schedules::{advance, alpha_next, deterministic_alpha_bound, ScheduleConfig, Sign};
use anchored::solvers::{run, Anchor, RunOptions, SolverContext, SolverRegistry};
use anchored::{eval_operator, Point, SaddleProblem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point(v: Vec<f64>) -> Point {
    let n = v.len() / 2;
    Point::new(v, n).unwrap()
}

fn coords(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 2 * d)
}

fn pair() -> impl Strategy<Value = (f64, usize, Vec<f64>, Vec<f64>)> {
    (0.0..20.0f64, 1usize..5).prop_flat_map(|(eps, d)| (Just(eps), Just(d), coords(d), coords(d)))
}

fn simplex_point(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn almost_bilinear_monotonicity_closed_form((eps, d, a, b) in pair()) {
        let p = AlmostBilinear::new(eps, d).unwrap();
        let (za, zb) = (point(a), point(b));
        let dg = eval_operator(&p, &za).unwrap().sub(&eval_operator(&p, &zb).unwrap());
        let dz = za.sub(&zb);
        let lhs = dg.dot(&dz);
        let rhs = eps * dz.norm_sq();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs() + dz.norm_sq()));
        prop_assert!(lhs >= -1e-12 * dz.norm_sq());
    }

    #[test]
    fn almost_bilinear_is_lipschitz_with_r((eps, d, a, b) in pair()) {
        let p = AlmostBilinear::new(eps, d).unwrap();
        let (za, zb) = (point(a), point(b));
        let dg = eval_operator(&p, &za).unwrap().sub(&eval_operator(&p, &zb).unwrap());
        // The operator is sqrt(1+eps^2) times an orthogonal map, so equality holds.
        let ratio = dg.norm() / za.sub(&zb).norm().max(1e-300);
        prop_assert!(ratio <= p.lipschitz() * (1.0 + 1e-12));
        prop_assert!(ratio >= p.lipschitz() * (1.0 - 1e-12) || za.sub(&zb).norm() == 0.0);
    }

    #[test]
    fn operator_matches_objective_finite_differences(
        eps in 0.0..5.0f64,
        z in coords(2),
    ) {
        let p = AlmostBilinear::new(eps, 2).unwrap();
        let zp = point(z.clone());
        let g = eval_operator(&p, &zp).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut up = z.clone();
            let mut dn = z.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (p.objective(&up).unwrap() - p.objective(&dn).unwrap()) / (2.0 * h);
            // G = (grad_x f, -grad_y f).
            let expected = if i < 2 { fd } else { -fd };
            prop_assert!((g[i] - expected).abs() <= 1e-6 * (1.0 + fd.abs()), "i {i}: {} vs {expected}", g[i]);
        }
    }

    #[test]
    fn projection_is_feasible_idempotent_and_nonexpansive(
        u in prop::collection::vec(-50.0..50.0f64, 1..12),
        shift in prop::collection::vec(-5.0..5.0f64, 12),
    ) {
        let v: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let pu = project_simplex(&u);
        let pv = project_simplex(&v);
        prop_assert!(pu.iter().all(|&x| x >= 0.0));
        prop_assert!((pu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(project_simplex(&pu), pu.clone());
        let d_in: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let d_out: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn projection_beats_random_feasible_points(
        v in prop::collection::vec(-3.0..3.0f64, 2..6),
        raw in prop::collection::vec(0.01..1.0f64, 6),
    ) {
        let p = project_simplex(&v);
        let q = simplex_point(&raw[..v.len()]);
        let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        prop_assert!(dist(&p) <= dist(&q) + 1e-12);
    }

    #[test]
    fn game_smooth_operator_monotone_on_feasible_set(
        seed in 0u64..1000,
        a in prop::collection::vec(0.001..1.0f64, 8),
        b in prop::collection::vec(0.001..1.0f64, 8),
    ) {
        let game = SimplexGame::generate(5, 3, 5, seed, DEFAULT_LAMBDA).unwrap();
        let mut z1 = simplex_point(&a[..5]);
        z1.extend(simplex_point(&a[5..]));
        let mut z2 = simplex_point(&b[..5]);
        z2.extend(simplex_point(&b[5..]));
        let (mut g1, mut g2) = (vec![0.0; 8], vec![0.0; 8]);
        game.smooth_operator(&z1, &mut g1);
        game.smooth_operator(&z2, &mut g2);
        let inner: f64 = (0..8).map(|i| (g1[i] - g2[i]) * (z1[i] - z2[i])).sum();
        prop_assert!(inner >= -1e-9);
        // Smooth-part Lipschitz bound.
        let dg: f64 = (0..8).map(|i| (g1[i] - g2[i]).powi(2)).sum::<f64>().sqrt();
        let dz: f64 = (0..8).map(|i| (z1[i] - z2[i]).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dg <= game.lipschitz_bound() * dz * (1.0 + 1e-9));
    }

    #[test]
    fn game_composite_is_lipschitz(
        seed in 0u64..1000,
        a in prop::collection::vec(-2.0..2.0f64, 6),
        b in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let game = SimplexGame::generate(4, 2, 4, seed, DEFAULT_LAMBDA).unwrap();
        let (za, zb) = (Point::new(a, 4).unwrap(), Point::new(b, 4).unwrap());
        let dg = eval_operator(&game, &za).unwrap().sub(&eval_operator(&game, &zb).unwrap());
        prop_assert!(dg.norm() <= game.lipschitz() * za.sub(&zb).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn coordinate_and_minibatch_average_to_operator((eps, d, a, _b) in pair(), batch in 1usize..4) {
        let p = AlmostBilinear::new(eps, d).unwrap();
        let z = point(a);
        let g = eval_operator(&p, &z).unwrap();
        let n = p.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [OracleKind::Coordinate, OracleKind::Minibatch { batch: batch.min(n) }] {
            let o = kind.build().unwrap();
            let mut sum = z.zeros_like();
            for i in 1..=n {
                sum.axpy(1.0 / n as f64, &o.estimate(&p, &z, i, 0, &mut rng).unwrap());
            }
            prop_assert!(sum.sub(&g).norm() <= 1e-12 * (1.0 + g.norm()), "{kind:?}");
        }
    }

    #[test]
    fn additive_noise_is_unbiased(seed in 0u64..10_000, k in 0usize..5) {
        let p = AlmostBilinear::new(0.01, 2).unwrap();
        let z = point(vec![1.0, -2.0, 0.5, 3.0]);
        let g = eval_operator(&p, &z).unwrap();
        let o = OracleKind::AdditiveNoise { decay: 4.0, scale: 1.0 }.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 4000;
        let mut mean = z.zeros_like();
        for _ in 0..draws {
            mean.axpy(1.0 / draws as f64, &o.estimate(&p, &z, 1, k, &mut rng).unwrap());
        }
        // Per-coordinate noise sd is (k+1)^-2 / sqrt(N); 6 standard errors.
        let sd = ((k + 1) as f64).powi(-2) / 2.0;
        for i in 0..4 {
            prop_assert!((mean[i] - g[i]).abs() <= 6.0 * sd / (draws as f64).sqrt());
        }
    }

    #[test]
    fn sampler_indices_in_range(seed: u64, n in 1usize..50, k in 0usize..1_000_000) {
        let s = IndexSampler::new(seed, n);
        let d = s.draws(k);
        prop_assert!(d.indices.iter().all(|&i| (1..=n).contains(&i)));
        prop_assert_eq!(s.draws(k).indices, d.indices);
    }

    #[test]
    fn alpha_decreases_and_coefficients_couple(
        frac in 0.01..0.999f64,
        r in 0.1..20.0f64,
    ) {
        let alpha0 = frac * deterministic_alpha_bound(r);
        let cfg = ScheduleConfig { alpha0, ..ScheduleConfig::recommended(r, 1.0, Sign::Minus) };
        let mut s = cfg.initial_state();
        for _ in 0..500 {
            let next = advance(&s, &cfg).unwrap();
            prop_assert!(next.alpha < s.alpha && next.alpha > 0.0);
            prop_assert_eq!(next.alpha, alpha_next(s.alpha, s.k, r).unwrap());
            let k = next.k as f64;
            prop_assert!((next.a - next.alpha * (k + 1.0) * (k + 2.0) / 2.0).abs() <= 1e-12 * next.a);
            prop_assert_eq!(next.b, k + 1.0);
            prop_assert!((next.beta - 1.0 / (k + 2.0)).abs() <= 1e-16);
            prop_assert!(next.c < s.c && next.gamma < 0.0);
            s = next;
        }
    }

    #[test]
    fn trace_csv_round_trip_is_bitwise(
        rows in prop::collection::vec(
            (0.0..1e3f64, any::<bool>(), -1e3..1e3f64, -1e3..1e3f64, 0.0..1.0f64, 1e-3..1e3f64),
            1..20,
        ),
        seed: u64,
    ) {
        let mut t = Trace::new(TraceMeta { solver: "x".into(), seed, dim_primal: 1, experimental: false, notes: vec!["n=1".into()] });
        for (k, (g, has_v, a0, a1, beta, c)) in rows.into_iter().enumerate() {
            t.records.push(TraceRecord {
                k,
                grad_norm_sq: g,
                lyapunov: has_v.then_some(g * 0.3),
                anchor: Point::new(vec![a0, a1], 1).unwrap(),
                anchor_dist: (a0 * a0 + a1 * a1).sqrt(),
                alpha: beta / 3.0,
                beta,
                c,
                gamma: -beta / c,
                var_zk: has_v.then_some(g / 7.0),
                var_half: None,
                eval_count: 2 * k + 1,
                mode: None,
            });
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        prop_assert_eq!(Trace::read_csv(buf.as_slice()).unwrap(), t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every deterministic EAG run with a fixed or `+gamma` anchor, from a
    /// random start on a random almost-bilinear instance, has a nonincreasing
    /// Lyapunov sequence. `-gamma` is excluded, see
    /// `minus_anchor_can_raise_lyapunov`.
    #[test]
    fn deterministic_eag_descends(
        eps in 0.0..3.0f64,
        z in coords(1),
        frac in 0.05..0.99f64,
        anchor in prop_oneof![Just(Anchor::Fixed), Just(Anchor::Plus)],
    ) {
        let p = Arc::new(AlmostBilinear::new(eps, 1).unwrap());
        let r = p.lipschitz();
        let sched = ScheduleConfig { alpha0: frac * deterministic_alpha_bound(r), ..ScheduleConfig::recommended(r, 1.0, Sign::Plus) };
        let ctx = SolverContext::new(p, point(z), sched).with_anchor(anchor);
        let family = if anchor == Anchor::Fixed { "eag_fixed" } else { "eag_moving" };
        let mut s = SolverRegistry::with_defaults().create(family, &ctx).unwrap();
        let out = run(s.as_mut(), &RunOptions::iterations(300)).unwrap();
        let v: Vec<f64> = out.trace.records.iter().map(|r| r.lyapunov.unwrap()).collect();
        for (k, w) in v.windows(2).enumerate() {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "k {k}: {} -> {}", w[0], w[1]);
        }
    }
}

/// With `-gamma` the anchor move adds `2 B_{k+1} |gamma_{k+1}| |G|^2` to `V`,
/// which a small step size cannot absorb. Values recomputed independently:
/// `V_1 = 107.50238769619611`, `V_2 = 112.18834094773919`.
#[test]
fn minus_anchor_can_raise_lyapunov() {
    let z = [0.0, 4.994592385089259];
    let values = |anchor: Anchor| -> Vec<f64> {
        let p = Arc::new(AlmostBilinear::new(0.0, 1).unwrap());
        let r = p.lipschitz();
        let sched = ScheduleConfig {
            alpha0: 0.05 * deterministic_alpha_bound(r),
            ..ScheduleConfig::recommended(r, 1.0, Sign::Plus)
        };
        let ctx = SolverContext::new(p, point(z.to_vec()), sched).with_anchor(anchor);
        let mut s = SolverRegistry::with_defaults()
            .create("eag_moving", &ctx)
            .unwrap();
        let out = run(s.as_mut(), &RunOptions::iterations(4)).unwrap();
        out.trace
            .records
            .iter()
            .map(|r| r.lyapunov.unwrap())
            .collect()
    };
    let minus = values(Anchor::Minus);
    assert!((minus[1] - 107.50238769619611).abs() <= 1e-12 * minus[1]);
    assert!((minus[2] - 112.18834094773919).abs() <= 1e-12 * minus[2]);
    assert!(minus[2] > minus[1] && minus[3] > minus[2]);
    let plus = values(Anchor::Plus);
    assert!(plus.windows(2).all(|w| w[1] <= w[0]), "{plus:?}");
}
