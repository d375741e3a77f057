//! First steps of each solver recomputed by hand, with no shared code beyond
//! the solver under test.

use std::f64::consts::PI;
use std::sync::Arc;

use anchored::problems::AlmostBilinear;
use anchored::schedules::{ScheduleConfig, Sign};
use anchored::solvers::{Anchor, ReflectedSolver, Solver, SolverContext, SolverRegistry};
use anchored::{Point, SaddleProblem};
use num_complex::Complex64;

type V = [f64; 2];

fn g(eps: f64, z: V) -> V {
    [eps * z[0] + z[1], -z[0] + eps * z[1]]
}

/// `a + s b`.
fn axpy(a: V, s: f64, b: V) -> V {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

fn close(p: &Point, v: V, tol: f64) {
    for i in 0..2 {
        let scale = v[i].abs().max(1.0);
        assert!(
            (p[i] - v[i]).abs() <= tol * scale,
            "coordinate {i}: solver {} vs hand {}",
            p[i],
            v[i]
        );
    }
}

fn context(eps: f64, anchor: Anchor) -> SolverContext {
    let p = Arc::new(AlmostBilinear::new(eps, 1).unwrap());
    let sched = ScheduleConfig::recommended(p.lipschitz(), 1.0, Sign::Plus);
    SolverContext::new(p, Point::new(vec![1.0, 1.0], 1).unwrap(), sched).with_anchor(anchor)
}

fn hand_constants(eps: f64) -> (f64, f64, f64) {
    let r = (1.0 + eps * eps).sqrt();
    let alpha0 = 0.675 / r;
    let c0 = 1.01 * (4.0 / 3.0) * (PI * PI / 6.0).exp() * r;
    (r, alpha0, c0)
}

fn hand_alpha1(alpha0: f64, r: f64) -> f64 {
    let q = (alpha0 * r).powi(2);
    alpha0 * (1.0 - q / (3.0 * (1.0 - q)))
}

#[test]
fn eag_two_steps_by_hand() {
    let eps = 0.01;
    let (r, alpha0, c0) = hand_constants(eps);
    for (anchor, s) in [
        (Anchor::Fixed, 0.0),
        (Anchor::Plus, 1.0),
        (Anchor::Minus, -1.0),
    ] {
        let family = if s == 0.0 { "eag_fixed" } else { "eag_moving" };
        let mut solver = SolverRegistry::with_defaults()
            .create(family, &context(eps, anchor))
            .unwrap();

        let z0 = [1.0, 1.0];
        // k = 0: beta = 1/2 and the anchor term vanishes since z_bar = z.
        let zh0 = axpy(z0, -alpha0, g(eps, z0));
        let z1 = axpy(z0, -alpha0, g(eps, zh0));
        // delta_0 = 1, c_1 = c0/2, B_1 = 2, gamma_1 = 2 / (c_1 * 2).
        let c1 = c0 / 2.0;
        let gamma1 = s * 2.0 / (c1 * 2.0);
        let zb1 = axpy(z0, gamma1, g(eps, z1));
        solver.step().unwrap();
        close(solver.iterate(), z1, 1e-14);
        close(solver.anchor(), zb1, 1e-14);
        close(solver.half_point().unwrap(), zh0, 1e-14);

        // k = 1: beta = 1/3, delta_1 = 1/4, c_2 = c_1/(5/4), B_2 = 3.
        let alpha1 = hand_alpha1(alpha0, r);
        let beta1 = 1.0 / 3.0;
        let pulled = axpy(z1, beta1, axpy(zb1, -1.0, z1));
        let zh1 = axpy(pulled, -alpha1, g(eps, z1));
        let z2 = axpy(pulled, -alpha1, g(eps, zh1));
        let c2 = c1 / 1.25;
        let gamma2 = s * 3.0 / (c2 * (1.0 + 4.0));
        let zb2 = axpy(zb1, gamma2, g(eps, z2));
        solver.step().unwrap();
        close(solver.iterate(), z2, 1e-14);
        close(solver.anchor(), zb2, 1e-14);
        close(solver.half_point().unwrap(), zh1, 1e-14);
        assert_eq!(solver.eval_count(), 5, "{family} {anchor}");
    }
}

#[test]
fn popov_two_steps_by_hand() {
    let eps = 10.0;
    let (r, alpha0, c0) = hand_constants(eps);
    let registry = SolverRegistry::with_defaults();
    let cases = [
        ("popov_fixed", Anchor::Fixed, 0.0),
        ("popov_v1", Anchor::Minus, -1.0),
        ("popov_v1", Anchor::Plus, 1.0),
        ("popov_v2", Anchor::Minus, -1.0),
    ];
    for (family, anchor, s) in cases {
        let mut solver = registry.create(family, &context(eps, anchor)).unwrap();
        let z0 = [1.0, 1.0];
        let mix = |z: V, zb: V, beta: f64| axpy(z, beta, axpy(zb, -1.0, z));

        // z_hat^{-1} = z^0 and eta_0 = alpha_0 / 2.
        let eta0 = alpha0 / 2.0;
        let zh0 = axpy(mix(z0, z0, 0.5), -eta0, g(eps, z0));
        let z1 = axpy(mix(z0, z0, 0.5), -eta0, g(eps, zh0));
        let gamma1 = s * 2.0 / (c0 / 2.0 * 2.0);
        let dir1 = if family == "popov_v2" {
            g(eps, zh0)
        } else {
            g(eps, z1)
        };
        let zb1 = axpy(z0, gamma1, dir1);
        solver.step().unwrap();
        close(solver.iterate(), z1, 1e-14);
        close(solver.anchor(), zb1, 1e-14);

        let eta1 = hand_alpha1(alpha0, r) / 2.0;
        let beta1 = 1.0 / 3.0;
        let zh1 = axpy(mix(z1, zb1, beta1), -eta1, g(eps, zh0));
        let z2 = axpy(mix(z1, zb1, beta1), -eta1, g(eps, zh1));
        let gamma2 = s * 3.0 / (c0 / 2.0 / 1.25 * 5.0);
        let dir2 = if family == "popov_v2" {
            g(eps, zh1)
        } else {
            g(eps, z2)
        };
        let zb2 = axpy(zb1, gamma2, dir2);
        solver.step().unwrap();
        close(solver.iterate(), z2, 1e-14);
        close(solver.anchor(), zb2, 1e-14);
        close(solver.half_point().unwrap(), zh1, 1e-14);
        let expected_evals = if family == "popov_v1" { 5 } else { 3 };
        assert_eq!(solver.eval_count(), expected_evals, "{family}");
    }
}

/// On `G(z) = M z` with eigenpairs `(eps +- i, (1, +-i))` the reflected
/// recursion decouples into scalar recurrences
/// `w_{k+1} = (1 - 2 eta lambda) w_k + eta lambda w_{k-1}` with closed-form
/// solutions `A mu_1^k + B mu_2^k`.
#[test]
fn reflected_matches_eigen_decomposition() {
    for (eps, eta) in [(0.01, 0.3), (0.0, 0.2), (0.5, 0.1), (0.01, 0.45)] {
        let p: Arc<dyn SaddleProblem> = Arc::new(AlmostBilinear::new(eps, 1).unwrap());
        let z_prev = [0.3, -0.7];
        let z0 = [1.0, 0.5];
        let mut solver = ReflectedSolver::from_pair(
            p,
            Point::new(z_prev.to_vec(), 1).unwrap(),
            Point::new(z0.to_vec(), 1).unwrap(),
            eta,
        )
        .unwrap();

        // z = a (1, i) + conj(a) (1, -i) with a = (x - i y) / 2.
        let coeff = |z: V| Complex64::new(z[0] / 2.0, -z[1] / 2.0);
        let lambda = Complex64::new(eps, 1.0);
        let b = 1.0 - 2.0 * eta * lambda;
        let c = eta * lambda;
        // mu^2 - b mu - c = 0.
        let disc = (b * b + 4.0 * c).sqrt();
        let (mu1, mu2) = ((b + disc) / 2.0, (b - disc) / 2.0);
        let (w0, wm1) = (coeff(z0), coeff(z_prev));
        // A + B = w0, A / mu1 + B / mu2 = w_{-1}.
        let bb = (wm1 - w0 / mu1) / (1.0 / mu2 - 1.0 / mu1);
        let aa = w0 - bb;
        let rho = mu1.norm().max(mu2.norm());

        for k in 1..=200 {
            solver.step().unwrap();
            let w = aa * mu1.powu(k) + bb * mu2.powu(k);
            let predicted = [2.0 * w.re, -2.0 * w.im];
            let z = solver.iterate();
            let scale = rho.powi(k as i32).max(1e-300);
            for i in 0..2 {
                assert!(
                    (z[i] - predicted[i]).abs() <= 1e-9 * scale.max(1.0),
                    "eps {eps} eta {eta} k {k}: {} vs {}",
                    z[i],
                    predicted[i]
                );
            }
        }
    }
}
