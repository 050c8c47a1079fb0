mod common;

use common::{model, random_vec, rel_diff, rng};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use vibrox::aao::{FrequencySet, HelmAao, HelmState, FLOOR_REL};
use vibrox::forward::{ObservationSpec, Variant};
use vibrox::grid::Grid;
use vibrox::newton::{
    add_noise, alpha_schedule, helmholtz_inverse_model, newton_step, run_inversion, step_objective, stopping_index,
    stopping_sum, FrozenDerivative, NewtonConfig,
};

#[test]
fn alpha_schedule_examples() {
    let cfg = NewtonConfig::default();
    assert_eq!(alpha_schedule(0, &cfg), cfg.alpha0);
    let half = NewtonConfig {
        alpha0: 1.0,
        theta: 0.5,
        ..NewtonConfig::default()
    };
    assert_eq!(alpha_schedule(2, &half), 0.25);
    assert!(alpha_schedule(60, &cfg) < 1e-12);
}

#[test]
fn config_validation() {
    let bad = [
        NewtonConfig { alpha0: 0.0, ..Default::default() },
        NewtonConfig { theta: 1.0, ..Default::default() },
        NewtonConfig { c_estimate: -1.0, ..Default::default() },
        NewtonConfig { trust_radius: 0.0, ..Default::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err());
    }
    assert!(NewtonConfig::default().validate().is_ok());
}

#[test]
fn stopping_index_examples() {
    let cfg = NewtonConfig::default();
    assert_eq!(stopping_index(0.0, &cfg), cfg.max_iter);
    // c = 0: n* = max{n : alpha_{n-1} >= (delta / theta_d)^2}
    for delta in [0.15, 3e-2, 1.3e-2, 3e-3, 1.1e-3, 1.7e-4] {
        let bound = (delta / cfg.theta_discrepancy).powi(2);
        let closed = (1..=cfg.max_iter).filter(|&n| alpha_schedule(n - 1, &cfg) >= bound).max().unwrap_or(0);
        assert_eq!(stopping_index(delta, &cfg), closed, "delta {delta}");
    }
}

#[test]
fn stopping_index_grows_as_noise_shrinks() {
    for c in [0.0, 0.5, 0.9] {
        let cfg = NewtonConfig {
            c_estimate: c,
            max_iter: 50,
            ..Default::default()
        };
        let ladder = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
        let ns: Vec<usize> = ladder.iter().map(|&d| stopping_index(d, &cfg)).collect();
        assert!(ns.windows(2).all(|w| w[1] >= w[0]), "{ns:?}");
        for (&d, &n) in ladder.iter().zip(&ns) {
            assert!(stopping_sum(n, d, &cfg) <= cfg.theta_discrepancy);
        }
    }
}

fn blocks(seed: u64) -> Vec<Vec<C64>> {
    let mut r = rng(seed);
    (0..4).map(|_| random_vec(&mut r, 7)).collect()
}

fn plain_norm(b: &[Vec<C64>]) -> f64 {
    b.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn noise_is_scaled_exactly_and_seeded() {
    let y = blocks(1);
    let same = add_noise(&y, plain_norm, 0.0, 3);
    assert_eq!(same.blocks, y);
    for d in [0.02, 0.01, 0.005] {
        let n = add_noise(&y, plain_norm, d, 7);
        assert!((n.delta_abs / plain_norm(&y) - d).abs() <= 1e-12 * d);
        assert_eq!(n, add_noise(&y, plain_norm, d, 7));
        assert_ne!(n.blocks, add_noise(&y, plain_norm, d, 8).blocks);
    }
}

fn small_model(data_from_truth: bool) -> (HelmAao, HelmState) {
    let g = Grid::new(1.0, 21, -1.0, 1.0, 11).unwrap();
    let mut cfg = model(g, Variant::Helmholtz);
    cfg.helm_nx = 10;
    cfg.helm_ny = 6;
    let t = cfg.transform().unwrap();
    let fs = FrequencySet::uniform(vec![0.6, 1.0], vec![2.0, 5.0]).unwrap();
    let obs = ObservationSpec::all_nodes(t.mesh, 1.0);
    let mut aao = helmholtz_inverse_model(&cfg, fs, &obs, None).unwrap();
    let n = aao.n();
    let m = t.mesh;
    let s2: Vec<C64> = (0..n)
        .map(|k| C64::new(1.0 + 0.1 * (-((m.x(k / m.ny) - 2.5).powi(2) + m.y(k % m.ny).powi(2))).exp(), 0.0))
        .collect();
    let eta: Vec<C64> = (0..n).map(|k| C64::new(1.0 + 0.2 * (m.x(k / m.ny) / 5.0), 0.0)).collect();
    let truth = aao.consistent_state(vec![s2; aao.n_pairs()], eta).unwrap();
    if data_from_truth {
        aao.data = Some(aao.traces(&truth));
    }
    (aao, truth)
}

fn offset(aao: &HelmAao, truth: &HelmState, a: f64) -> HelmState {
    let s2: Vec<C64> = truth.s2[0].iter().map(|v| v * (1.0 + a)).collect();
    let eta: Vec<C64> = truth.eta.iter().map(|v| v * (1.0 - a)).collect();
    aao.consistent_state(vec![s2; aao.n_pairs()], eta).unwrap()
}

#[test]
fn exact_start_is_stationary() {
    let (aao, truth) = small_model(true);
    let cfg = NewtonConfig {
        max_iter: 1,
        ..Default::default()
    };
    let res = run_inversion(&aao, &truth, Some(&truth), &cfg, 0.0).unwrap();
    assert_eq!(res.history.len(), 2);
    let q1 = res.final_state.unwrap();
    assert!(aao.norm_x(&q1.sub(&truth)) <= 1e-9 * aao.norm_x(&truth));
}

#[test]
fn step_solves_the_quadratic_subproblem() {
    // optimality by perturbation of the objective, independent of the normal equations
    let (aao, truth) = small_model(true);
    let q0 = offset(&aao, &truth, 0.05);
    let fd = FrozenDerivative::assemble(&aao, &q0, FLOOR_REL).unwrap();
    let q_n = offset(&aao, &truth, 0.03);
    let alpha = 1e-2;
    let out = newton_step(&aao, &fd, &q_n, alpha, &NewtonConfig::default()).unwrap();
    assert!(out.optimality_residual <= 1e-8);
    assert!(out.objective_after < out.objective_before);
    let res_n = aao.apply(&q_n).unwrap();
    let j = |q: &HelmState| step_objective(&aao, &fd, &res_n, &q_n, q, alpha);
    let j0 = j(&out.q);
    let (np, n) = (aao.n_pairs(), aao.n());
    let mut r = rng(3);
    for _ in 0..4 {
        let e = HelmState::unflatten(&random_vec(&mut r, (2 * np + 1) * n), np, n);
        let e = e.scale(1e-3 / aao.norm_x(&e));
        let (jp, jm) = (j(&out.q.axpy(C64::new(1.0, 0.0), &e)), j(&out.q.axpy(C64::new(-1.0, 0.0), &e)));
        assert!(jp >= j0 && jm >= j0);
        // first variation vanishes: the symmetric difference is pure second order
        assert!((jp - jm).abs() <= 1e-6 * (jp + jm - 2.0 * j0));
    }
}

#[test]
fn growing_alpha_pulls_the_step_to_the_base_state() {
    let (aao, truth) = small_model(true);
    let q0 = offset(&aao, &truth, 0.05);
    let fd = FrozenDerivative::assemble(&aao, &q0, FLOOR_REL).unwrap();
    let q_n = offset(&aao, &truth, 0.02);
    let d: Vec<f64> = [1e-2, 1.0, 1e2, 1e4]
        .iter()
        .map(|&a| aao.norm_x(&newton_step(&aao, &fd, &q_n, a, &NewtonConfig::default()).unwrap().q.sub(&q0)))
        .collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(d[3] < 1e-3 * aao.norm_x(&q_n.sub(&q0)));
    assert!(newton_step(&aao, &fd, &q_n, 0.0, &NewtonConfig::default()).is_err());
}

#[test]
fn frozen_derivative_is_reproducible() {
    let (aao, truth) = small_model(false);
    let a = FrozenDerivative::assemble(&aao, &truth, FLOOR_REL).unwrap();
    let b = FrozenDerivative::assemble(&aao, &truth, FLOOR_REL).unwrap();
    assert!(a.same_operator(&b));
    let dq = HelmState::unflatten(&random_vec(&mut rng(2), (2 * aao.n_pairs() + 1) * aao.n()), aao.n_pairs(), aao.n());
    let via_fd = a.apply(&aao, &dq);
    let direct = aao.derivative_apply(&truth, &dq).unwrap();
    let flat = |y: &vibrox::aao::HelmY| -> Vec<C64> { y.pde.iter().chain(&y.obs).flatten().copied().collect() };
    assert!(rel_diff(&flat(&via_fd), &flat(&direct)) <= 1e-14);
}

#[test]
fn iterates_approach_the_truth_and_the_trust_ball_binds() {
    let (aao, truth) = small_model(true);
    let q0 = offset(&aao, &truth, 0.05);
    let cfg = NewtonConfig {
        max_iter: 4,
        theta: 0.5,
        ..Default::default()
    };
    let res = run_inversion(&aao, &q0, Some(&truth), &cfg, 0.0).unwrap();
    let e: Vec<f64> = res.history.iter().map(|r| r.err_x.unwrap()).collect();
    assert_eq!(res.history.len(), cfg.max_iter + 1);
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!(!res.ball_active());

    let rho = 0.5 * aao.norm_x(&truth.sub(&q0));
    let tight = NewtonConfig { trust_radius: rho, ..cfg };
    let res = run_inversion(&aao, &q0, Some(&truth), &tight, 0.0).unwrap();
    assert!(res.ball_active());
    assert!(res.history.iter().all(|r| r.ball_distance <= rho * (1.0 + 1e-9)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noise_ratio_holds_for_any_level(seed in 0u64..10_000, d in 1e-4f64..0.5) {
        let y = blocks(seed);
        let n = add_noise(&y, plain_norm, d, seed);
        prop_assert!((n.delta_abs / plain_norm(&y) - d).abs() <= 1e-12 * d);
    }

    #[test]
    fn stopping_sum_at_n_star_respects_the_threshold(delta in 1e-5f64..0.5, c in 0.0f64..0.95) {
        let cfg = NewtonConfig { c_estimate: c, ..Default::default() };
        let n = stopping_index(delta, &cfg);
        prop_assert!(stopping_sum(n, delta, &cfg) <= cfg.theta_discrepancy);
        if n < cfg.max_iter {
            prop_assert!(stopping_sum(n + 1, delta, &cfg) > cfg.theta_discrepancy);
        }
    }
}
