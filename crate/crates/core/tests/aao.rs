mod common;

use common::{field, loglog_slope, model, random_vec, rel_diff, rng};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use vibrox::aao::{check_floor, FrequencySet, HelmAao, HelmState, ParaxialAao, ParaxialState, FLOOR_REL};
use vibrox::forward::{forward_s, observe, ObservationSpec, Variant};
use vibrox::grid::{ComplexField, Grid, Mesh, RealField, SlownessField};
use vibrox::newton::helmholtz_inverse_model;
use vibrox::Error;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn paraxial_aao(g: Grid, data: Option<Vec<C64>>) -> ParaxialAao {
    let cfg = model(g, Variant::Paraxial);
    let obs = ObservationSpec::far_end(Mesh::from_grid(&g), cfg.omega_d());
    ParaxialAao::new(cfg, obs, data).unwrap()
}

/// Smooth base state with moduli bounded away from zero.
fn base_state(g: &Grid) -> ParaxialState {
    ParaxialState {
        s1: field(g, |z, y| C64::new(1.0 + 0.1 * z * y, 0.0)),
        s2: field(g, |z, _| C64::new(1.0 + 0.05 * z, 0.0)),
        eta: field(g, |_, y| C64::new(1.0 + 0.2 * y * y, 0.0)),
        phi1: field(g, |z, y| C64::from_polar(1.0 + 0.1 * y, 2.0 * z)),
        phi2: field(g, |z, y| C64::from_polar(1.0 - 0.1 * y, 1.5 * z)),
        psi: field(g, |z, y| C64::from_polar(1.0 + 0.2 * z, 0.5 * z + y)),
    }
}

fn direction(g: &Grid) -> ParaxialState {
    ParaxialState {
        s1: field(g, |z, y| C64::new((z + y).sin(), 0.0)),
        s2: field(g, |z, y| C64::new((z - y).cos(), 0.0)),
        eta: field(g, |z, y| C64::new(z * y, 0.0)),
        phi1: field(g, |z, y| C64::new(z.cos(), y)),
        phi2: field(g, |z, y| C64::new(y.sin(), z)),
        psi: field(g, |z, y| C64::new(z * z, y * z)),
    }
}

fn forward_state(g: Grid) -> (ParaxialState, ParaxialAao) {
    let cfg = model(g, Variant::Paraxial);
    let s = RealField::from_fn(g.shape(), |i, j| 1.0 + 0.1 * (-(g.z(i) - 0.5).powi(2) / 0.05 - g.y(j).powi(2) / 0.1).exp());
    let eta = RealField::from_fn(g.shape(), |i, _| 1.0 + 0.3 * g.z(i));
    let st = forward_s(&SlownessField::new(&g, s.clone()).unwrap(), &eta, &cfg).unwrap();
    let obs = ObservationSpec::far_end(Mesh::from_grid(&g), cfg.omega_d());
    let data = observe(&st.psi, &obs).unwrap();
    let q = ParaxialState {
        s1: ComplexField::from_real(&s),
        s2: ComplexField::from_real(&s),
        eta: ComplexField::from_real(&eta),
        phi1: st.phi1.u,
        phi2: st.phi2.u,
        psi: st.psi,
    };
    (q, ParaxialAao::new(cfg, obs, Some(data)).unwrap())
}

#[test]
fn exact_forward_state_has_vanishing_residual() {
    let g = Grid::new(1.0, 41, -1.0, 1.0, 21).unwrap();
    let (q, aao) = forward_state(g);
    let res = aao.norm_y(&aao.apply(&q).unwrap());
    // scale: the same residual with the difference-frequency field removed
    let mut q_off = q.clone();
    q_off.psi = ComplexField::zeros(g.shape());
    let scale = aao.norm_y(&aao.apply(&q_off).unwrap()).total;
    assert!(res.total <= 1e-9 * scale, "{:?} vs {scale:e}", res.components);
    assert_eq!(res.components[3], 0.0);
    assert_eq!(res.components[4], 0.0);
}

#[test]
fn zero_psi_and_eta_leave_only_the_data() {
    let g = Grid::new(1.0, 11, -1.0, 1.0, 7).unwrap();
    let data: Vec<C64> = (0..g.ny).map(|j| C64::new(j as f64, 1.0)).collect();
    let aao = paraxial_aao(g, Some(data.clone()));
    let mut q = base_state(&g);
    q.psi = ComplexField::zeros(g.shape());
    q.eta = ComplexField::zeros(g.shape());
    let y = aao.apply(&q).unwrap();
    assert!(y.psi.iter().all(|v| v.norm() == 0.0));
    for (a, b) in y.obs.iter().zip(&data) {
        assert_eq!(*a, -b);
    }
}

#[test]
fn derivative_of_zero_direction_is_zero() {
    let g = Grid::new(1.0, 11, -1.0, 1.0, 7).unwrap();
    let aao = paraxial_aao(g, None);
    let y = aao.derivative_apply(&base_state(&g), &ParaxialState::zeros(&g)).unwrap();
    assert_eq!(aao.norm_y(&y).total, 0.0);
}

#[test]
fn taylor_remainder_is_second_order() {
    let g = Grid::new(1.0, 21, -1.0, 1.0, 11).unwrap();
    let aao = paraxial_aao(g, None);
    let (q0, d) = (base_state(&g), direction(&g));
    let f0 = flat(&aao.apply(&q0).unwrap());
    let fd = flat(&aao.derivative_apply(&q0, &d).unwrap());
    let ts = [1e-1, 1e-2, 1e-3];
    let errs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let ft = flat(&aao.apply(&q0.axpy(C64::new(t, 0.0), &d)).unwrap());
            (0..ft.len()).map(|k| (ft[k] - f0[k] - t * fd[k]).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect();
    assert!(loglog_slope(&ts, &errs) >= 1.9, "{errs:?}");
}

fn flat(y: &vibrox::aao::ParaxialY) -> Vec<C64> {
    [&y.beam1, &y.beam2, &y.psi, &y.init1, &y.init2, &y.obs].iter().flat_map(|v| v.iter().copied()).collect()
}

#[test]
fn remainder_vanishes_at_the_base_state() {
    let g = Grid::new(1.0, 15, -1.0, 1.0, 9).unwrap();
    let aao = paraxial_aao(g, None);
    let q0 = base_state(&g);
    let r = aao.remainder_r(&q0, &q0, FLOOR_REL).unwrap();
    assert_eq!(r, ParaxialState::zeros(&g));
}

#[test]
fn eta_only_perturbation_passes_through() {
    let g = Grid::new(1.0, 15, -1.0, 1.0, 9).unwrap();
    let aao = paraxial_aao(g, None);
    let q0 = base_state(&g);
    let mut q = q0.clone();
    q.eta = q0.eta.axpy(ONE, &field(&g, |z, y| C64::new(z - y, 0.0)));
    let r = aao.remainder_r(&q, &q0, FLOOR_REL).unwrap();
    assert!(r.s1.max_abs() == 0.0 && r.s2.max_abs() == 0.0);
    assert!(rel_diff(&r.eta.values, &q.eta.sub(&q0.eta).values) <= 1e-15);
}

#[test]
fn paraxial_range_invariance_is_second_order_in_the_mesh() {
    let mut hs = Vec::new();
    let mut res = Vec::new();
    for n in [21, 41, 81] {
        let g = Grid::new(1.0, n, -1.0, 1.0, n).unwrap();
        let aao = paraxial_aao(g, None);
        let q0 = base_state(&g);
        let q = q0.axpy(C64::new(0.05, 0.0), &direction(&g));
        let r = aao.remainder_r(&q, &q0, FLOOR_REL).unwrap();
        let lhs = aao.apply(&q).unwrap().sub(&aao.apply(&q0).unwrap());
        let rhs = aao.derivative_apply(&q0, &r).unwrap();
        res.push(aao.norm_y(&lhs.sub(&rhs)).total / aao.norm_y(&lhs).total);
        hs.push(g.dz);
    }
    assert!(loglog_slope(&hs, &res) >= 1.9, "{res:?}");
}

#[test]
fn paraxial_remainder_is_close_to_the_identity() {
    let g = Grid::new(1.0, 21, -1.0, 1.0, 11).unwrap();
    let aao = paraxial_aao(g, None);
    let (q0, d) = (base_state(&g), direction(&g));
    let (lhs0, _) = aao.remainder_closeness(&q0, &q0, FLOOR_REL).unwrap();
    assert_eq!(lhs0, 0.0);
    let ts = [1e-1, 1e-2, 1e-3];
    let e: Vec<f64> = ts
        .iter()
        .map(|&t| aao.remainder_closeness(&q0.axpy(C64::new(t, 0.0), &d), &q0, FLOOR_REL).unwrap().0)
        .collect();
    assert!(loglog_slope(&ts, &e) >= 1.9, "{e:?}");
}

#[test]
fn floor_violations_are_reported() {
    let g = Grid::new(1.0, 11, -1.0, 1.0, 7).unwrap();
    let aao = paraxial_aao(g, None);
    let mut q0 = base_state(&g);
    q0.phi1.set(3, 3, C64::new(0.0, 0.0));
    assert!(matches!(aao.remainder_r(&base_state(&g), &q0, FLOOR_REL), Err(Error::Floor { .. })));
    assert!(check_floor("x", &[ONE; 4], FLOOR_REL).is_ok());
}

#[test]
fn paraxial_penalty_sees_only_the_copy_difference() {
    let g = Grid::new(1.0, 11, -1.0, 1.0, 7).unwrap();
    let aao = paraxial_aao(g, None);
    let mut q = base_state(&g);
    q.s2 = q.s1.clone();
    assert_eq!(aao.penalty_apply(&q).1, 0.0);
    let v = field(&g, |z, y| C64::new(z * y, 0.0));
    q.s1 = q.s1.axpy(ONE, &v);
    let (d, _) = aao.penalty_apply(&q);
    assert!(rel_diff(&d.values, &v.values) <= 1e-15);
}

// ---------------------------------------------------------------------------

fn helm_aao() -> HelmAao {
    let g = Grid::new(1.0, 41, -1.0, 1.0, 21).unwrap();
    let mut cfg = model(g, Variant::Helmholtz);
    cfg.helm_nx = 16;
    cfg.helm_ny = 8;
    let fs = FrequencySet::uniform(vec![0.5, 0.8, 1.1], vec![2.0, 5.0]).unwrap();
    let t = cfg.transform().unwrap();
    helmholtz_inverse_model(&cfg, fs, &ObservationSpec::boundary(t.mesh, 1.0), None).unwrap()
}

fn helm_base(aao: &HelmAao, seed: u64) -> HelmState {
    let n = aao.n();
    let mut r = rng(seed);
    let s2: Vec<C64> = random_vec(&mut r, n).iter().map(|v| C64::new(1.0 + 0.1 * v.re, 0.0)).collect();
    let eta: Vec<C64> = random_vec(&mut r, n).iter().map(|v| C64::new(1.0 + 0.3 * v.re, 0.0)).collect();
    aao.consistent_state(vec![s2; aao.n_pairs()], eta).unwrap()
}

fn helm_random(aao: &HelmAao, seed: u64) -> HelmState {
    let (m, n) = (aao.n_pairs(), aao.n());
    let v = random_vec(&mut rng(seed), (2 * m + 1) * n);
    HelmState::unflatten(&v, m, n)
}

fn helm_flat(y: &vibrox::aao::HelmY) -> Vec<C64> {
    y.pde.iter().chain(&y.obs).flat_map(|v| v.iter().copied()).collect()
}

#[test]
fn consistent_state_has_vanishing_pde_rows() {
    let aao = helm_aao();
    let q = helm_base(&aao, 1);
    let y = aao.apply(&q).unwrap();
    let src: f64 = (0..aao.n()).map(|i| (aao.f[i] * q.eta[i]).norm()).fold(0.0, f64::max);
    for r in &y.pde {
        assert!(r.iter().map(|v| v.norm()).fold(0.0, f64::max) <= 1e-10 * src.max(1.0));
    }
}

#[test]
fn helmholtz_residual_structure() {
    let aao = helm_aao();
    let mut q = helm_base(&aao, 2);
    q.psi = vec![vec![C64::new(0.0, 0.0); aao.n()]; aao.n_pairs()];
    let y = aao.apply(&q).unwrap();
    let mw = &aao.ops.mass;
    for m in 0..aao.n_pairs() {
        let (w, kap) = (aao.fs.omega(m), aao.fs.kappa_of(m));
        for i in 0..aao.n() {
            let want = -C64::new(0.0, 1.0) * w * w * kap * mw[i] * q.eta[i] * aao.f[i];
            assert!((y.pde[m][i] - want).norm() <= 1e-14 * (1.0 + want.norm()));
        }
        assert!(y.obs[m].iter().all(|v| v.norm() == 0.0));
    }
    // kappa enters only through eta
    let mut q = helm_base(&aao, 2);
    q.eta = vec![C64::new(0.0, 0.0); aao.n()];
    let psi = q.psi[0].clone();
    for p in q.psi.iter_mut() {
        *p = psi.clone();
    }
    let y = aao.apply(&q).unwrap();
    assert_eq!(y.pde[0], y.pde[1]);
}

#[test]
fn helmholtz_taylor_remainder_is_the_bilinear_term() {
    // F(q0 + t d) - F(q0) - t F'(q0) d = t^2 (-w^2 M (ds2 dpsi))
    let aao = helm_aao();
    let q0 = helm_base(&aao, 10);
    let d = helm_random(&aao, 11);
    let f0 = helm_flat(&aao.apply(&q0).unwrap());
    let fd = helm_flat(&aao.derivative_apply(&q0, &d).unwrap());
    let md = aao.mdiag();
    let mut errs = Vec::new();
    let ts = [1e-1, 1e-2, 1e-3];
    for t in ts {
        let ft = helm_flat(&aao.apply(&q0.axpy(C64::new(t, 0.0), &d)).unwrap());
        let rem: Vec<C64> = (0..ft.len()).map(|k| ft[k] - f0[k] - t * fd[k]).collect();
        let mut want = vec![C64::new(0.0, 0.0); rem.len()];
        for m in 0..aao.n_pairs() {
            let w = aao.fs.omega(m);
            for i in 0..aao.n() {
                want[m * aao.n() + i] = -(w * w) * t * t * md[i] * d.s2[m][i] * d.psi[m][i];
            }
        }
        let scale: f64 = ft.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let gap: f64 = rem.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(gap <= 1e-11 * scale, "t = {t}: {gap:e}");
        errs.push(rem.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
    }
    assert!(loglog_slope(&ts, &errs) >= 1.9);
}

#[test]
fn helmholtz_range_invariance_is_exact() {
    let aao = helm_aao();
    let q0 = helm_base(&aao, 3);
    let zero = aao.remainder_r(&q0, &q0, FLOOR_REL).unwrap();
    assert_eq!(zero, HelmState::zeros(aao.n_pairs(), aao.n()));
    for seed in 0..5 {
        let mut dq = helm_random(&aao, 100 + seed);
        for v in dq.s2.iter_mut().chain([&mut dq.eta]) {
            for a in v.iter_mut() {
                a.im = 0.0;
            }
        }
        let q = q0.axpy(C64::new(0.1, 0.0), &dq);
        let r = aao.remainder_r(&q, &q0, FLOOR_REL).unwrap();
        let lhs = helm_flat(&aao.apply(&q).unwrap().sub(&aao.apply(&q0).unwrap()));
        let rhs = helm_flat(&aao.derivative_apply(&q0, &r).unwrap());
        assert!(rel_diff(&rhs, &lhs) <= 1e-12);
    }
}

#[test]
fn helmholtz_remainder_reductions_and_closeness() {
    let aao = helm_aao();
    let q0 = helm_base(&aao, 4);
    let dq = helm_random(&aao, 5);
    let mut q = q0.axpy(C64::new(0.1, 0.0), &dq);
    let (via, direct) = aao.remainder_closeness(&q, &q0, FLOOR_REL).unwrap();
    assert!((via - direct).abs() <= 1e-12 * direct);
    q.psi = q0.psi.clone();
    let r = aao.remainder_r(&q, &q0, FLOOR_REL).unwrap();
    let d = q.sub(&q0);
    for (a, b) in r.s2.iter().zip(&d.s2) {
        assert!(rel_diff(a, b) <= 1e-15);
    }
    assert_eq!(r.eta, d.eta);
    assert!(r.psi.iter().all(|p| p.iter().all(|v| v.norm() == 0.0)));
    let ts = [1e-1, 1e-2, 1e-3];
    let e: Vec<f64> = ts
        .iter()
        .map(|&t| aao.remainder_closeness(&q0.axpy(C64::new(t, 0.0), &dq), &q0, FLOOR_REL).unwrap().0)
        .collect();
    assert!(loglog_slope(&ts, &e) >= 1.9, "{e:?}");
}

#[test]
fn helmholtz_penalty_nullspace_and_direct_evaluation() {
    let aao = helm_aao();
    let q = helm_base(&aao, 6);
    assert!(aao.norm_z(&aao.penalty_apply(&q)) <= 1e-15 * aao.norm_x(&q));
    // perturb the kappa_1 copy at the first difference frequency by v
    let v = random_vec(&mut rng(7), aao.n());
    let mut p = q.clone();
    for (a, b) in p.s2[0].iter_mut().zip(&v) {
        *a += b;
    }
    let pen = aao.penalty_apply(&p);
    assert!(rel_diff(&pen.kappa_diff[0], &v) <= 1e-14);
    assert!(pen.kappa_diff[1].iter().all(|x| x.norm() == 0.0));
    let nl = aao.fs.omega_d.len() as f64;
    for l in 0..aao.fs.omega_d.len() {
        let want: Vec<C64> = v.iter().map(|x| if l == 0 { x * (1.0 - 1.0 / nl) } else { -x / nl }).collect();
        assert!(rel_diff(&pen.mean_diff[l], &want) <= 1e-12);
    }
}

#[test]
fn helmholtz_floor_is_checked() {
    let aao = helm_aao();
    let mut q0 = helm_base(&aao, 8);
    q0.psi[2][5] = C64::new(0.0, 0.0);
    assert!(matches!(aao.remainder_r(&helm_base(&aao, 9), &q0, FLOOR_REL), Err(Error::Floor { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn derivatives_are_linear(seed in 0u64..1000, a in -2.0f64..2.0) {
        let g = Grid::new(1.0, 11, -1.0, 1.0, 7).unwrap();
        let aao = paraxial_aao(g, None);
        let q0 = base_state(&g);
        let d1 = direction(&g);
        let mut r = rng(seed);
        let d2 = ParaxialState {
            s1: vibrox::grid::ComplexField::from_vec(g.shape(), random_vec(&mut r, g.len())).unwrap(),
            ..ParaxialState::zeros(&g)
        };
        let ca = C64::new(a, 0.2);
        let lhs = flat(&aao.derivative_apply(&q0, &d1.axpy(ca, &d2)).unwrap());
        let u = flat(&aao.derivative_apply(&q0, &d1).unwrap());
        let v = flat(&aao.derivative_apply(&q0, &d2).unwrap());
        let rhs: Vec<C64> = u.iter().zip(&v).map(|(x, y)| x + ca * y).collect();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn helmholtz_penalty_is_linear_and_vanishes_on_equal_copies(seed in 0u64..1000, a in -2.0f64..2.0) {
        let aao = helm_aao();
        let x = helm_random(&aao, seed);
        let y = helm_random(&aao, seed + 1);
        let ca = C64::new(a, 0.0);
        let pz = |p: &vibrox::aao::Penalty| -> Vec<C64> {
            p.kappa_diff.iter().chain(&p.mean_diff).flat_map(|v| v.iter().copied()).collect()
        };
        let lhs = pz(&aao.penalty_apply(&x.axpy(ca, &y)));
        let (u, v) = (pz(&aao.penalty_apply(&x)), pz(&aao.penalty_apply(&y)));
        let rhs: Vec<C64> = u.iter().zip(&v).map(|(p, q)| p + ca * q).collect();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-13);
        let mut eq = x.clone();
        for m in 1..eq.s2.len() {
            eq.s2[m] = eq.s2[0].clone();
        }
        prop_assert!(aao.norm_z(&aao.penalty_apply(&eq)) <= 1e-15 * aao.norm_x(&eq));
    }
}
