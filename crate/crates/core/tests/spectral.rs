mod common;

use common::{loglog_slope, random_vec, rel_diff, rng};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;
use vibrox::aao::FrequencySet;
use vibrox::grid::Mesh;
use vibrox::spectral::{
    check_distinctness, check_trace_independence, coefficients_ab, joint_eigensystem, linearized_injectivity_probe,
    w_independence_check, EigenSystem,
};
use vibrox::wave::{assemble_adm, OperatorTriple};

fn neumann_line(n: usize) -> OperatorTriple {
    let m = Mesh::line(0.0, 1.0, n).unwrap();
    assemble_adm(&m, &vec![0.0; n], 0.0, 0.1, 1.0).unwrap()
}

/// `[0,2] x [0,1]` with `dx = dy`, so modes (2,0) and (0,1) coincide.
fn square_cells(sigma: f64) -> OperatorTriple {
    let m = Mesh::rect(0.0, 2.0, 25, 0.0, 1.0, 13).unwrap();
    assemble_adm(&m, &vec![sigma; m.len()], 0.0, 0.1, 1.0).unwrap()
}

#[test]
fn neumann_eigenvalues_converge_at_second_order() {
    let ns = [21, 41, 81];
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in ns {
        let es = joint_eigensystem(&neumann_line(n), 4).unwrap();
        assert!(es.max_residual <= 1e-9 && es.max_orthonormality_error <= 1e-10);
        assert!(es.groups.iter().all(|g| (g.mu - 1.0).abs() <= 1e-12));
        let e = (1..4)
            .map(|j| (es.groups[j].lambda - (j as f64 * PI).powi(2)).abs() / (j as f64 * PI).powi(2))
            .fold(0.0f64, f64::max);
        hs.push(1.0 / (n - 1) as f64);
        errs.push(e);
    }
    assert!(loglog_slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn operators_reduce_for_vanishing_impedance() {
    let t = square_cells(0.0);
    let n = t.mesh.len();
    for i in 0..n {
        for j in 0..n {
            assert_eq!(t.d.get(i, j), t.a.get(i, j) * 0.1);
        }
        assert_eq!(t.m.get(i, i).re, t.mass[i]);
    }
    let m = Mesh::rect(0.0, 1.0, 6, 0.0, 1.0, 5).unwrap();
    let z = assemble_adm(&m, &vec![0.0; m.len()], 0.0, 0.0, 1.0).unwrap();
    assert_eq!(z.d.max_abs(), 0.0);
    let full = assemble_adm(&m, &vec![0.7; m.len()], 0.4, 0.2, 2.0).unwrap();
    for a in [&full.a, &full.d, &full.m] {
        assert!(a.max_abs_asymmetry() <= 1e-13 * a.max_abs());
    }
    assert!(assemble_adm(&m, &vec![-1.0; m.len()], 0.0, 0.0, 1.0).is_err());
}

#[test]
fn symmetric_mesh_produces_a_double_group() {
    let es = joint_eigensystem(&square_cells(0.0), 6).unwrap();
    assert!(es.groups.iter().any(|g| g.vectors.len() == 2));
    assert!(es.max_residual <= 1e-9 && es.max_orthonormality_error <= 1e-10);
    for g in &es.groups {
        assert!((g.rho - 0.1 * g.lambda).abs() <= 1e-10 * (1.0 + g.lambda));
    }
}

#[test]
fn distinctness_examples() {
    let es = joint_eigensystem(&neumann_line(21), 6).unwrap();
    assert!(check_distinctness(&es, 1.0).pass);
    let mut dup = es.clone();
    dup.groups.push(es.groups[2].clone());
    let r = check_distinctness(&dup, 1.0);
    assert!(!r.pass);
    assert_eq!(r.offending, Some((2, 6)));
    let single = EigenSystem {
        groups: vec![es.groups[1].clone()],
        ..es
    };
    assert!(check_distinctness(&single, 1.0).pass);
}

#[test]
fn trace_independence_examples() {
    let es = joint_eigensystem(&neumann_line(21), 5).unwrap();
    // cos(pi x) vanishes at the centre node
    let centre = check_trace_independence(&es, &[10]).unwrap();
    assert!(!centre.pass);
    assert_eq!(centre.failing_group, Some(1));
    let ends = check_trace_independence(&es, &[0, 20]).unwrap();
    assert!(ends.pass && ends.min_margin > 0.1, "{ends:?}");
    let one_end = check_trace_independence(&es, &[0]).unwrap();
    assert!(one_end.pass);
    assert!(check_trace_independence(&es, &[]).is_err());
}

#[test]
fn modal_coefficients() {
    let n = 21;
    let t = neumann_line(n);
    let es = joint_eigensystem(&t, n).unwrap();
    let mut r = rng(1);
    let f: Vec<C64> = random_vec(&mut r, n).iter().map(|v| C64::new(1.5, 0.5) + 0.3 * v).collect();
    let psi0: Vec<C64> = random_vec(&mut r, n).iter().map(|v| C64::new(1.0, -0.2) + 0.3 * v).collect();
    let zero = vec![C64::new(0.0, 0.0); n];
    let ds = random_vec(&mut r, n);
    let (a, _) = coefficients_ab(&zero, &ds, &psi0, &f, &es).unwrap();
    assert!(a.iter().flatten().all(|v| v.norm() == 0.0));

    let phi = &es.groups[1].vectors[0];
    let deta: Vec<C64> = (0..n).map(|i| phi[i] / f[i]).collect();
    let (_, b) = coefficients_ab(&zero, &deta, &psi0, &f, &es).unwrap();
    for (j, g) in b.iter().enumerate() {
        let want = if j == 1 { 1.0 } else { 0.0 };
        assert!((g[0] - want).norm() <= 1e-12, "group {j}: {}", g[0]);
    }

    let (_, b) = coefficients_ab(&zero, &ds, &psi0, &f, &es).unwrap();
    let energy: f64 = b.iter().flatten().map(|v| v.norm_sqr()).sum();
    let direct: f64 = (0..n).map(|i| t.mass[i] * (ds[i] * f[i]).norm_sqr()).sum();
    assert!((energy - direct).abs() <= 1e-12 * direct);
    assert!(coefficients_ab(&zero[1..], &ds, &psi0, &f, &es).is_err());
}

fn probe_inputs(kappa: Vec<f64>) -> (OperatorTriple, EigenSystem, FrequencySet, Vec<usize>) {
    let t = square_cells(0.0);
    let es = joint_eigensystem(&t, 8).unwrap();
    let fs = FrequencySet::uniform(vec![0.5, 0.7, 0.9, 1.1, 1.3, 1.5], kappa).unwrap();
    let gamma = t.mesh.boundary_nodes();
    (t, es, fs, gamma)
}

fn probe(t: &OperatorTriple, es: &EigenSystem, fs: &FrequencySet, gamma: &[usize]) -> vibrox::spectral::ProbeReport {
    let n = t.mesh.len();
    let psi0 = vec![vec![C64::new(1.0, 0.0); n]; fs.omega_d.len()];
    let f = vec![C64::new(1.0, 0.0); n];
    linearized_injectivity_probe(t, 1.0, es, &psi0, &f, fs, gamma).unwrap()
}

#[test]
fn equal_kappas_collapse_the_probe() {
    let (t, es, fs, gamma) = probe_inputs(vec![2.0, 5.0]);
    let two = probe(&t, &es, &fs, &gamma);
    assert!(two.smallest > 0.0 && two.kappa_separation == 3.0);
    let same = FrequencySet { kappa: vec![2.0, 2.0], ..fs };
    let one = probe(&t, &es, &same, &gamma);
    assert!(one.smallest / two.smallest <= 1e-3, "{} vs {}", one.smallest, two.smallest);
}

#[test]
fn probe_ignores_the_basis_inside_a_group() {
    let (t, es, fs, gamma) = probe_inputs(vec![2.0, 5.0]);
    let base = probe(&t, &es, &fs, &gamma);
    let mut rot = es.clone();
    let g = rot.groups.iter_mut().find(|g| g.vectors.len() == 2).unwrap();
    let (c, s) = (0.6f64, 0.8f64);
    let (u, v) = (g.vectors[0].clone(), g.vectors[1].clone());
    g.vectors[0] = u.iter().zip(&v).map(|(a, b)| c * a - s * b).collect();
    g.vectors[1] = u.iter().zip(&v).map(|(a, b)| s * a + c * b).collect();
    let turned = probe(&t, &rot, &fs, &gamma);
    for (a, b) in base.singular_values.iter().zip(&turned.singular_values) {
        assert!((a - b).abs() <= 1e-10 * base.largest);
    }
}

#[test]
fn w_independence_examples() {
    let es = joint_eigensystem(&neumann_line(41), 8).unwrap();
    let one = w_independence_check(&es.groups[..1], &[0.7], 1.0);
    assert!(one.full_rank && one.rank == 1);
    let dup = vec![es.groups[2].clone(), es.groups[2].clone()];
    assert!(!w_independence_check(&dup, &[0.5, 0.9, 1.3], 1.0).full_rank);
    let five = w_independence_check(&es.groups[..5], &[0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7], 1.0);
    assert!(five.full_rank, "{five:?}");
    assert!(five.condition.is_finite() && five.condition >= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coefficients_are_linear(seed in 0u64..1000, k in -2.0f64..2.0) {
        let n = 15;
        let es = joint_eigensystem(&neumann_line(n), 6).unwrap();
        let mut r = rng(seed);
        let (x1, x2, e1, e2, p, f) = (
            random_vec(&mut r, n), random_vec(&mut r, n), random_vec(&mut r, n),
            random_vec(&mut r, n), random_vec(&mut r, n), random_vec(&mut r, n),
        );
        let ck = C64::new(k, 0.4);
        let comb = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(u, v)| u + ck * v).collect::<Vec<_>>();
        let (a, b) = coefficients_ab(&comb(&x1, &x2), &comb(&e1, &e2), &p, &f, &es).unwrap();
        let (a1, b1) = coefficients_ab(&x1, &e1, &p, &f, &es).unwrap();
        let (a2, b2) = coefficients_ab(&x2, &e2, &p, &f, &es).unwrap();
        let flat = |v: Vec<Vec<C64>>| v.into_iter().flatten().collect::<Vec<_>>();
        prop_assert!(rel_diff(&flat(a), &comb(&flat(a1), &flat(a2))) <= 1e-12);
        prop_assert!(rel_diff(&flat(b), &comb(&flat(b1), &flat(b2))) <= 1e-12);
    }
}
