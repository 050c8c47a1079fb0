//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use common::{field, gaussian_profile, loglog_slope, min_pair_slope, model, random_field, random_vec, rel_diff, rng};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;
use vibrox::aao::{FrequencySet, HelmAao, HelmState, ParaxialAao, ParaxialState, FLOOR_REL};
use vibrox::beam::{beam_energy_residuals, march_beam, BeamProblem, Impedance};
use vibrox::bench::{
    cmd_forward, cmd_invert, cmd_spectral, cmd_synth, cmd_verify, spectral_summary, strictly_decreasing, RunOptions,
};
use vibrox::forward::{forward_ds, forward_s, ObservationSpec, StateTriple, Variant};
use vibrox::grid::{ComplexField, Grid, Mesh, RealField, SlownessField};
use vibrox::newton::helmholtz_inverse_model;
use vibrox::scenario::{default_scenario, Scenario};
use vibrox::spectral::joint_eigensystem;
use vibrox::wave::{
    assemble_adm, check_smallness, estimate_pf_constants, helmholtz_energy_residuals, pf_terms, smallness_from_sups,
    solve_helmholtz, HelmholtzProblem,
};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn scenario(name: &str) -> Scenario {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&p).unwrap()
}

// ---------------------------------------------------------------------------
// 1. beam energy identities

fn bump_slowness(g: &Grid, amp: f64) -> SlownessField {
    let s = RealField::from_fn(g.shape(), |i, j| {
        1.0 + amp * (-(g.z(i) - 0.5).powi(2) / 0.05 - g.y(j).powi(2) / 0.1).exp()
    });
    SlownessField::new(g, s).unwrap()
}

fn beam_problem(g: Grid) -> BeamProblem {
    let f = field(&g, |z, y| C64::new((3.0 * z).sin() * (-y * y).exp(), 0.5 * z * y));
    BeamProblem::new(g, bump_slowness(&g, 0.2), 10.0, f, gaussian_profile(&g, 0.3), Impedance::constant(g.nz, 1.5))
        .unwrap()
}

fn c1_energy() -> Outcome {
    let t = Instant::now();
    let mut hs = Vec::new();
    let mut cons = Vec::new();
    let mut exact = 0.0;
    for (nz, ny) in [(51, 26), (101, 51), (201, 101)] {
        let g = Grid::new(1.0, nz, -1.0, 1.0, ny).unwrap();
        let p = beam_problem(g);
        let r = beam_energy_residuals(&march_beam(&p).unwrap(), &p);
        exact = r.exact_max_rel();
        hs.push(g.dz);
        cons.push(r.consistency_max_rel());
    }
    let order = min_pair_slope(&hs, &cons);
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        exact <= 1e-8 && order >= 1.9 && secs <= 30.0,
        format!("201x101 residual {exact:.2e} (<= 1e-8), decay order {order:.2} (>= 1.9), {secs:.1} s (<= 30)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Helmholtz weak-form identities

fn c2_helmholtz_identities() -> Outcome {
    let t = Instant::now();
    let m = Mesh::rect(0.0, 2.0, 141, -0.5, 0.5, 71).unwrap();
    let s2 = RealField::from_fn(m.shape(), |i, j| 1.0 + 0.2 * (m.x(i) * m.y(j)).sin());
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut p = HelmholtzProblem::impedance(m, s2.clone(), 5.0, random_field(&mut r, m.shape()), 1.0);
        p.b_damp = 0.1;
        p.beta = 0.3;
        let u = solve_helmholtz(&p).unwrap().u;
        let e = helmholtz_energy_residuals(&u, &p).unwrap();
        worst = worst.max(e.re_rel).max(e.im_rel);
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-10 && secs <= 20.0,
        format!("{} nodes, 10 sources: worst {worst:.2e} (<= 1e-10), {secs:.1} s (<= 20)", m.len()),
    )
}

// ---------------------------------------------------------------------------
// 3. manufactured solutions

/// `exp(i w z) cos(pi y)` on `(0,1)^2` with `s = 1 + 0.3 z`.
fn beam_mms_error(n: usize) -> f64 {
    let (om, sig) = (5.0, 1.5);
    let g = Grid::new(1.0, n, 0.0, 1.0, n).unwrap();
    let sf = SlownessField::new(&g, RealField::from_fn(g.shape(), |i, _| 1.0 + 0.3 * g.z(i))).unwrap();
    let exact = |z: f64, y: f64| C64::from_polar(1.0, om * z) * (PI * y).cos();
    let mut f = field(&g, |z, y| (-2.0 * om * om * (1.0 + 0.3 * z) + PI * PI + I * om * 0.3) * exact(z, y));
    for i in 0..g.nz {
        for j in [0, g.ny - 1] {
            let v = f.at(i, j) + I * om * sig * exact(g.z(i), g.y(j)) / g.wy(j);
            f.set(i, j, v);
        }
    }
    let h: Vec<C64> = (0..g.ny).map(|j| exact(0.0, g.y(j))).collect();
    let p = BeamProblem::new(g, sf, om, f, h, Impedance::constant(g.nz, sig)).unwrap();
    let b = march_beam(&p).unwrap();
    let mut err = 0.0;
    for i in 0..g.nz {
        for j in 0..g.ny {
            err += g.wz(i) * g.wy(j) * (b.u.at(i, j) - exact(g.z(i), g.y(j))).norm_sqr();
        }
    }
    err.sqrt()
}

/// `exp(-i w x) cos(pi y)` on `(0,2) x (0,1)`, unit slowness and impedance.
fn helmholtz_mms_error(ny: usize) -> f64 {
    let om = 4.0;
    let m = Mesh::rect(0.0, 2.0, 2 * ny - 1, 0.0, 1.0, ny).unwrap();
    let exact = |x: f64, y: f64| C64::from_polar(1.0, -om * x) * (PI * y).cos();
    let f = ComplexField::from_fn(m.shape(), |i, j| PI * PI * exact(m.x(i), m.y(j)));
    let mut p = HelmholtzProblem::impedance(m, RealField::constant(m.shape(), 1.0), om, f, 1.0);
    let wb = m.boundary_weights();
    for i in 0..m.nx {
        for j in 0..m.ny {
            let k = m.idx(i, j);
            if wb[k] == 0.0 {
                continue;
            }
            let u = exact(m.x(i), m.y(j));
            // du/dn vanishes on y = 0, 1 and on x = 2; it is i w u on x = 0
            let mut load = C64::new(0.0, 0.0);
            if j == 0 || j + 1 == m.ny {
                load += m.wx(i) * I * om * u;
            }
            if i == 0 {
                load += m.wy(j) * 2.0 * I * om * u;
            }
            p.h[k] = load / wb[k];
        }
    }
    let u = solve_helmholtz(&p).unwrap().u;
    let e: f64 = (0..m.len())
        .map(|k| m.weight(k) * (u.values[k] - exact(m.x(k / m.ny), m.y(k % m.ny))).norm_sqr())
        .sum();
    e.sqrt()
}

fn c3_manufactured() -> Outcome {
    let ns = [21, 41, 81, 161];
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let eb: Vec<f64> = ns.iter().map(|&n| beam_mms_error(n)).collect();
    let beam = loglog_slope(&h, &eb);
    let nh = [11, 21, 41, 81];
    let hh: Vec<f64> = nh.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let ehm: Vec<f64> = nh.iter().map(|&n| helmholtz_mms_error(n)).collect();
    let helm = loglog_slope(&hh, &ehm);
    Outcome::new(beam >= 1.9 && helm >= 1.9, format!("L2 slopes: beam {beam:.2}, Helmholtz {helm:.2} (>= 1.9)"))
}

// ---------------------------------------------------------------------------
// 4. derivatives

fn stack(s: &StateTriple) -> Vec<C64> {
    let mut v = s.phi1.u.values.clone();
    v.extend_from_slice(&s.phi2.u.values);
    v.extend_from_slice(&s.psi.values);
    v
}

fn forward_fd_slope(variant: Variant) -> f64 {
    let g = Grid::new(1.0, 51, -1.0, 1.0, 21).unwrap();
    let cfg = model(g, variant);
    let s0 = bump_slowness(&g, 0.1);
    let e0 = RealField::from_fn(g.shape(), |i, j| 0.5 + 0.3 * (2.0 * g.z(i)).sin() * (-g.y(j).powi(2)).exp());
    let ds = RealField::from_fn(g.shape(), |i, j| 0.2 * (3.0 * g.z(i)).sin() * (-g.y(j).powi(2) / 0.2).exp());
    let de = RealField::from_fn(g.shape(), |i, j| 0.3 * (g.z(i) * g.y(j)).cos());
    let base = forward_s(&s0, &e0, &cfg).unwrap();
    let lin = stack(&forward_ds(&s0, &e0, &ds, &de, &base, &cfg).unwrap());
    let b0 = stack(&base);
    let ts = [1e-2, 1e-3, 1e-4];
    let errs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let s1 = SlownessField::new(&g, RealField::from_fn(g.shape(), |i, j| s0.s.at(i, j) + t * ds.at(i, j))).unwrap();
            let e1 = RealField::from_fn(g.shape(), |i, j| e0.at(i, j) + t * de.at(i, j));
            let b1 = stack(&forward_s(&s1, &e1, &cfg).unwrap());
            let q: Vec<C64> = b1.iter().zip(&b0).map(|(a, b)| (a - b) / t).collect();
            rel_diff(&q, &lin)
        })
        .collect();
    min_pair_slope(&ts, &errs)
}

fn paraxial_aao(g: Grid) -> ParaxialAao {
    let cfg = model(g, Variant::Paraxial);
    let obs = ObservationSpec::far_end(Mesh::from_grid(&g), cfg.omega_d());
    ParaxialAao::new(cfg, obs, None).unwrap()
}

fn paraxial_base(g: &Grid) -> ParaxialState {
    ParaxialState {
        s1: field(g, |z, y| C64::new(1.0 + 0.1 * z * y, 0.0)),
        s2: field(g, |z, _| C64::new(1.0 + 0.05 * z, 0.0)),
        eta: field(g, |_, y| C64::new(1.0 + 0.2 * y * y, 0.0)),
        phi1: field(g, |z, y| C64::from_polar(1.0 + 0.1 * y, 2.0 * z)),
        phi2: field(g, |z, y| C64::from_polar(1.0 - 0.1 * y, 1.5 * z)),
        psi: field(g, |z, y| C64::from_polar(1.0 + 0.2 * z, 0.5 * z + y)),
    }
}

fn paraxial_direction(g: &Grid) -> ParaxialState {
    ParaxialState {
        s1: field(g, |z, y| C64::new((z + y).sin(), 0.0)),
        s2: field(g, |z, y| C64::new((z - y).cos(), 0.0)),
        eta: field(g, |z, y| C64::new(z * y, 0.0)),
        phi1: field(g, |z, y| C64::new(z.cos(), y)),
        phi2: field(g, |z, y| C64::new(y.sin(), z)),
        psi: field(g, |z, y| C64::new(z * z, y * z)),
    }
}

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
    let mut r = rng(seed);
    let s2: Vec<C64> = random_vec(&mut r, aao.n()).iter().map(|v| C64::new(1.0 + 0.1 * v.re, 0.0)).collect();
    let eta: Vec<C64> = random_vec(&mut r, aao.n()).iter().map(|v| C64::new(1.0 + 0.3 * v.re, 0.0)).collect();
    aao.consistent_state(vec![s2; aao.n_pairs()], eta).unwrap()
}

fn helm_random(aao: &HelmAao, seed: u64) -> HelmState {
    let (m, n) = (aao.n_pairs(), aao.n());
    let mut q = HelmState::unflatten(&random_vec(&mut rng(seed), (2 * m + 1) * n), m, n);
    for v in q.s2.iter_mut().chain([&mut q.eta]) {
        for a in v.iter_mut() {
            a.im = 0.0;
        }
    }
    q
}

fn taylor_slope(rem: impl Fn(f64) -> f64) -> f64 {
    let ts = [1e-1, 1e-2, 1e-3];
    let e: Vec<f64> = ts.iter().map(|&t| rem(t)).collect();
    loglog_slope(&ts, &e)
}

fn c4_derivatives() -> Outcome {
    let fd_p = forward_fd_slope(Variant::Paraxial);
    let fd_h = forward_fd_slope(Variant::Helmholtz);

    let g = Grid::new(1.0, 21, -1.0, 1.0, 11).unwrap();
    let pa = paraxial_aao(g);
    let (q0, d) = (paraxial_base(&g), paraxial_direction(&g));
    let f0 = pa.apply(&q0).unwrap();
    let tp = taylor_slope(|t| {
        let td = ParaxialState::zeros(&g).axpy(C64::new(t, 0.0), &d);
        let ft = pa.apply(&q0.axpy(ONE, &td)).unwrap();
        pa.norm_y(&ft.sub(&f0).sub(&pa.derivative_apply(&q0, &td).unwrap())).total
    });

    let ha = helm_aao();
    let (h0, hd) = (helm_base(&ha, 10), helm_random(&ha, 11));
    let g0 = ha.apply(&h0).unwrap();
    let th = taylor_slope(|t| {
        let td = hd.scale(t);
        let ft = ha.apply(&h0.axpy(ONE, &td)).unwrap();
        ha.norm_y(&ft.sub(&g0).sub(&ha.derivative_apply(&h0, &td).unwrap())).total
    });
    Outcome::new(
        fd_p.min(fd_h) >= 0.9 && tp.min(th) >= 1.9,
        format!(
            "forward_dS quotient slope paraxial {fd_p:.2} / Helmholtz {fd_h:.2} (>= 0.9); \
             F' Taylor slope paraxial {tp:.2} / Helmholtz {th:.2} (>= 1.9)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. range invariance

fn c5_range_invariance() -> Outcome {
    let ha = helm_aao();
    let q0 = helm_base(&ha, 3);
    let mut helm = 0.0f64;
    for seed in 0..5 {
        let q = q0.axpy(C64::new(0.1, 0.0), &helm_random(&ha, 100 + seed));
        helm = helm.max(vibrox::bench::range_invariance_residual(&ha, &q, &q0).unwrap());
    }

    let mut hs = Vec::new();
    let mut res = Vec::new();
    for n in [21, 41, 81] {
        let g = Grid::new(1.0, n, -1.0, 1.0, n).unwrap();
        let pa = paraxial_aao(g);
        let p0 = paraxial_base(&g);
        let q = p0.axpy(C64::new(0.05, 0.0), &paraxial_direction(&g));
        let r = pa.remainder_r(&q, &p0, FLOOR_REL).unwrap();
        let lhs = pa.apply(&q).unwrap().sub(&pa.apply(&p0).unwrap());
        let rhs = pa.derivative_apply(&p0, &r).unwrap();
        res.push(pa.norm_y(&lhs.sub(&rhs)).total / pa.norm_y(&lhs).total);
        hs.push(g.dz);
    }
    let parax = loglog_slope(&hs, &res);

    let ts = [1e-1, 1e-2, 1e-3];
    let dq = helm_random(&ha, 5);
    let eh: Vec<f64> = ts
        .iter()
        .map(|&t| ha.remainder_closeness(&q0.axpy(C64::new(t, 0.0), &dq), &q0, FLOOR_REL).unwrap().0)
        .collect();
    let g = Grid::new(1.0, 21, -1.0, 1.0, 11).unwrap();
    let pa = paraxial_aao(g);
    let (p0, d) = (paraxial_base(&g), paraxial_direction(&g));
    let ep: Vec<f64> = ts
        .iter()
        .map(|&t| pa.remainder_closeness(&p0.axpy(C64::new(t, 0.0), &d), &p0, FLOOR_REL).unwrap().0)
        .collect();
    let close = loglog_slope(&ts, &eh).min(loglog_slope(&ts, &ep));
    Outcome::new(
        helm <= 1e-11 && parax >= 1.9 && close >= 1.9,
        format!(
            "Helmholtz residual {helm:.2e} (<= 1e-11), paraxial mesh order {parax:.2} (>= 1.9), \
             closeness slope {close:.2} (>= 1.9)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. frozen Newton convergence

fn c6_newton(out: &Path) -> Outcome {
    let t = Instant::now();
    let sc = scenario("newton_64x32.json");
    let s = cmd_invert(&sc, &RunOptions::new(out.join("c6"))).unwrap();
    let run = &s.runs[0];
    let e: Vec<f64> = run.history.iter().filter_map(|r| r.err_rel).collect();
    let fin = run.final_err_rel.unwrap();
    let dec = strictly_decreasing(&run.history, 5);
    let secs = t.elapsed().as_secs_f64();
    let shown: Vec<String> = e.iter().map(|v| format!("{:.2}%", 100.0 * v)).collect();
    Outcome::new(
        dec && fin <= 0.02 && secs <= 300.0,
        format!(
            "start {:.1}%, errors [{}], strictly decreasing n=1..5: {dec}, final {:.3}% (<= 2%), {secs:.0} s (<= 300)",
            100.0 * s.initial_distance_rel,
            shown.join(", "),
            100.0 * fin
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. regularization

fn c7_ladder(out: &Path) -> Outcome {
    let sc = scenario("delta_ladder.json");
    let mut opts = RunOptions::new(out.join("c7"));
    opts.deltas = vec![0.02, 0.01, 0.005];
    opts.seed = 7;
    let s = cmd_invert(&sc, &opts).unwrap();
    let errs: Vec<f64> = s.runs.iter().map(|r| r.final_err_rel.unwrap()).collect();
    let ns: Vec<usize> = s.runs.iter().map(|r| r.n_star).collect();
    let err_ok = errs.windows(2).all(|w| w[1] <= w[0]);
    let n_ok = ns.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = errs.iter().map(|v| format!("{:.2}%", 100.0 * v)).collect();
    Outcome::new(
        err_ok && n_ok,
        format!("delta 2%, 1%, 0.5%: n* {ns:?}, stopped errors [{}]", shown.join(", ")),
    )
}

// ---------------------------------------------------------------------------
// 8. PF constants and smallness

fn c8_smallness() -> Outcome {
    let sc = default_scenario();
    let g = sc.grid().unwrap();
    let sig = (sc.model.sigma0, sc.model.sigma_l);
    let pf = estimate_pf_constants(&g, sig).unwrap();
    let mut r = rng(8);
    let mut violations = 0;
    for _ in 0..100 {
        let (l2, bd, gr) = pf_terms(&g, sig, &random_vec(&mut r, g.ny));
        if l2 > (pf.c0 * bd + pf.c1 * gr) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    let mut exact = true;
    for (s0, om, b) in [(1.0, 1.0, 0.2), (1.3, 0.5, 1.0), (0.7, 2.0, 0.05)] {
        let s = SlownessField::constant(&g, s0).unwrap();
        let rep = check_smallness(&s, om, b, pf);
        exact &= rep == smallness_from_sups(0.0, s0, om, b, pf)
            && rep.s_diff == 0.0
            && rep.margin1 == 1.0
            && rep.margin2 == b - 2.0 * pf.c1 * om * om * s0 * s0;
    }
    Outcome::new(
        violations == 0 && exact,
        format!(
            "C0 {:.4}, C1 {:.4}: {violations} violations in 100 random fields; constant-slowness reduction exact: {exact}",
            pf.c0, pf.c1
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. spectral

fn c9_spectral() -> Outcome {
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [21, 41, 81] {
        let m = Mesh::line(0.0, 1.0, n).unwrap();
        let t = assemble_adm(&m, &vec![0.0; n], 0.0, 0.1, 1.0).unwrap();
        let es = joint_eigensystem(&t, 4).unwrap();
        let e = (1..4)
            .map(|j| {
                let want = (j as f64 * PI).powi(2);
                (es.groups[j].lambda - want).abs() / want
            })
            .fold(0.0f64, f64::max);
        hs.push(1.0 / (n - 1) as f64);
        errs.push(e);
    }
    let order = loglog_slope(&hs, &errs);
    let sp = spectral_summary(&default_scenario()).unwrap();
    let b = default_scenario().spectral.b_damp;
    let rho = sp
        .groups
        .iter()
        .map(|g| (g.rho - b * g.lambda).abs() / (1.0 + g.lambda))
        .fold(0.0f64, f64::max);
    let pass = order >= 1.9
        && rho <= 1e-10
        && sp.distinctness.pass
        && sp.trace_boundary.pass
        && !sp.trace_nodal_point.pass
        && sp.collapse_ratio <= 1e-3;
    Outcome::new(
        pass,
        format!(
            "eigenvalue order {order:.2} (>= 1.9); rho-lambda-mu {rho:.1e}; distinct {}, boundary traces {}, \
             nodal-point traces {} (expected false), equal-kappa collapse {:.1e} (<= 1e-3)",
            sp.distinctness.pass, sp.trace_boundary.pass, sp.trace_nodal_point.pass, sp.collapse_ratio
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. determinism

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
    }
    out.sort();
    out
}

fn c10_determinism(out: &Path) -> Outcome {
    let mut sc = default_scenario();
    sc.inversion.config.max_iter = 2;
    let runs: Vec<_> = (0..2)
        .map(|k| {
            let dir = out.join(format!("c10_{k}"));
            let mut opts = RunOptions::new(&dir);
            opts.deltas = vec![0.01];
            opts.seed = 3;
            cmd_forward(&sc, &opts).unwrap();
            cmd_synth(&sc, &opts).unwrap();
            cmd_invert(&sc, &opts).unwrap();
            cmd_verify(&sc, &opts).unwrap();
            cmd_spectral(&sc, &opts).unwrap();
            snapshot(&dir)
        })
        .collect();
    let same = runs[0] == runs[1];
    Outcome::new(
        same && !runs[0].is_empty(),
        format!("forward, synth, invert, verify, spectral: {} files byte-identical: {same}", runs[0].len()),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("energy identities", Box::new(c1_energy)),
        ("Helmholtz identities", Box::new(c2_helmholtz_identities)),
        ("manufactured solutions", Box::new(c3_manufactured)),
        ("derivatives", Box::new(c4_derivatives)),
        ("range invariance", Box::new(c5_range_invariance)),
        ("Newton convergence", Box::new(|| c6_newton(out))),
        ("regularization", Box::new(|| c7_ladder(out))),
        ("PF and smallness", Box::new(c8_smallness)),
        ("spectral", Box::new(c9_spectral)),
        ("determinism", Box::new(|| c10_determinism(out))),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Outcome::new(false, "panicked".into()));
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name} [{:.1} s]: {}", k + 1, t.elapsed().as_secs_f64(), o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
