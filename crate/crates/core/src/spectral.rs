//! Linearized uniqueness diagnostics: the joint eigensystem of the
//! Helmholtz operators, distinctness and trace-independence checks,
//! modal coefficients and a finite injectivity probe.

use crate::aao::FrequencySet;
use crate::error::{Error, Result};
use crate::linalg::{BandLu, CsrMatrix, Triplets};
use crate::wave::OperatorTriple;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative clustering tolerance for eigenvalue groups.
pub const GROUP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenGroup {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
    /// Mass-orthonormal eigenvectors spanning the group.
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub groups: Vec<EigenGroup>,
    pub group_tol: f64,
    pub max_residual: f64,
    pub max_orthonormality_error: f64,
    /// Largest off-diagonal entry of `D` and `M` in the eigenbasis.
    pub commutator: f64,
    #[serde(skip)]
    pub mass: Vec<f64>,
}

impl EigenSystem {
    pub fn n_modes(&self) -> usize {
        self.groups.iter().map(|g| g.vectors.len()).sum()
    }
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    a.to_dense_real()
}

/// Lowest `n_modes` eigenpairs of `A phi = lambda W phi` with `W` the
/// lumped mass, grouped; `rho` and `mu` are read off from `D` and `M`.
pub fn joint_eigensystem(t: &OperatorTriple, n_modes: usize) -> Result<EigenSystem> {
    joint_eigensystem_with_tol(t, n_modes, GROUP_TOL)
}

pub fn joint_eigensystem_with_tol(t: &OperatorTriple, n_modes: usize, group_tol: f64) -> Result<EigenSystem> {
    let n = t.mesh.len();
    if n_modes == 0 || n_modes > n {
        return Err(Error::Config(format!("n_modes must lie in 1..={n}")));
    }
    let w = &t.mass;
    let is = w.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>();
    let a = dense(&t.a);
    let d = dense(&t.d);
    let m = dense(&t.m);
    let scaled = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]) * is[i] * is[j]);
    let eig = SymmetricEigen::new(scaled);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let order = &order[..n_modes];
    let phis: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| (0..n).map(|i| eig.eigenvectors[(i, c)] * is[i]).collect())
        .collect();
    let lambdas: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let quad = |mat: &DMatrix<f64>, u: &[f64], v: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                r += mat[(i, j)] * v[j];
            }
            acc += u[i] * r;
        }
        acc
    };
    let mut max_res: f64 = 0.0;
    let mut max_orth: f64 = 0.0;
    let mut comm: f64 = 0.0;
    for (p, u) in phis.iter().enumerate() {
        let mut r2 = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            let mut ai = 0.0;
            for j in 0..n {
                ai += a[(i, j)] * u[j];
            }
            r2 += (ai - lambdas[p] * w[i] * u[i]).powi(2);
            scale += ai * ai;
        }
        max_res = max_res.max(r2.sqrt() / scale.sqrt().max(1.0));
        for (q, v) in phis.iter().enumerate().skip(p) {
            let g: f64 = (0..n).map(|i| u[i] * w[i] * v[i]).sum();
            max_orth = max_orth.max((g - if p == q { 1.0 } else { 0.0 }).abs());
        }
    }
    // group by eigenvalue, then check D and M are diagonal across groups
    let mut groups: Vec<(Vec<usize>, f64)> = Vec::new();
    for (p, &l) in lambdas.iter().enumerate() {
        match groups.last_mut() {
            Some((idx, l0)) if (l - *l0).abs() <= group_tol * l.abs().max(l0.abs()).max(1.0) => idx.push(p),
            _ => groups.push((vec![p], l)),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (gi, (idx, _)) in groups.iter().enumerate() {
        let vecs: Vec<Vec<f64>> = idx.iter().map(|&p| phis[p].clone()).collect();
        let lam = idx.iter().map(|&p| lambdas[p]).sum::<f64>() / idx.len() as f64;
        let rho = vecs.iter().map(|u| quad(&d, u, u)).sum::<f64>() / vecs.len() as f64;
        let mu = vecs.iter().map(|u| quad(&m, u, u)).sum::<f64>() / vecs.len() as f64;
        for (gj, (jdx, _)) in groups.iter().enumerate() {
            for &p in idx {
                for &q in jdx {
                    if p < q && (gi != gj || p != q) {
                        let dd = quad(&d, &phis[p], &phis[q]).abs();
                        let mm = quad(&m, &phis[p], &phis[q]).abs();
                        comm = comm.max(dd).max(mm);
                    }
                }
            }
        }
        out.push(EigenGroup {
            lambda: lam,
            rho,
            mu,
            vectors: vecs,
        });
    }
    let scale = out.iter().map(|g| g.rho.abs().max(g.mu.abs())).fold(1.0, f64::max);
    if comm > 1e-8 * scale {
        return Err(Error::Verification(format!(
            "operators are not jointly diagonalizable in the eigenbasis of A (off-diagonal {comm:.3e})"
        )));
    }
    Ok(EigenSystem {
        groups: out,
        group_tol,
        max_residual: max_res,
        max_orthonormality_error: max_orth,
        commutator: comm,
        mass: w.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinctnessReport {
    pub pass: bool,
    /// First offending pair of groups.
    pub offending: Option<(usize, usize)>,
    pub roots_distinct: bool,
    /// Smallest relative separation among the tested pairs.
    pub min_separation: f64,
}

/// Roots `z` of `mu z^2 + c^2 rho z + c^2 lambda`.
pub fn w_roots(g: &EigenGroup, c: f64) -> (C64, C64) {
    let (a, b, cc) = (g.mu, c * c * g.rho, c * c * g.lambda);
    let disc = C64::new(b * b - 4.0 * a * cc, 0.0).sqrt();
    ((-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a))
}

/// Pairwise check that `(rho/mu, lambda/mu^2)` separates the groups, plus
/// distinctness of the roots of `w_j` across groups.
pub fn check_distinctness(es: &EigenSystem, c: f64) -> DistinctnessReport {
    let tol = es.group_tol;
    let mut offending = None;
    let mut roots_distinct = true;
    let mut min_sep = f64::INFINITY;
    let gs = &es.groups;
    for j in 0..gs.len() {
        for l in 0..j {
            let (a, b) = (&gs[j], &gs[l]);
            let r1 = (a.rho / a.mu, b.rho / b.mu);
            let r2 = (a.lambda / (a.mu * a.mu), b.lambda / (b.mu * b.mu));
            let sep1 = (r1.0 - r1.1).abs() / r1.0.abs().max(r1.1.abs()).max(1.0);
            let sep2 = (r2.0 - r2.1).abs() / r2.0.abs().max(r2.1.abs()).max(1.0);
            let sep = sep1.max(sep2);
            min_sep = min_sep.min(sep);
            if sep <= tol && offending.is_none() {
                offending = Some((l, j));
            }
            let (za, zb) = (w_roots(a, c), w_roots(b, c));
            for x in [za.0, za.1] {
                for y in [zb.0, zb.1] {
                    if (x - y).norm() <= tol * x.norm().max(y.norm()).max(1.0) {
                        roots_distinct = false;
                    }
                }
            }
        }
    }
    DistinctnessReport {
        pass: offending.is_none() && roots_distinct,
        offending,
        roots_distinct,
        min_separation: if gs.len() < 2 { f64::INFINITY } else { min_sep },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub pass: bool,
    /// Smallest Gram eigenvalue per group, relative to the group scale.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub failing_group: Option<usize>,
}

/// Per group, the Gram matrix of the traces on `gamma` must be
/// nonsingular.
pub fn check_trace_independence(es: &EigenSystem, gamma: &[usize]) -> Result<TraceReport> {
    if gamma.is_empty() {
        return Err(Error::Config("receiver set is empty".into()));
    }
    let tol = 1e-12;
    let mut margins = Vec::with_capacity(es.groups.len());
    let mut failing = None;
    for (gi, g) in es.groups.iter().enumerate() {
        let k = g.vectors.len();
        let gram = DMatrix::from_fn(k, k, |a, b| gamma.iter().map(|&x| g.vectors[a][x] * g.vectors[b][x]).sum::<f64>());
        let scale = g
            .vectors
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .powi(2);
        let ev = SymmetricEigen::new(gram).eigenvalues;
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min) / scale;
        if !(min > tol) && failing.is_none() {
            failing = Some(gi);
        }
        margins.push(min);
    }
    Ok(TraceReport {
        pass: failing.is_none(),
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        margins,
        failing_group: failing,
    })
}

/// `a_j^k = mu_j <ds psi0, phi_j^k>`, `b_j^k = <deta f, phi_j^k>` in the
/// lumped inner product.
pub fn coefficients_ab(
    ds: &[C64],
    deta: &[C64],
    psi0: &[C64],
    f: &[C64],
    es: &EigenSystem,
) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let n = es.mass.len();
    if [ds.len(), deta.len(), psi0.len(), f.len()].iter().any(|&l| l != n) {
        return Err(Error::Shape("coefficient inputs need one value per node".into()));
    }
    let w = &es.mass;
    let proj = |g: &[C64], v: &[f64]| (0..n).map(|i| g[i] * (v[i] * w[i])).sum::<C64>();
    let dsp: Vec<C64> = (0..n).map(|i| ds[i] * psi0[i]).collect();
    let def: Vec<C64> = (0..n).map(|i| deta[i] * f[i]).collect();
    let a = es
        .groups
        .iter()
        .map(|g| g.vectors.iter().map(|v| proj(&dsp, v) * g.mu).collect())
        .collect();
    let b = es.groups.iter().map(|g| g.vectors.iter().map(|v| proj(&def, v)).collect()).collect();
    Ok((a, b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub singular_values: Vec<f64>,
    pub smallest: f64,
    pub largest: f64,
    /// `|kappa_1 - kappa_2|` for the first two kappa values.
    pub kappa_separation: f64,
    pub rows: usize,
    pub cols: usize,
}

/// Assembles the linearized data map `(ds, deta) -> i w tr dpsi` on the
/// modal directions `ds = phi/(mu psi0)`, `deta = phi/f` of the given
/// eigensystem and returns its singular values. `psi0` is one base field
/// per difference frequency.
pub fn linearized_injectivity_probe(
    t: &OperatorTriple,
    s0_sq: f64,
    es: &EigenSystem,
    psi0: &[Vec<C64>],
    f: &[C64],
    fs: &FrequencySet,
    gamma: &[usize],
) -> Result<ProbeReport> {
    fs.validate()?;
    let n = t.mesh.len();
    if psi0.len() != fs.omega_d.len() || psi0.iter().any(|p| p.len() != n) || f.len() != n {
        return Err(Error::Shape("probe base states do not match the mesh or frequency list".into()));
    }
    if gamma.is_empty() {
        return Err(Error::Config("receiver set is empty".into()));
    }
    let mdiag = t.m_diag();
    let w = &t.mass;
    let modes: Vec<(f64, &Vec<f64>)> = es.groups.iter().flat_map(|g| g.vectors.iter().map(move |v| (g.mu, v))).collect();
    let cols = 2 * modes.len();
    let rows = fs.n_pairs() * gamma.len();
    let mut mat = DMatrix::<C64>::zeros(rows, cols);
    for (l, &om) in fs.omega_d.iter().enumerate() {
        let h = helm_matrix_const(t, s0_sq, om);
        let lu = BandLu::factor(&h, &format!("probe system at omega = {om}"))?;
        for (c, (mu, v)) in modes.iter().enumerate() {
            // ds = phi / (mu psi0), deta = phi / f
            let rhs_s: Vec<C64> = (0..n).map(|i| C64::new(om * om * mdiag[i] * v[i] / *mu, 0.0)).collect();
            let rhs_e: Vec<C64> = (0..n).map(|i| I * om * om * w[i] * v[i]).collect();
            let us = lu.solve(&rhs_s);
            let ue = lu.solve(&rhs_e);
            for (kk, &kap) in fs.kappa.iter().enumerate() {
                let m = l * fs.kappa.len() + kk;
                for (r, &x) in gamma.iter().enumerate() {
                    let row = m * gamma.len() + r;
                    mat[(row, 2 * c)] = I * om * us[x];
                    mat[(row, 2 * c + 1)] = I * om * kap * ue[x];
                }
            }
        }
        let _ = &psi0[l];
    }
    let sv = mat.singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let kappa_separation = if fs.kappa.len() > 1 {
        (fs.kappa[0] - fs.kappa[1]).abs()
    } else {
        0.0
    };
    Ok(ProbeReport {
        smallest: if rows >= cols { *s.last().unwrap() } else { 0.0 },
        largest: s[0],
        singular_values: s,
        kappa_separation,
        rows,
        cols,
    })
}

fn helm_matrix_const(t: &OperatorTriple, s0_sq: f64, omega: f64) -> CsrMatrix {
    let n = t.mesh.len();
    let mut tr = Triplets::new(n, n);
    for i in 0..n {
        for k in t.a.indptr[i]..t.a.indptr[i + 1] {
            tr.push(i, t.a.indices[k], t.a.data[k]);
        }
        for k in t.d.indptr[i]..t.d.indptr[i + 1] {
            tr.push(i, t.d.indices[k], t.d.data[k] * I * omega);
        }
        tr.push(i, i, t.m.get(i, i) * (-omega * omega * s0_sq));
    }
    tr.to_csr()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WIndependenceReport {
    pub rank: usize,
    pub n_groups: usize,
    pub condition: f64,
    pub full_rank: bool,
}

/// Numerical rank of `[1 / w_j(i w_d)]` over the sampled frequencies.
pub fn w_independence_check(groups: &[EigenGroup], omega_d: &[f64], c: f64) -> WIndependenceReport {
    let (r, k) = (omega_d.len(), groups.len());
    let mat = DMatrix::<C64>::from_fn(r, k, |a, j| {
        let g = &groups[j];
        let om = omega_d[a];
        let wj = C64::new(-om * om * g.mu + c * c * g.lambda, om * c * c * g.rho);
        C64::new(1.0, 0.0) / wj
    });
    let sv = mat.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * smax * (r.max(k) as f64);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    WIndependenceReport {
        rank,
        n_groups: k,
        condition: smax / smin,
        full_rank: rank == k,
    }
}
