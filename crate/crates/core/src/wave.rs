//! Difference-frequency wave solvers: the perturbed Schrödinger two-point
//! problem on the beam grid and the impedance Helmholtz problem on a
//! tensor mesh, with their admissibility checks and energy diagnostics.

use crate::beam::Impedance;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, Mesh, RealField, SlownessField};
use crate::linalg::{BandLu, CsrMatrix, Triplets};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

// ---------------------------------------------------------------------------
// Poincaré–Friedrichs constants and smallness

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfConstants {
    pub c0: f64,
    pub c1: f64,
}

/// `(C0, C1)` from the smallest eigenvalue of `K + B_sigma` against the
/// lumped mass on the transverse axis, so `C0 = C1 = 1/lambda_min`.
pub fn estimate_pf_constants(grid: &Grid, sigma: (f64, f64)) -> Result<PfConstants> {
    estimate_pf_constants_with_ratio(grid, sigma, 1.0)
}

/// Same with stiffness `K + theta B`, giving `C1 = 1/lambda`, `C0 = theta/lambda`.
pub fn estimate_pf_constants_with_ratio(grid: &Grid, sigma: (f64, f64), theta: f64) -> Result<PfConstants> {
    let ny = grid.ny;
    if ny < 2 {
        return Err(Error::Config("PF estimate needs Ny >= 2".into()));
    }
    if !(sigma.0 > 0.0 && sigma.1 > 0.0 && theta > 0.0) {
        return Err(Error::Config("PF estimate needs positive impedance and ratio".into()));
    }
    let mut a = DMatrix::<f64>::zeros(ny, ny);
    let inv = 1.0 / grid.dy;
    for e in 0..ny - 1 {
        a[(e, e)] += inv;
        a[(e + 1, e + 1)] += inv;
        a[(e, e + 1)] -= inv;
        a[(e + 1, e)] -= inv;
    }
    a[(0, 0)] += theta * sigma.0;
    a[(ny - 1, ny - 1)] += theta * sigma.1;
    let w: Vec<f64> = (0..ny).map(|j| grid.wy(j).sqrt()).collect();
    for r in 0..ny {
        for c in 0..ny {
            a[(r, c)] /= w[r] * w[c];
        }
    }
    let eig = SymmetricEigen::new(a);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) {
        return Err(Error::Solver(format!("PF eigenproblem degenerate (lambda_min = {lmin})")));
    }
    Ok(PfConstants {
        c0: theta / lmin,
        c1: 1.0 / lmin,
    })
}

/// `|v|^2`, `|sqrt(sigma) v|^2` on the ends and `|v'|^2` on the transverse axis.
pub fn pf_terms(grid: &Grid, sigma: (f64, f64), v: &[C64]) -> (f64, f64, f64) {
    let ny = grid.ny;
    let l2: f64 = (0..ny).map(|j| grid.wy(j) * v[j].norm_sqr()).sum();
    let bd = sigma.0 * v[0].norm_sqr() + sigma.1 * v[ny - 1].norm_sqr();
    let gr: f64 = (0..ny - 1).map(|e| (v[e + 1] - v[e]).norm_sqr() / grid.dy).sum();
    (l2, bd, gr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    /// `sup |ctilde - dz s|`
    pub s_diff: f64,
    pub s_max: f64,
    pub cond1: bool,
    pub cond2: bool,
    pub margin1: f64,
    pub margin2: f64,
    /// Admissible Young parameters when both conditions hold.
    pub mu_interval: Option<(f64, f64)>,
}

impl SmallnessReport {
    pub fn passes(&self) -> bool {
        self.cond1 && self.cond2
    }
}

pub fn check_smallness(slowness: &SlownessField, omega: f64, b: f64, pf: PfConstants) -> SmallnessReport {
    let s_diff = slowness
        .ctilde
        .values
        .iter()
        .zip(&slowness.dz_s.values)
        .fold(0.0f64, |m, (c, d)| m.max((c - d).abs()));
    let s_max = slowness.s.max_abs();
    smallness_from_sups(s_diff, s_max, omega, b, pf)
}

pub fn smallness_from_sups(s_diff: f64, s_max: f64, omega: f64, b: f64, pf: PfConstants) -> SmallnessReport {
    let margin1 = 1.0 - pf.c0 * s_diff;
    let margin2 = b * margin1 - 2.0 * pf.c1 * omega * omega * s_max * s_max;
    let cond1 = margin1 > 0.0;
    let cond2 = margin2 > 0.0;
    let lo = 2.0 * omega * omega * s_max * s_max / b;
    let hi = margin1 / pf.c1;
    SmallnessReport {
        s_diff,
        s_max,
        cond1,
        cond2,
        margin1,
        margin2,
        mu_interval: if cond1 && cond2 && lo < hi { Some((lo, hi)) } else { None },
    }
}

// ---------------------------------------------------------------------------
// Perturbed Schrödinger two-point problem

#[derive(Clone, Debug)]
pub struct PerturbedProblem {
    pub grid: Grid,
    pub slowness: SlownessField,
    pub b: f64,
    pub omega: f64,
    pub f: ComplexField,
    pub sigma0: Vec<f64>,
    pub sigma_l: Vec<f64>,
    pub sigma: Impedance,
}

impl PerturbedProblem {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(self.b > 0.0) {
            return Err(Error::Config(format!("b must be positive, got {}", self.b)));
        }
        if self.omega == 0.0 || !self.omega.is_finite() {
            return Err(Error::Config("frequency must be nonzero".into()));
        }
        self.f.check_shape(g.shape(), "perturbed source")?;
        self.slowness.s.check_shape(g.shape(), "perturbed slowness")?;
        if self.sigma0.len() != g.ny || self.sigma_l.len() != g.ny {
            return Err(Error::Shape("end impedances need one value per y node".into()));
        }
        if self.sigma0.iter().chain(&self.sigma_l).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("end impedances must be positive".into()));
        }
        if self.sigma.lo.len() != g.nz || self.sigma.hi.len() != g.nz {
            return Err(Error::Shape("lateral impedance needs one value per z node".into()));
        }
        if self.sigma.lo.iter().chain(&self.sigma.hi).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("lateral impedance must be positive".into()));
        }
        Ok(())
    }

    /// PF constants with the smallest lateral impedance along z.
    pub fn pf_constants(&self) -> Result<PfConstants> {
        let lo = self.sigma.lo.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.sigma.hi.iter().cloned().fold(f64::INFINITY, f64::min);
        estimate_pf_constants(&self.grid, (lo, hi))
    }
}

/// Assembles the weak form of the perturbed problem with coefficient
/// fields `s`, `ctilde` (bilinear, unconjugated test functions).
pub fn assemble_perturbed(
    grid: &Grid,
    s: &RealField,
    ctilde: &RealField,
    b: f64,
    omega: f64,
    sigma0: &[f64],
    sigma_l: &[f64],
    sigma: &Impedance,
) -> CsrMatrix {
    let (nz, ny) = (grid.nz, grid.ny);
    let n = grid.len();
    let mut t = Triplets::new(n, n);
    for i in 0..nz {
        for j in 0..ny {
            let k = grid.idx(i, j);
            let (wz, wy) = (grid.wz(i), grid.wy(j));
            let mut d = I * (omega * wz * wy * ctilde.at(i, j));
            // first-order term: 2 i omega s dz u, trapezoid per element
            let c = I * (2.0 * omega * wy * s.at(i, j) * 0.5);
            if i == 0 {
                t.push(k, grid.idx(1, j), c);
                d -= c;
            } else if i == nz - 1 {
                d += c;
                t.push(k, grid.idx(nz - 2, j), -c);
            } else {
                t.push(k, grid.idx(i + 1, j), c);
                t.push(k, grid.idx(i - 1, j), -c);
            }
            if j == 0 {
                d += I * (omega * wz * sigma.lo[i]);
            }
            if j == ny - 1 {
                d += I * (omega * wz * sigma.hi[i]);
            }
            if i == 0 {
                d += I * (omega * b * wy * sigma0[j]);
            }
            if i == nz - 1 {
                d += I * (omega * b * wy * sigma_l[j]);
            }
            t.push(k, k, d);
            if j + 1 < ny {
                let cy = wz / grid.dy;
                let k2 = grid.idx(i, j + 1);
                t.push(k, k, re(cy));
                t.push(k2, k2, re(cy));
                t.push(k, k2, re(-cy));
                t.push(k2, k, re(-cy));
            }
            if i + 1 < nz {
                let cz = b * wy / grid.dz;
                let k2 = grid.idx(i + 1, j);
                t.push(k, k, re(cz));
                t.push(k2, k2, re(cz));
                t.push(k, k2, re(-cz));
                t.push(k2, k, re(-cz));
            }
        }
    }
    t.to_csr()
}

/// Coefficient part of the perturbed operator, `i w W ctilde u + 2 i w s W dz u`,
/// with complex coefficients and the same stencil as [`assemble_perturbed`].
pub fn perturbed_coefficient_apply(grid: &Grid, s: &[C64], ct: &[C64], omega: f64, u: &[C64]) -> Vec<C64> {
    let (nz, ny) = (grid.nz, grid.ny);
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for i in 0..nz {
        for j in 0..ny {
            let k = grid.idx(i, j);
            let du = if i == 0 {
                u[grid.idx(1, j)] - u[k]
            } else if i == nz - 1 {
                u[k] - u[grid.idx(nz - 2, j)]
            } else {
                u[grid.idx(i + 1, j)] - u[grid.idx(i - 1, j)]
            };
            out[k] = I * omega * (grid.wz(i) * grid.wy(j) * ct[k] * u[k] + grid.wy(j) * s[k] * du);
        }
    }
    out
}

/// Lumped load vector `W f` on a grid.
pub fn load_vector(grid: &Grid, f: &ComplexField) -> Vec<C64> {
    (0..grid.len())
        .map(|k| f.values[k] * (grid.wz(k / grid.ny) * grid.wy(k % grid.ny)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct PerturbedSolution {
    pub u: ComplexField,
    pub residual: f64,
    pub smallness: SmallnessReport,
    pub pf: PfConstants,
}

pub fn solve_perturbed_schrodinger(p: &PerturbedProblem, strict: bool) -> Result<PerturbedSolution> {
    p.validate()?;
    let pf = p.pf_constants()?;
    let smallness = check_smallness(&p.slowness, p.omega.abs(), p.b, pf);
    if !smallness.passes() {
        if strict {
            return Err(Error::Smallness(format!(
                "margins {:.3e}, {:.3e} (need both > 0)",
                smallness.margin1, smallness.margin2
            )));
        }
        log::warn!(
            "smallness conditions not met (margins {:.3e}, {:.3e}); solving anyway",
            smallness.margin1,
            smallness.margin2
        );
    }
    let a = assemble_perturbed(
        &p.grid,
        &p.slowness.s,
        &p.slowness.ctilde,
        p.b,
        p.omega,
        &p.sigma0,
        &p.sigma_l,
        &p.sigma,
    );
    let rhs = load_vector(&p.grid, &p.f);
    let lu = BandLu::factor(&a, "perturbed Schroedinger system")?;
    let x = lu.solve(&rhs);
    let residual = crate::linalg::relative_residual(&a, &x, &rhs);
    let u = ComplexField::from_vec(p.grid.shape(), x)?;
    if !u.is_finite() {
        return Err(Error::Solver("perturbed solve produced non-finite values".into()));
    }
    Ok(PerturbedSolution {
        u,
        residual,
        smallness,
        pf,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct H1BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub applicable: bool,
    pub holds: bool,
    pub mu: f64,
    pub s_diff_discrete: f64,
}

/// Discrete `|u|^2_{L2}`, `|grad_y u|^2`, `|dz u|^2`.
pub fn h1_parts(grid: &Grid, u: &ComplexField) -> (f64, f64, f64) {
    let (nz, ny) = (grid.nz, grid.ny);
    let mut l2 = 0.0;
    let mut gy = 0.0;
    let mut gz = 0.0;
    for i in 0..nz {
        for j in 0..ny {
            l2 += grid.wz(i) * grid.wy(j) * u.at(i, j).norm_sqr();
            if j + 1 < ny {
                gy += grid.wz(i) * (u.at(i, j + 1) - u.at(i, j)).norm_sqr() / grid.dy;
            }
            if i + 1 < nz {
                gz += grid.wy(j) * (u.at(i + 1, j) - u.at(i, j)).norm_sqr() / grid.dz;
            }
        }
    }
    (l2, gy, gz)
}

/// A-priori H1 bound for the discrete perturbed solution, with the Young
/// parameter at the midpoint of the admissible interval. Needs
/// `b sigma0 >= s(0, .)` pointwise; otherwise `applicable` is false.
pub fn perturbed_h1_bound(u: &ComplexField, p: &PerturbedProblem, pf: PfConstants) -> H1BoundReport {
    let g = &p.grid;
    let (nz, ny) = (g.nz, g.ny);
    let om = p.omega.abs();
    let s = &p.slowness;
    // row sums of the discrete (ctilde - dz s) form over the lumped mass
    let mut sd = 0.0f64;
    for i in 0..nz {
        for j in 0..ny {
            let w = g.wz(i) * g.wy(j);
            let mut r = (w * s.ctilde.at(i, j)).abs();
            if i + 1 < nz {
                r += 0.5 * g.wy(j) * (s.s.at(i, j) - s.s.at(i + 1, j)).abs();
            }
            if i > 0 {
                r += 0.5 * g.wy(j) * (s.s.at(i - 1, j) - s.s.at(i, j)).abs();
            }
            sd = sd.max(r / w);
        }
    }
    let smax = s.s.max_abs();
    let applicable_ends = (0..ny).all(|j| p.b * p.sigma0[j] >= s.s.at(0, j));
    let (l2, gy, gz) = h1_parts(g, u);
    let lhs = l2 + gy + gz;
    let fnorm = (0..g.len())
        .map(|k| g.wz(k / ny) * g.wy(k % ny) * p.f.values[k].norm_sqr())
        .sum::<f64>()
        .sqrt();
    let lo = 2.0 * om * om * smax * smax / p.b;
    let hi = (1.0 - pf.c0 * sd) / pf.c1;
    if !(applicable_ends && lo < hi) {
        return H1BoundReport {
            lhs,
            rhs: f64::INFINITY,
            applicable: false,
            holds: true,
            mu: f64::NAN,
            s_diff_discrete: sd,
        };
    }
    let mu = 0.5 * (lo + hi);
    let kf = 1.0 + pf.c0 / (pf.c1 * om);
    let r = kf * kf * fnorm * fnorm / (2.0 * mu);
    let ub = r / (hi - mu);
    let zb = r / (p.b - 2.0 * om * om * smax * smax / mu);
    let xb = 2.0 * om * smax * (zb * ub).sqrt() + kf * fnorm * ub.sqrt() + pf.c0 / pf.c1 * sd * ub;
    let rhs = ub + zb + xb;
    H1BoundReport {
        lhs,
        rhs,
        applicable: true,
        holds: lhs <= rhs,
        mu,
        s_diff_discrete: sd,
    }
}

// ---------------------------------------------------------------------------
// Helmholtz

/// Volume/boundary operators of the generalized Helmholtz form.
#[derive(Clone, Debug)]
pub struct OperatorTriple {
    pub mesh: Mesh,
    pub a: CsrMatrix,
    pub d: CsrMatrix,
    /// Lumped, hence diagonal.
    pub m: CsrMatrix,
    /// Plain lumped mass (no boundary part).
    pub mass: Vec<f64>,
}

impl OperatorTriple {
    pub fn m_diag(&self) -> Vec<f64> {
        (0..self.m.nrows).map(|k| self.m.get(k, k).re).collect()
    }
}

/// Stiffness `int grad u . grad v` with nodal quadrature on the mesh.
pub fn stiffness(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.len();
    let mut t = Triplets::new(n, n);
    for i in 0..mesh.nx {
        for j in 0..mesh.ny {
            let k = mesh.idx(i, j);
            if i + 1 < mesh.nx {
                let c = mesh.wy(j) / mesh.dx;
                let k2 = mesh.idx(i + 1, j);
                t.push(k, k, re(c));
                t.push(k2, k2, re(c));
                t.push(k, k2, re(-c));
                t.push(k2, k, re(-c));
            }
            if mesh.dim == 2 && j + 1 < mesh.ny {
                let c = mesh.wx(i) / mesh.dy;
                let k2 = mesh.idx(i, j + 1);
                t.push(k, k, re(c));
                t.push(k2, k2, re(c));
                t.push(k, k2, re(-c));
                t.push(k2, k, re(-c));
            }
        }
    }
    t.to_csr()
}

fn add_diag(a: &CsrMatrix, scale_a: C64, diag: &[C64]) -> CsrMatrix {
    let n = a.nrows;
    let mut t = Triplets::new(n, n);
    for i in 0..n {
        for k in a.indptr[i]..a.indptr[i + 1] {
            t.push(i, a.indices[k], a.data[k] * scale_a);
        }
        t.push(i, i, diag[i]);
    }
    t.to_csr()
}

pub fn assemble_adm(mesh: &Mesh, sigma: &[f64], beta: f64, b: f64, s0_sq: f64) -> Result<OperatorTriple> {
    if sigma.len() != mesh.len() {
        return Err(Error::Shape("impedance needs one value per mesh node".into()));
    }
    if sigma.iter().any(|v| *v < 0.0) || beta < 0.0 || b < 0.0 {
        return Err(Error::Config("A, D, M coefficients must be nonnegative".into()));
    }
    if !(s0_sq > 0.0) {
        return Err(Error::Config("background slowness must be positive".into()));
    }
    let k = stiffness(mesh);
    let wb = mesh.boundary_weights();
    let mass = mesh.weights();
    let n = mesh.len();
    let a = add_diag(&k, re(1.0), &(0..n).map(|i| re(wb[i] * beta)).collect::<Vec<_>>());
    let d = add_diag(&k, re(b), &(0..n).map(|i| re(wb[i] * (sigma[i] + b * beta))).collect::<Vec<_>>());
    let mut mt = Triplets::new(n, n);
    for i in 0..n {
        mt.push(i, i, re(mass[i] + wb[i] * sigma[i] * b / s0_sq));
    }
    Ok(OperatorTriple {
        mesh: *mesh,
        a,
        d,
        m: mt.to_csr(),
        mass,
    })
}

#[derive(Clone, Debug)]
pub struct HelmholtzProblem {
    pub mesh: Mesh,
    pub s2: RealField,
    pub omega: f64,
    pub f: ComplexField,
    /// Boundary data per node (ignored off the boundary).
    pub h: Vec<C64>,
    /// Impedance per node (only boundary values matter).
    pub sigma: Vec<f64>,
    pub beta: f64,
    pub b_damp: f64,
    pub s0_sq: f64,
}

impl HelmholtzProblem {
    /// Plain impedance problem `-w^2 s2 u - Lap u = f`, `du/dn + i w sigma u = h`.
    pub fn impedance(mesh: Mesh, s2: RealField, omega: f64, f: ComplexField, sigma: f64) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            s2,
            omega,
            f,
            h: vec![C64::new(0.0, 0.0); n],
            sigma: vec![sigma; n],
            beta: 0.0,
            b_damp: 0.0,
            s0_sq: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sh = self.mesh.shape();
        self.s2.check_shape(sh, "Helmholtz s2")?;
        self.f.check_shape(sh, "Helmholtz source")?;
        if self.h.len() != self.mesh.len() || self.sigma.len() != self.mesh.len() {
            return Err(Error::Shape("boundary data and impedance need one value per node".into()));
        }
        if self.s2.values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("squared slowness must be positive".into()));
        }
        if !self.omega.is_finite() || self.omega == 0.0 {
            return Err(Error::Config("Helmholtz frequency must be nonzero".into()));
        }
        Ok(())
    }

    pub fn operators(&self) -> Result<OperatorTriple> {
        assemble_adm(&self.mesh, &self.sigma, self.beta, self.b_damp, self.s0_sq)
    }

    pub fn load(&self) -> Vec<C64> {
        let wb = self.mesh.boundary_weights();
        (0..self.mesh.len())
            .map(|k| self.f.values[k] * self.mesh.weight(k) + self.h[k] * wb[k])
            .collect()
    }
}

/// `-w^2 M diag(s2) + A + i w D`.
pub fn helmholtz_matrix(ops: &OperatorTriple, s2: &[f64], omega: f64) -> CsrMatrix {
    let n = ops.a.nrows;
    let mut t = Triplets::new(n, n);
    for i in 0..n {
        for k in ops.a.indptr[i]..ops.a.indptr[i + 1] {
            t.push(i, ops.a.indices[k], ops.a.data[k]);
        }
        for k in ops.d.indptr[i]..ops.d.indptr[i + 1] {
            t.push(i, ops.d.indices[k], ops.d.data[k] * I * omega);
        }
        t.push(i, i, ops.m.get(i, i) * (-omega * omega * s2[i]));
    }
    t.to_csr()
}

#[derive(Clone, Debug)]
pub struct HelmholtzSolution {
    pub u: ComplexField,
    pub residual: f64,
}

pub fn solve_helmholtz(p: &HelmholtzProblem) -> Result<HelmholtzSolution> {
    p.validate()?;
    let ops = p.operators()?;
    let a = helmholtz_matrix(&ops, &p.s2.values, p.omega);
    let rhs = p.load();
    let lu = BandLu::factor(&a, &format!("Helmholtz system at omega = {}", p.omega))?;
    let x = lu.solve(&rhs);
    let residual = crate::linalg::relative_residual(&a, &x, &rhs);
    if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) || residual > 1e-6 {
        return Err(Error::Singular {
            context: format!("Helmholtz system at omega = {} (residual {residual:e})", p.omega),
            pivot: 0.0,
        });
    }
    Ok(HelmholtzSolution {
        u: ComplexField::from_vec(p.mesh.shape(), x)?,
        residual,
    })
}

/// A factored Helmholtz operator for repeated right-hand sides.
pub struct HelmholtzFactor {
    pub matrix: CsrMatrix,
    lu: BandLu,
}

impl HelmholtzFactor {
    pub fn new(ops: &OperatorTriple, s2: &[f64], omega: f64) -> Result<Self> {
        let matrix = helmholtz_matrix(ops, s2, omega);
        let lu = BandLu::factor(&matrix, &format!("Helmholtz system at omega = {omega}"))?;
        Ok(Self { matrix, lu })
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.lu.solve(rhs)
    }

    /// Solves with the adjoint (conjugate transpose) matrix. The matrix is
    /// complex symmetric, so `A^H x = b` is `conj(A^{-1} conj(b))`.
    pub fn solve_adjoint(&self, rhs: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = rhs.iter().map(|v| v.conj()).collect();
        self.lu.solve(&c).into_iter().map(|v| v.conj()).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HelmholtzResiduals {
    /// Real line: `u^H A u - w^2 |u|_{M s2}^2 - Re(u^H F)`.
    pub re_line: f64,
    /// Imaginary line: `w u^H D u - Im(u^H F)`.
    pub im_line: f64,
    pub re_rel: f64,
    pub im_rel: f64,
    /// Rellich-type identity (only meaningful for h = 0).
    pub rellich: f64,
    pub rellich_rel: f64,
    /// `min x.nu` over the boundary after recentering.
    pub c_omega: f64,
}

pub fn helmholtz_energy_residuals(u: &ComplexField, p: &HelmholtzProblem) -> Result<HelmholtzResiduals> {
    let ops = p.operators()?;
    let rhs = p.load();
    let au = ops.a.matvec(&u.values);
    let du = ops.d.matvec(&u.values);
    let q: f64 = crate::linalg::cdot(&u.values, &au).re;
    let dq: f64 = crate::linalg::cdot(&u.values, &du).re;
    let mq: f64 = (0..p.mesh.len())
        .map(|k| ops.m.get(k, k).re * p.s2.values[k] * u.values[k].norm_sqr())
        .sum();
    let uf = crate::linalg::cdot(&u.values, &rhs);
    let om = p.omega;
    let re_terms = [q, -om * om * mq, -uf.re];
    let im_terms = [om * dq, -uf.im];
    let re_line: f64 = re_terms.iter().sum();
    let im_line: f64 = im_terms.iter().sum();
    let scale = |t: &[f64]| t.iter().map(|v| v.abs()).sum::<f64>();
    let (rellich, rscale, c_omega) = rellich_residual(u, p);
    let safe = |a: f64, s: f64| if s == 0.0 { a.abs() } else { a.abs() / s };
    Ok(HelmholtzResiduals {
        re_line,
        im_line,
        re_rel: safe(re_line, scale(&re_terms)),
        im_rel: safe(im_line, scale(&im_terms)),
        rellich,
        rellich_rel: safe(rellich, rscale),
        c_omega,
    })
}

/// Nodal gradient by central differences with one-sided second-order ends.
pub fn nodal_gradient(mesh: &Mesh, u: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let n = mesh.len();
    let d1 = |m: usize, h: f64, get: &dyn Fn(usize) -> C64, i: usize| -> C64 {
        if m == 2 {
            (get(1) - get(0)) / h
        } else if i == 0 {
            (4.0 * get(1) - 3.0 * get(0) - get(2)) / (2.0 * h)
        } else if i == m - 1 {
            (3.0 * get(m - 1) - 4.0 * get(m - 2) + get(m - 3)) / (2.0 * h)
        } else {
            (get(i + 1) - get(i - 1)) / (2.0 * h)
        }
    };
    let mut gx = vec![C64::new(0.0, 0.0); n];
    let mut gy = vec![C64::new(0.0, 0.0); n];
    for i in 0..mesh.nx {
        for j in 0..mesh.ny {
            gx[mesh.idx(i, j)] = d1(mesh.nx, mesh.dx, &|a| u[mesh.idx(a, j)], i);
            if mesh.dim == 2 {
                gy[mesh.idx(i, j)] = d1(mesh.ny, mesh.dy, &|b| u[mesh.idx(i, b)], j);
            }
        }
    }
    (gx, gy)
}

/// Boundary edges as (node list with 1-D trapezoid weights, outward normal).
fn boundary_edges(mesh: &Mesh) -> Vec<(Vec<(usize, f64)>, (f64, f64))> {
    if mesh.dim == 1 {
        return vec![
            (vec![(0, 1.0)], (-1.0, 0.0)),
            (vec![(mesh.nx - 1, 1.0)], (1.0, 0.0)),
        ];
    }
    let bottom = (0..mesh.nx).map(|i| (mesh.idx(i, 0), mesh.wx(i))).collect();
    let top = (0..mesh.nx).map(|i| (mesh.idx(i, mesh.ny - 1), mesh.wx(i))).collect();
    let left = (0..mesh.ny).map(|j| (mesh.idx(0, j), mesh.wy(j))).collect();
    let right = (0..mesh.ny).map(|j| (mesh.idx(mesh.nx - 1, j), mesh.wy(j))).collect();
    vec![
        (bottom, (0.0, -1.0)),
        (top, (0.0, 1.0)),
        (left, (-1.0, 0.0)),
        (right, (1.0, 0.0)),
    ]
}

/// Residual of the identity obtained by testing with `x . grad u` (recentered
/// coordinates), its scale, and `min x.nu`.
fn rellich_residual(u: &ComplexField, p: &HelmholtzProblem) -> (f64, f64, f64) {
    let mesh = &p.mesh;
    let d = mesh.dim as f64;
    let om = p.omega;
    let (cx, cy) = mesh.center();
    let pos = |k: usize| (mesh.x(k / mesh.ny) - cx, mesh.y(k % mesh.ny) - cy);
    let (gx, gy) = nodal_gradient(mesh, &u.values);
    let s: Vec<C64> = p.s2.values.iter().map(|v| re(v.sqrt())).collect();
    let (sx, sy) = nodal_gradient(mesh, &s);
    let n = mesh.len();
    let mut vol1 = 0.0;
    let mut vol2 = 0.0;
    let mut grad2 = 0.0;
    let mut rhs = 0.0;
    for k in 0..n {
        let w = mesh.weight(k);
        let (x, y) = pos(k);
        let su2 = p.s2.values[k] * u.values[k].norm_sqr();
        vol1 += w * su2;
        vol2 += w * (x * sx[k].re + y * sy[k].re) / s[k].re * su2;
        grad2 += w * (gx[k].norm_sqr() + gy[k].norm_sqr());
        let xg = x * gx[k].conj() + y * gy[k].conj();
        rhs += w * (p.f.values[k] * xg).re;
    }
    let mut bd_su = 0.0;
    let mut bd_grad = 0.0;
    let mut bd_imp = C64::new(0.0, 0.0);
    let mut c_omega = f64::INFINITY;
    for (nodes, (nx, ny)) in boundary_edges(mesh) {
        for (k, w) in nodes {
            let (x, y) = pos(k);
            let xn = x * nx + y * ny;
            c_omega = c_omega.min(xn);
            bd_su += w * p.s2.values[k] * u.values[k].norm_sqr() * xn;
            bd_grad += w * (gx[k].norm_sqr() + gy[k].norm_sqr()) * xn;
            let xg = x * gx[k].conj() + y * gy[k].conj();
            bd_imp += w * p.sigma[k] * u.values[k] * xg;
        }
    }
    let terms = [
        0.5 * d * om * om * vol1,
        om * om * vol2,
        -0.5 * om * om * bd_su,
        (1.0 - 0.5 * d) * grad2,
        0.5 * bd_grad,
        om * (I * bd_imp).re,
        -rhs,
    ];
    let res: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    (res, scale, c_omega)
}

/// Discrete `|D^2 u|^2` from second differences (interior uxx/uyy, cell uxy).
pub fn hessian_norm_sq(mesh: &Mesh, u: &[C64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..mesh.nx {
        for j in 0..mesh.ny {
            let k = mesh.idx(i, j);
            let w = mesh.weight(k);
            if i > 0 && i + 1 < mesh.nx {
                let uxx = (u[mesh.idx(i + 1, j)] - 2.0 * u[k] + u[mesh.idx(i - 1, j)]) / (mesh.dx * mesh.dx);
                acc += w * uxx.norm_sqr();
            }
            if mesh.dim == 2 && j > 0 && j + 1 < mesh.ny {
                let uyy = (u[mesh.idx(i, j + 1)] - 2.0 * u[k] + u[mesh.idx(i, j - 1)]) / (mesh.dy * mesh.dy);
                acc += w * uyy.norm_sqr();
            }
        }
    }
    if mesh.dim == 2 {
        for i in 0..mesh.nx - 1 {
            for j in 0..mesh.ny - 1 {
                let uxy = (u[mesh.idx(i + 1, j + 1)] - u[mesh.idx(i + 1, j)] - u[mesh.idx(i, j + 1)] + u[mesh.idx(i, j)])
                    / (mesh.dx * mesh.dy);
                acc += 2.0 * mesh.dx * mesh.dy * uxy.norm_sqr();
            }
        }
    }
    acc
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega: f64,
    pub omega2_u2: f64,
    pub grad2: f64,
    pub hess2_over_omega2: f64,
    pub f2: f64,
    /// `omega^2 |u|^2 / ((1 + 1/omega^2) |f|^2)`
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub c_fit: f64,
    pub holds: bool,
}

pub fn frequency_sweep_bound(template: &HelmholtzProblem, omegas: &[f64]) -> Result<SweepTable> {
    if template.sigma.iter().zip(template.mesh.boundary_weights()).any(|(s, w)| w > 0.0 && !(*s > 0.0)) {
        return Err(Error::Config("frequency sweep needs sigma bounded away from zero".into()));
    }
    let mut sorted = omegas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rows = Vec::new();
    for &om in &sorted {
        let mut p = template.clone();
        p.omega = om;
        let sol = solve_helmholtz(&p)?;
        let m = &p.mesh;
        let u = &sol.u.values;
        let u2: f64 = (0..m.len()).map(|k| m.weight(k) * u[k].norm_sqr()).sum();
        let f2: f64 = (0..m.len()).map(|k| m.weight(k) * p.f.values[k].norm_sqr()).sum();
        let k = stiffness(m);
        let grad2 = crate::linalg::cdot(u, &k.matvec(u)).re;
        let h2 = hessian_norm_sq(m, u);
        rows.push(SweepRow {
            omega: om,
            omega2_u2: om * om * u2,
            grad2,
            hess2_over_omega2: h2 / (om * om),
            f2,
            ratio: om * om * u2 / ((1.0 + 1.0 / (om * om)) * f2),
        });
    }
    let c_fit = rows.first().map(|r| r.ratio).unwrap_or(0.0);
    let holds = rows.iter().all(|r| r.ratio <= c_fit * (1.0 + 1e-12));
    Ok(SweepTable { rows, c_fit, holds })
}
