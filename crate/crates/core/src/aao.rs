//! All-at-once residuals, frozen derivatives, range-invariance remainders
//! and the penalty operator, for the paraxial system and for the
//! multi-frequency Helmholtz model.

use crate::error::{Error, Result};
use crate::forward::{observe, ModelConfig, ObservationSpec};
use crate::grid::{cumulative_trapezoid_z, discrete_gradient_z, ComplexField, Grid, Mesh};
use crate::linalg::{cdot, csr_combine, csr_diag, gram_product, CsrMatrix, Triplets};
use crate::wave::{assemble_perturbed, h1_parts, perturbed_coefficient_apply, stiffness, OperatorTriple};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Default base-state floor relative to the field RMS.
pub const FLOOR_REL: f64 = 1e-3;

pub fn check_floor(component: &str, values: &[C64], floor_rel: f64) -> Result<()> {
    let rms = (values.iter().map(|v| v.norm_sqr()).sum::<f64>() / values.len().max(1) as f64).sqrt();
    let min = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    let floor = floor_rel * rms;
    if !(min >= floor) || rms == 0.0 {
        return Err(Error::Floor {
            component: component.into(),
            min,
            floor,
        });
    }
    Ok(())
}

fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(a: &[C64], t: C64, b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

// ===========================================================================
// Paraxial system

#[derive(Clone, Debug, PartialEq)]
pub struct ParaxialState {
    pub s1: ComplexField,
    pub s2: ComplexField,
    pub eta: ComplexField,
    pub phi1: ComplexField,
    pub phi2: ComplexField,
    pub psi: ComplexField,
}

impl ParaxialState {
    pub fn zeros(grid: &Grid) -> Self {
        let z = ComplexField::zeros(grid.shape());
        Self {
            s1: z.clone(),
            s2: z.clone(),
            eta: z.clone(),
            phi1: z.clone(),
            phi2: z.clone(),
            psi: z,
        }
    }

    fn parts(&self) -> [&ComplexField; 6] {
        [&self.s1, &self.s2, &self.eta, &self.phi1, &self.phi2, &self.psi]
    }

    fn zip_with(&self, o: &Self, f: impl Fn(&ComplexField, &ComplexField) -> ComplexField) -> Self {
        Self {
            s1: f(&self.s1, &o.s1),
            s2: f(&self.s2, &o.s2),
            eta: f(&self.eta, &o.eta),
            phi1: f(&self.phi1, &o.phi1),
            phi2: f(&self.phi2, &o.phi2),
            psi: f(&self.psi, &o.psi),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.sub(b))
    }

    pub fn axpy(&self, t: C64, o: &Self) -> Self {
        self.zip_with(o, |a, b| a.axpy(t, b))
    }

    /// Norm of the preimage space: `H1_z(L2)` for `s1`, `L2` for `s2`
    /// and `eta`, discrete `H1` for the three states.
    pub fn norm_x(&self, grid: &Grid) -> f64 {
        let l2 = |f: &ComplexField| h1_parts(grid, f).0;
        let h1 = |f: &ComplexField| {
            let (a, b, c) = h1_parts(grid, f);
            a + b + c
        };
        let (a, _, c) = h1_parts(grid, &self.s1);
        (a + c + l2(&self.s2) + l2(&self.eta) + h1(&self.phi1) + h1(&self.phi2) + h1(&self.psi)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|f| f.is_finite())
    }
}

/// The six residual blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ParaxialY {
    /// Per step (`(Nz-1) * Ny` values).
    pub beam1: Vec<C64>,
    pub beam2: Vec<C64>,
    pub psi: Vec<C64>,
    pub init1: Vec<C64>,
    pub init2: Vec<C64>,
    pub obs: Vec<C64>,
}

impl ParaxialY {
    pub fn sub(&self, o: &Self) -> Self {
        Self {
            beam1: sub(&self.beam1, &o.beam1),
            beam2: sub(&self.beam2, &o.beam2),
            psi: sub(&self.psi, &o.psi),
            init1: sub(&self.init1, &o.init1),
            init2: sub(&self.init2, &o.init2),
            obs: sub(&self.obs, &o.obs),
        }
    }
}

/// Residual norms per component and in total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorms {
    pub components: Vec<f64>,
    pub total: f64,
}

pub struct ParaxialAao {
    pub cfg: ModelConfig,
    pub obs: ObservationSpec,
    pub data: Option<Vec<C64>>,
    psi_linear: CsrMatrix,
}

impl ParaxialAao {
    pub fn new(cfg: ModelConfig, obs: ObservationSpec, data: Option<Vec<C64>>) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.grid;
        if obs.mesh != crate::grid::Mesh::from_grid(&g) {
            return Err(Error::Shape("observation mesh must be the beam grid".into()));
        }
        if let Some(d) = &data {
            if d.len() != obs.points.len() {
                return Err(Error::Shape("data length differs from the receiver count".into()));
            }
        }
        let zero = crate::grid::RealField::zeros(g.shape());
        let psi_linear = assemble_perturbed(
            &g,
            &zero,
            &zero,
            cfg.eps_tilde,
            cfg.omega_d(),
            &vec![cfg.sigma0; g.ny],
            &vec![cfg.sigma_l; g.ny],
            &crate::beam::Impedance::constant(g.nz, cfg.sigma),
        );
        Ok(Self {
            cfg,
            obs,
            data,
            psi_linear,
        })
    }

    pub fn grid(&self) -> Grid {
        self.cfg.grid
    }

    fn dz(&self, a: &ComplexField) -> ComplexField {
        discrete_gradient_z(&self.cfg.grid, a).expect("shape checked")
    }

    /// `(2 i w / dz) W s_mid (phi_{n+1} - phi_n) + (i w / 2) W (dz s)_mid (phi_n + phi_{n+1})`.
    fn beam_bilinear(&self, omega: f64, s: &ComplexField, phi: &ComplexField) -> Vec<C64> {
        let g = self.cfg.grid;
        let ds = self.dz(s);
        let mut out = Vec::with_capacity((g.nz - 1) * g.ny);
        for n in 0..g.nz - 1 {
            for j in 0..g.ny {
                let w = g.wy(j);
                let sm = 0.5 * (s.at(n, j) + s.at(n + 1, j));
                let cm = 0.5 * (ds.at(n, j) + ds.at(n + 1, j));
                let dphi = phi.at(n + 1, j) - phi.at(n, j);
                let sphi = phi.at(n + 1, j) + phi.at(n, j);
                out.push(I * omega * w * (2.0 * sm * dphi / g.dz + 0.5 * cm * sphi));
            }
        }
        out
    }

    /// `(K + i w B) (phi_n + phi_{n+1}) / 2`.
    fn beam_linear(&self, omega: f64, sigma: f64, phi: &ComplexField) -> Vec<C64> {
        let g = self.cfg.grid;
        let ny = g.ny;
        let mut out = Vec::with_capacity((g.nz - 1) * ny);
        for n in 0..g.nz - 1 {
            let m: Vec<C64> = (0..ny).map(|j| 0.5 * (phi.at(n, j) + phi.at(n + 1, j))).collect();
            let km = crate::grid::apply_stiffness_y(&g, &m);
            for j in 0..ny {
                let mut v = km[j];
                if j == 0 {
                    v += I * omega * sigma * m[0];
                }
                if j == ny - 1 {
                    v += I * omega * sigma * m[ny - 1];
                }
                out.push(v);
            }
        }
        out
    }

    fn psi_coef(&self, s: &ComplexField, psi: &ComplexField) -> Vec<C64> {
        let ds = self.dz(s);
        perturbed_coefficient_apply(&self.cfg.grid, &s.values, &ds.values, self.cfg.omega_d(), &psi.values)
    }

    fn source_load(&self, eta: &ComplexField, a: &ComplexField, b: &ComplexField) -> Vec<C64> {
        let g = self.cfg.grid;
        let coef = I * (self.cfg.omega_plus() / self.cfg.eps_tilde);
        (0..g.len())
            .map(|k| coef * eta.values[k] * a.values[k] * b.values[k].conj() * (g.wz(k / g.ny) * g.wy(k % g.ny)))
            .collect()
    }

    fn check(&self, q: &ParaxialState) -> Result<()> {
        let sh = self.cfg.grid.shape();
        for (f, name) in q.parts().iter().zip(["s1", "s2", "eta", "phi1", "phi2", "psi"]) {
            f.check_shape(sh, name)?;
        }
        Ok(())
    }

    /// `F(q) - y`.
    pub fn apply(&self, q: &ParaxialState) -> Result<ParaxialY> {
        self.check(q)?;
        let c = &self.cfg;
        let g = c.grid;
        let beam = |om: f64, sig: f64, s: &ComplexField, phi: &ComplexField| {
            let a = self.beam_bilinear(om, s, phi);
            let b = self.beam_linear(om, sig, phi);
            a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>()
        };
        let lin = self.psi_linear.matvec(&q.psi.values);
        let coef = self.psi_coef(&q.s1, &q.psi);
        let src = self.source_load(&q.eta, &q.phi1, &q.phi2);
        let psi: Vec<C64> = (0..g.len()).map(|k| lin[k] + coef[k] - src[k]).collect();
        let init = |phi: &ComplexField, h: &[C64]| sub(phi.row(0), h);
        let mut obs = observe(&q.psi, &self.obs)?;
        if let Some(d) = &self.data {
            obs = sub(&obs, d);
        }
        Ok(ParaxialY {
            beam1: beam(c.omega1, c.sigma1, &q.s1, &q.phi1),
            beam2: beam(c.omega2, c.sigma2, &q.s2, &q.phi2),
            psi,
            init1: init(&q.phi1, &c.h1),
            init2: init(&q.phi2, &c.h2),
            obs,
        })
    }

    /// Frozen derivative at `q0` applied to `dq`.
    pub fn derivative_apply(&self, q0: &ParaxialState, dq: &ParaxialState) -> Result<ParaxialY> {
        self.check(q0)?;
        self.check(dq)?;
        let c = &self.cfg;
        let g = c.grid;
        let beam = |om: f64, sig: f64, s0: &ComplexField, p0: &ComplexField, ds: &ComplexField, dp: &ComplexField| {
            let a = self.beam_bilinear(om, ds, p0);
            let b = self.beam_bilinear(om, s0, dp);
            let l = self.beam_linear(om, sig, dp);
            (0..a.len()).map(|k| a[k] + b[k] + l[k]).collect::<Vec<_>>()
        };
        let lin = self.psi_linear.matvec(&dq.psi.values);
        let c1 = self.psi_coef(&dq.s1, &q0.psi);
        let c2 = self.psi_coef(&q0.s1, &dq.psi);
        let s1 = self.source_load(&dq.eta, &q0.phi1, &q0.phi2);
        let s2 = self.source_load(&q0.eta, &dq.phi1, &q0.phi2);
        let s3 = self.source_load(&q0.eta, &q0.phi1, &dq.phi2);
        let psi = (0..g.len()).map(|k| lin[k] + c1[k] + c2[k] - s1[k] - s2[k] - s3[k]).collect();
        Ok(ParaxialY {
            beam1: beam(c.omega1, c.sigma1, &q0.s1, &q0.phi1, &dq.s1, &dq.phi1),
            beam2: beam(c.omega2, c.sigma2, &q0.s2, &q0.phi2, &dq.s2, &dq.phi2),
            psi,
            init1: dq.phi1.row(0).to_vec(),
            init2: dq.phi2.row(0).to_vec(),
            obs: observe(&dq.psi, &self.obs)?,
        })
    }

    /// Strong `L2` norms of the load-type rows, `L2` of the traces.
    pub fn norm_y(&self, y: &ParaxialY) -> ComponentNorms {
        let g = self.cfg.grid;
        let ny = g.ny;
        let beam = |r: &[C64]| r.iter().enumerate().map(|(k, v)| g.dz * v.norm_sqr() / g.wy(k % ny)).sum::<f64>();
        let psi: f64 = y
            .psi
            .iter()
            .enumerate()
            .map(|(k, v)| v.norm_sqr() / (g.wz(k / ny) * g.wy(k % ny)))
            .sum();
        let init = |r: &[C64]| r.iter().enumerate().map(|(j, v)| g.wy(j) * v.norm_sqr()).sum::<f64>();
        let obs: f64 = y.obs.iter().zip(&self.obs.weights).map(|(v, w)| w * v.norm_sqr()).sum();
        let comps = [beam(&y.beam1), beam(&y.beam2), psi, init(&y.init1), init(&y.init2), obs];
        ComponentNorms {
            total: comps.iter().sum::<f64>().sqrt(),
            components: comps.iter().map(|v| v.sqrt()).collect(),
        }
    }

    /// Range-invariance remainder `r(q)` about the base state `q0`.
    pub fn remainder_r(&self, q: &ParaxialState, q0: &ParaxialState, floor_rel: f64) -> Result<ParaxialState> {
        self.check(q)?;
        self.check(q0)?;
        check_floor("phi1_0", &q0.phi1.values, floor_rel)?;
        check_floor("phi2_0", &q0.phi2.values, floor_rel)?;
        let g = self.cfg.grid;
        let n = g.len();
        let ds_k = |s: &ComplexField, s0: &ComplexField, p: &ComplexField, p0: &ComplexField| {
            let d = s.sub(s0);
            let pz = self.dz(p);
            let p0z = self.dz(p0);
            let integrand = ComplexField::from_fn(g.shape(), |i, j| {
                d.at(i, j) * (p0.at(i, j) * pz.at(i, j) - p.at(i, j) * p0z.at(i, j))
            });
            let cum = cumulative_trapezoid_z(&g, &integrand);
            ComplexField::from_fn(g.shape(), |i, j| {
                let b = p0.at(i, j);
                p.at(i, j) / b * d.at(i, j) + cum.at(i, j) / (b * b)
            })
        };
        let ds1 = ds_k(&q.s1, &q0.s1, &q.phi1, &q0.phi1);
        let ds2 = ds_k(&q.s2, &q0.s2, &q.phi2, &q0.phi2);
        let d1 = q.s1.sub(&q0.s1);
        let g_psi = self.scheme_dz(&q.psi);
        let g_psi0 = self.scheme_dz(&q0.psi);
        let dd1 = self.dz(&d1);
        let dds1 = self.dz(&ds1);
        let c = &self.cfg;
        let ratio = c.omega_d() * c.eps_tilde / c.omega_plus();
        let mut deta = ComplexField::zeros(g.shape());
        for k in 0..n {
            let b = q0.phi1.values[k] * q0.phi2.values[k].conj();
            let p = q.phi1.values[k] * q.phi2.values[k].conj();
            let dp1 = q.phi1.values[k] - q0.phi1.values[k];
            let dp2 = q.phi2.values[k] - q0.phi2.values[k];
            let e = q.psi.values[k] * dd1.values[k] + 2.0 * d1.values[k] * g_psi.values[k]
                - q0.psi.values[k] * dds1.values[k]
                - 2.0 * ds1.values[k] * g_psi0.values[k];
            deta.values[k] = p / b * (q.eta.values[k] - q0.eta.values[k]) + dp1 * dp2.conj() / b * q0.eta.values[k]
                - ratio / b * e;
        }
        Ok(ParaxialState {
            s1: ds1,
            s2: ds2,
            eta: deta,
            phi1: q.phi1.sub(&q0.phi1),
            phi2: q.phi2.sub(&q0.phi2),
            psi: q.psi.sub(&q0.psi),
        })
    }

    /// The z-derivative stencil used by the first-order term of the
    /// difference-frequency row (central inside, two-point at the ends).
    fn scheme_dz(&self, a: &ComplexField) -> ComplexField {
        let g = self.cfg.grid;
        let nz = g.nz;
        ComplexField::from_fn(g.shape(), |i, j| {
            if i == 0 {
                (a.at(1, j) - a.at(0, j)) / g.dz
            } else if i == nz - 1 {
                (a.at(nz - 1, j) - a.at(nz - 2, j)) / g.dz
            } else {
                (a.at(i + 1, j) - a.at(i - 1, j)) / (2.0 * g.dz)
            }
        })
    }

    /// `(|r(q) - (q - q0)|_X, |q - q0|_X)`.
    pub fn remainder_closeness(&self, q: &ParaxialState, q0: &ParaxialState, floor_rel: f64) -> Result<(f64, f64)> {
        let r = self.remainder_r(q, q0, floor_rel)?;
        let d = q.sub(q0);
        let g = self.cfg.grid;
        Ok((r.sub(&d).norm_x(&g), d.norm_x(&g)))
    }

    /// `s1 - s2` with its `L2` norm.
    pub fn penalty_apply(&self, q: &ParaxialState) -> (ComplexField, f64) {
        let d = q.s1.sub(&q.s2);
        let n = h1_parts(&self.cfg.grid, &d).0.sqrt();
        (d, n)
    }
}

// ===========================================================================
// Multi-frequency Helmholtz model

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub omega_d: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Quadrature weights on the difference-frequency list.
    pub mu: Vec<f64>,
}

impl FrequencySet {
    /// Uniform weights `1/|I|`.
    pub fn uniform(omega_d: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        let n = omega_d.len().max(1);
        let fs = Self {
            mu: vec![1.0 / n as f64; omega_d.len()],
            omega_d,
            kappa,
        };
        fs.validate()?;
        Ok(fs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_d.is_empty() || self.mu.len() != self.omega_d.len() {
            return Err(Error::Config("frequency list and weights must be nonempty and match".into()));
        }
        if self.omega_d.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("difference frequencies must be positive".into()));
        }
        for i in 0..self.omega_d.len() {
            for j in 0..i {
                if self.omega_d[i] == self.omega_d[j] {
                    return Err(Error::Config("difference frequencies must be distinct".into()));
                }
            }
        }
        if self.kappa.is_empty() || self.kappa.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Config("kappa values must be positive".into()));
        }
        if self.mu.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Config("frequency weights must be positive".into()));
        }
        Ok(())
    }

    pub fn n_pairs(&self) -> usize {
        self.omega_d.len() * self.kappa.len()
    }

    /// `(l, k)` of pair index `m`.
    pub fn split(&self, m: usize) -> (usize, usize) {
        (m / self.kappa.len(), m % self.kappa.len())
    }

    pub fn omega(&self, m: usize) -> f64 {
        self.omega_d[self.split(m).0]
    }

    pub fn kappa_of(&self, m: usize) -> f64 {
        self.kappa[self.split(m).1]
    }

    pub fn weight(&self, m: usize) -> f64 {
        self.mu[self.split(m).0]
    }

    pub fn measure(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Excitation pair for given `(omega_d, kappa)`: `omega2 = omega1 kappa/(omega1+kappa)`.
    pub fn excitation(omega_d: f64, kappa: f64) -> (f64, f64) {
        let w1 = 0.5 * (omega_d + (omega_d * omega_d + 4.0 * omega_d * kappa).sqrt());
        (w1, w1 - omega_d)
    }
}

/// `q = (s2 copies, eta_check, psi_check copies)` indexed by frequency pair.
#[derive(Clone, Debug, PartialEq)]
pub struct HelmState {
    pub s2: Vec<Vec<C64>>,
    pub eta: Vec<C64>,
    pub psi: Vec<Vec<C64>>,
}

impl HelmState {
    pub fn zeros(n_pairs: usize, n: usize) -> Self {
        Self {
            s2: vec![vec![ZERO; n]; n_pairs],
            eta: vec![ZERO; n],
            psi: vec![vec![ZERO; n]; n_pairs],
        }
    }

    fn zip(&self, o: &Self, f: impl Fn(&[C64], &[C64]) -> Vec<C64>) -> Self {
        Self {
            s2: self.s2.iter().zip(&o.s2).map(|(a, b)| f(a, b)).collect(),
            eta: f(&self.eta, &o.eta),
            psi: self.psi.iter().zip(&o.psi).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, sub)
    }

    pub fn axpy(&self, t: C64, o: &Self) -> Self {
        self.zip(o, |a, b| axpy(a, t, b))
    }

    pub fn scale(&self, t: f64) -> Self {
        let f = |a: &[C64]| a.iter().map(|v| v * t).collect::<Vec<_>>();
        Self {
            s2: self.s2.iter().map(|a| f(a)).collect(),
            eta: f(&self.eta),
            psi: self.psi.iter().map(|a| f(a)).collect(),
        }
    }

    /// Flattened `[s2.., eta, psi..]`.
    pub fn flatten(&self) -> Vec<C64> {
        let mut v = Vec::new();
        for a in &self.s2 {
            v.extend_from_slice(a);
        }
        v.extend_from_slice(&self.eta);
        for a in &self.psi {
            v.extend_from_slice(a);
        }
        v
    }

    pub fn unflatten(v: &[C64], n_pairs: usize, n: usize) -> Self {
        let mut it = v.chunks(n);
        let s2 = (0..n_pairs).map(|_| it.next().unwrap().to_vec()).collect();
        let eta = it.next().unwrap().to_vec();
        let psi = (0..n_pairs).map(|_| it.next().unwrap().to_vec()).collect();
        Self { s2, eta, psi }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HelmY {
    pub pde: Vec<Vec<C64>>,
    pub obs: Vec<Vec<C64>>,
}

impl HelmY {
    pub fn sub(&self, o: &Self) -> Self {
        Self {
            pde: self.pde.iter().zip(&o.pde).map(|(a, b)| sub(a, b)).collect(),
            obs: self.obs.iter().zip(&o.obs).map(|(a, b)| sub(a, b)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Penalty {
    /// `s(w, kappa_1) - s(w, kappa_2)` per difference frequency.
    pub kappa_diff: Vec<Vec<C64>>,
    /// `s(w, kappa_1) - mean over I`.
    pub mean_diff: Vec<Vec<C64>>,
}

/// Discrete `H2` Gram `W + K + sum_ab D_ab^T W D_ab` with second
/// differences `D_xx, D_xy, D_yy` (mixed term counted twice). Near the
/// boundary the stencil of the nearest interior node is reused, which
/// keeps the norm uniform under refinement.
pub fn h2_matrix(mesh: &Mesh, mass: &[f64], k: &CsrMatrix) -> Result<CsrMatrix> {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let n = mesh.len();
    let two_d = mesh.dim == 2;
    if nx < 3 || (two_d && ny < 3) {
        return Err(Error::Config("H2 norm needs at least three nodes per direction".into()));
    }
    let c = |v: f64| C64::new(v, 0.0);
    let mut dxx = Triplets::new(n, n);
    let mut dyy = Triplets::new(n, n);
    let mut dxy = Triplets::new(n, n);
    for i in 0..nx {
        let ic = i.clamp(1, nx - 2);
        for j in 0..ny {
            let r = mesh.idx(i, j);
            let hx = 1.0 / (mesh.dx * mesh.dx);
            dxx.push(r, mesh.idx(ic - 1, j), c(hx));
            dxx.push(r, mesh.idx(ic, j), c(-2.0 * hx));
            dxx.push(r, mesh.idx(ic + 1, j), c(hx));
            if two_d {
                let jc = j.clamp(1, ny - 2);
                let hy = 1.0 / (mesh.dy * mesh.dy);
                dyy.push(r, mesh.idx(i, jc - 1), c(hy));
                dyy.push(r, mesh.idx(i, jc), c(-2.0 * hy));
                dyy.push(r, mesh.idx(i, jc + 1), c(hy));
                let hxy = 0.25 / (mesh.dx * mesh.dy);
                dxy.push(r, mesh.idx(ic + 1, jc + 1), c(hxy));
                dxy.push(r, mesh.idx(ic + 1, jc - 1), c(-hxy));
                dxy.push(r, mesh.idx(ic - 1, jc + 1), c(-hxy));
                dxy.push(r, mesh.idx(ic - 1, jc - 1), c(hxy));
            }
        }
    }
    let (dxx, dyy, dxy) = (dxx.to_csr(), dyy.to_csr(), dxy.to_csr());
    let w = csr_diag(&mass.iter().map(|&v| c(v)).collect::<Vec<_>>());
    let gxx = gram_product(&dxx, mass, &dxx);
    let one = c(1.0);
    if !two_d {
        return Ok(csr_combine(&[(one, &w), (one, k), (one, &gxx)]));
    }
    let gyy = gram_product(&dyy, mass, &dyy);
    let gxy = gram_product(&dxy, mass, &dxy);
    Ok(csr_combine(&[(one, &w), (one, k), (one, &gxx), (one, &gyy), (c(2.0), &gxy)]))
}

pub struct HelmAao {
    pub ops: OperatorTriple,
    pub f: Vec<C64>,
    pub fs: FrequencySet,
    pub gamma: Vec<usize>,
    pub gamma_w: Vec<f64>,
    pub data: Option<Vec<Vec<C64>>>,
    /// Scale of the penalty norm.
    pub penalty_weight: f64,
    /// `A + i w D` per difference frequency.
    stiff: Vec<CsrMatrix>,
    mdiag: Vec<f64>,
    k: CsrMatrix,
    h2: CsrMatrix,
}

impl HelmAao {
    pub fn new(
        ops: OperatorTriple,
        f: Vec<C64>,
        fs: FrequencySet,
        obs: &ObservationSpec,
        data: Option<Vec<Vec<C64>>>,
    ) -> Result<Self> {
        fs.validate()?;
        let n = ops.mesh.len();
        if f.len() != n {
            return Err(Error::Shape("source f needs one value per node".into()));
        }
        if obs.mesh != ops.mesh {
            return Err(Error::Shape("observation mesh differs from the operator mesh".into()));
        }
        let gamma = obs
            .node_indices()
            .ok_or_else(|| Error::Config("Helmholtz receivers must sit on nodes".into()))?;
        if let Some(d) = &data {
            if d.len() != fs.n_pairs() || d.iter().any(|b| b.len() != gamma.len()) {
                return Err(Error::Shape("data blocks do not match the frequency pairs and receivers".into()));
            }
        }
        let stiff = fs
            .omega_d
            .iter()
            .map(|&w| {
                let mut t = crate::linalg::Triplets::new(n, n);
                for i in 0..n {
                    for p in ops.a.indptr[i]..ops.a.indptr[i + 1] {
                        t.push(i, ops.a.indices[p], ops.a.data[p]);
                    }
                    for p in ops.d.indptr[i]..ops.d.indptr[i + 1] {
                        t.push(i, ops.d.indices[p], ops.d.data[p] * I * w);
                    }
                }
                t.to_csr()
            })
            .collect();
        let mdiag = ops.m_diag();
        let k = stiffness(&ops.mesh);
        let h2 = h2_matrix(&ops.mesh, &ops.mass, &k)?;
        Ok(Self {
            h2,
            gamma_w: obs.weights.clone(),
            gamma,
            penalty_weight: 1.0,
            stiff,
            mdiag,
            k,
            ops,
            f,
            fs,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.ops.mesh.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.fs.n_pairs()
    }

    pub fn stiff(&self, l: usize) -> &CsrMatrix {
        &self.stiff[l]
    }

    pub fn mdiag(&self) -> &[f64] {
        &self.mdiag
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.k
    }

    fn check(&self, q: &HelmState) -> Result<()> {
        let (m, n) = (self.n_pairs(), self.n());
        if q.s2.len() != m || q.psi.len() != m || q.eta.len() != n || q.s2.iter().chain(&q.psi).any(|v| v.len() != n) {
            return Err(Error::Shape("state does not match the frequency pairs or the mesh".into()));
        }
        Ok(())
    }

    pub fn trace(&self, m: usize, psi: &[C64]) -> Vec<C64> {
        let w = self.fs.omega(m);
        self.gamma.iter().map(|&k| I * w * psi[k]).collect()
    }

    /// `-w^2 (M(s2 psi) + i kappa W eta f) + A psi + i w D psi` and
    /// `i w tr psi`, minus the data.
    pub fn apply(&self, q: &HelmState) -> Result<HelmY> {
        self.check(q)?;
        let mw = &self.ops.mass;
        let mut pde = Vec::with_capacity(self.n_pairs());
        let mut obs = Vec::with_capacity(self.n_pairs());
        for m in 0..self.n_pairs() {
            let (l, _) = self.fs.split(m);
            let (w, kap) = (self.fs.omega(m), self.fs.kappa_of(m));
            let mut r = self.stiff[l].matvec(&q.psi[m]);
            for i in 0..self.n() {
                r[i] -= w * w * (self.mdiag[i] * q.s2[m][i] * q.psi[m][i] + I * kap * mw[i] * q.eta[i] * self.f[i]);
            }
            pde.push(r);
            let mut t = self.trace(m, &q.psi[m]);
            if let Some(d) = &self.data {
                t = sub(&t, &d[m]);
            }
            obs.push(t);
        }
        Ok(HelmY { pde, obs })
    }

    pub fn derivative_apply(&self, q0: &HelmState, dq: &HelmState) -> Result<HelmY> {
        self.check(q0)?;
        self.check(dq)?;
        let mw = &self.ops.mass;
        let mut pde = Vec::with_capacity(self.n_pairs());
        let mut obs = Vec::with_capacity(self.n_pairs());
        for m in 0..self.n_pairs() {
            let (l, _) = self.fs.split(m);
            let (w, kap) = (self.fs.omega(m), self.fs.kappa_of(m));
            let mut r = self.stiff[l].matvec(&dq.psi[m]);
            for i in 0..self.n() {
                r[i] -= w
                    * w
                    * (self.mdiag[i] * (dq.s2[m][i] * q0.psi[m][i] + q0.s2[m][i] * dq.psi[m][i])
                        + I * kap * mw[i] * dq.eta[i] * self.f[i]);
            }
            pde.push(r);
            obs.push(self.trace(m, &dq.psi[m]));
        }
        Ok(HelmY { pde, obs })
    }

    /// `F'(q0)^H W_Y y` in the Euclidean pairing of the flattened state.
    pub fn derivative_adjoint_weighted(&self, q0: &HelmState, y: &HelmY) -> HelmState {
        let (mm, n) = (self.n_pairs(), self.n());
        let mw = &self.ops.mass;
        let mut out = HelmState::zeros(mm, n);
        for m in 0..mm {
            let (l, _) = self.fs.split(m);
            let (w, kap, mu) = (self.fs.omega(m), self.fs.kappa_of(m), self.fs.weight(m));
            let g1: Vec<C64> = (0..n).map(|i| y.pde[m][i] * (mu / mw[i])).collect();
            let mut dpsi = self.stiff[l].matvec_adjoint(&g1);
            for i in 0..n {
                let c = w * w * self.mdiag[i];
                dpsi[i] -= c * q0.s2[m][i].conj() * g1[i];
                out.s2[m][i] = -c * q0.psi[m][i].conj() * g1[i];
                out.eta[i] += -(w * w) * (I * kap * mw[i] * self.f[i]).conj() * g1[i];
            }
            for (t, &k) in self.gamma.iter().enumerate() {
                dpsi[k] += (I * w).conj() * y.obs[m][t] * (mu * self.gamma_w[t]);
            }
            out.psi[m] = dpsi;
        }
        out
    }

    /// `|y|_Y^2` per block: strong `L2` of the PDE rows, `L2(Gamma)` of the traces.
    pub fn norm_y(&self, y: &HelmY) -> ComponentNorms {
        let mw = &self.ops.mass;
        let mut pde = 0.0;
        let mut obs = 0.0;
        for m in 0..self.n_pairs() {
            let mu = self.fs.weight(m);
            pde += mu * y.pde[m].iter().zip(mw).map(|(v, w)| v.norm_sqr() / w).sum::<f64>();
            obs += mu * y.obs[m].iter().zip(&self.gamma_w).map(|(v, w)| w * v.norm_sqr()).sum::<f64>();
        }
        ComponentNorms {
            components: vec![pde.sqrt(), obs.sqrt()],
            total: (pde + obs).sqrt(),
        }
    }

    /// Norm of the observation blocks alone (used for noise levels).
    pub fn trace_norm(&self, blocks: &[Vec<C64>]) -> f64 {
        let mut acc = 0.0;
        for (m, b) in blocks.iter().enumerate() {
            let mu = self.fs.weight(m);
            acc += mu * b.iter().zip(&self.gamma_w).map(|(v, w)| w * v.norm_sqr()).sum::<f64>();
        }
        acc.sqrt()
    }

    /// `H2` Gram action, see [`h2_matrix`].
    pub fn h2_gram(&self, v: &[C64]) -> Vec<C64> {
        self.h2.matvec(v)
    }

    pub fn h2_matrix(&self) -> &CsrMatrix {
        &self.h2
    }

    /// Gram operator of the preimage space: `mu W` on each `s2` copy,
    /// `W` on `eta`, `mu H2` on each `psi` copy.
    pub fn gram_x(&self, q: &HelmState) -> HelmState {
        let mw = &self.ops.mass;
        let wmul = |v: &[C64], s: f64| v.iter().zip(mw).map(|(a, w)| a * (w * s)).collect::<Vec<_>>();
        HelmState {
            s2: q.s2.iter().enumerate().map(|(m, v)| wmul(v, self.fs.weight(m))).collect(),
            eta: wmul(&q.eta, 1.0),
            psi: q
                .psi
                .iter()
                .enumerate()
                .map(|(m, v)| self.h2_gram(v).into_iter().map(|a| a * self.fs.weight(m)).collect())
                .collect(),
        }
    }

    pub fn norm_x(&self, q: &HelmState) -> f64 {
        cdot(&q.flatten(), &self.gram_x(q).flatten()).re.max(0.0).sqrt()
    }

    pub fn penalty_apply(&self, q: &HelmState) -> Penalty {
        let nk = self.fs.kappa.len();
        let nl = self.fs.omega_d.len();
        let n = self.n();
        let mut mean = vec![ZERO; n];
        let meas = self.fs.measure();
        for l in 0..nl {
            let mu = self.fs.mu[l] / meas;
            for i in 0..n {
                mean[i] += q.s2[l * nk][i] * mu;
            }
        }
        let kappa_diff = (0..nl)
            .map(|l| {
                if nk > 1 {
                    sub(&q.s2[l * nk], &q.s2[l * nk + 1])
                } else {
                    vec![ZERO; n]
                }
            })
            .collect();
        let mean_diff = (0..nl).map(|l| sub(&q.s2[l * nk], &mean)).collect();
        Penalty { kappa_diff, mean_diff }
    }

    pub fn norm_z(&self, p: &Penalty) -> f64 {
        let mw = &self.ops.mass;
        let mut acc = 0.0;
        for l in 0..self.fs.omega_d.len() {
            let mu = self.fs.mu[l] * self.penalty_weight;
            for v in [&p.kappa_diff[l], &p.mean_diff[l]] {
                acc += mu * v.iter().zip(mw).map(|(a, w)| w * a.norm_sqr()).sum::<f64>();
            }
        }
        acc.sqrt()
    }

    /// `P^H W_Z p` in the Euclidean pairing.
    pub fn penalty_adjoint_weighted(&self, p: &Penalty) -> HelmState {
        let nk = self.fs.kappa.len();
        let nl = self.fs.omega_d.len();
        let n = self.n();
        let mw = &self.ops.mass;
        let meas = self.fs.measure();
        let mut out = HelmState::zeros(self.n_pairs(), n);
        let mut mean_adj = vec![ZERO; n];
        for l in 0..nl {
            let mu = self.fs.mu[l] * self.penalty_weight;
            for i in 0..n {
                let a = p.kappa_diff[l][i] * (mu * mw[i]);
                let b = p.mean_diff[l][i] * (mu * mw[i]);
                if nk > 1 {
                    out.s2[l * nk][i] += a;
                    out.s2[l * nk + 1][i] -= a;
                }
                out.s2[l * nk][i] += b;
                mean_adj[i] += b;
            }
        }
        for l in 0..nl {
            let c = self.fs.mu[l] / meas;
            for i in 0..n {
                out.s2[l * nk][i] -= mean_adj[i] * c;
            }
        }
        out
    }

    /// Range-invariance remainder `((s2 - s2_0) psi / psi0, eta - eta0, psi - psi0)`.
    pub fn remainder_r(&self, q: &HelmState, q0: &HelmState, floor_rel: f64) -> Result<HelmState> {
        self.check(q)?;
        self.check(q0)?;
        for (m, p) in q0.psi.iter().enumerate() {
            check_floor(&format!("psi0[{m}]"), p, floor_rel)?;
        }
        let s2 = (0..self.n_pairs())
            .map(|m| {
                (0..self.n())
                    .map(|i| (q.s2[m][i] - q0.s2[m][i]) * q.psi[m][i] / q0.psi[m][i])
                    .collect()
            })
            .collect();
        Ok(HelmState {
            s2,
            eta: sub(&q.eta, &q0.eta),
            psi: q.psi.iter().zip(&q0.psi).map(|(a, b)| sub(a, b)).collect(),
        })
    }

    /// `|r(q) - (q - q0)|_X` from the remainder map and from the closed
    /// form `(s2 - s2_0)(psi - psi0)/psi0`.
    pub fn remainder_closeness(&self, q: &HelmState, q0: &HelmState, floor_rel: f64) -> Result<(f64, f64)> {
        let r = self.remainder_r(q, q0, floor_rel)?;
        let via_map = self.norm_x(&r.sub(&q.sub(q0)));
        let mut direct = HelmState::zeros(self.n_pairs(), self.n());
        for m in 0..self.n_pairs() {
            for i in 0..self.n() {
                direct.s2[m][i] = (q.s2[m][i] - q0.s2[m][i]) * (q.psi[m][i] - q0.psi[m][i]) / q0.psi[m][i];
            }
        }
        Ok((via_map, self.norm_x(&direct)))
    }
}
