//! Paraxial beam marching in z and the energy diagnostics that go with it.
//!
//! The transverse direction uses P1 elements with lumped mass; the
//! z-direction uses Crank–Nicolson with coefficients taken at the step
//! midpoint, so that testing a step with the midpoint value reproduces the
//! energy balance up to rounding.

use crate::error::{Error, Result};
use crate::grid::{
    apply_stiffness_y, discrete_gradient_z, grad_energy_y, laplacian_row, ComplexField, Grid,
    SlownessField,
};
use crate::linalg::solve_tridiagonal;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Impedance on the two transverse ends, one value per z node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impedance {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Impedance {
    pub fn constant(nz: usize, v: f64) -> Self {
        Self {
            lo: vec![v; nz],
            hi: vec![v; nz],
        }
    }

    fn validate(&self, nz: usize) -> Result<()> {
        if self.lo.len() != nz || self.hi.len() != nz {
            return Err(Error::Shape("impedance needs one value per z node".into()));
        }
        if self.lo.iter().chain(&self.hi).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("impedance must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BeamProblem {
    pub grid: Grid,
    pub slowness: SlownessField,
    /// Angular frequency; a negative value solves the conjugate problem.
    pub omega: f64,
    pub source: ComplexField,
    pub h: Vec<C64>,
    pub sigma: Impedance,
}

impl BeamProblem {
    pub fn new(
        grid: Grid,
        slowness: SlownessField,
        omega: f64,
        source: ComplexField,
        h: Vec<C64>,
        sigma: Impedance,
    ) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Config(format!("beam frequency must be positive, got {omega}")));
        }
        let p = Self {
            grid,
            slowness,
            omega,
            source,
            h,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero source, Dirichlet data `h`, constant impedance.
    pub fn homogeneous(grid: Grid, slowness: SlownessField, omega: f64, h: Vec<C64>, sigma: f64) -> Result<Self> {
        let nz = grid.nz;
        Self::new(
            grid,
            slowness,
            omega,
            ComplexField::zeros(grid.shape()),
            h,
            Impedance::constant(nz, sigma),
        )
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if self.omega == 0.0 || !self.omega.is_finite() {
            return Err(Error::Config("beam frequency must be nonzero".into()));
        }
        self.slowness.s.check_shape(g.shape(), "beam slowness")?;
        self.slowness.ctilde.check_shape(g.shape(), "beam ctilde")?;
        self.source.check_shape(g.shape(), "beam source")?;
        if self.h.len() != g.ny {
            return Err(Error::Shape(format!("initial data has {} values, Ny = {}", self.h.len(), g.ny)));
        }
        if self.slowness.s.values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("slowness must be positive".into()));
        }
        self.sigma.validate(g.nz)
    }
}

/// Marched field with per-node energy ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamField {
    pub u: ComplexField,
    /// `|sqrt(s) u|^2` at each z node.
    pub energy: Vec<f64>,
    /// `|grad_y u|^2` at each z node.
    pub grad_energy: Vec<f64>,
    /// `|sqrt(sigma) u|^2` on the transverse boundary at each z node.
    pub flux: Vec<f64>,
}

struct StepCoeffs {
    s: Vec<f64>,
    ct: Vec<f64>,
    sig: (f64, f64),
    f: Vec<C64>,
}

fn step_coeffs(p: &BeamProblem, n: usize) -> StepCoeffs {
    let g = &p.grid;
    let (a, b) = (n, n + 1);
    let s = (0..g.ny)
        .map(|j| 0.5 * (p.slowness.s.at(a, j) + p.slowness.s.at(b, j)))
        .collect();
    let ct = (0..g.ny)
        .map(|j| 0.5 * (p.slowness.ctilde.at(a, j) + p.slowness.ctilde.at(b, j)))
        .collect();
    let f = (0..g.ny)
        .map(|j| 0.5 * (p.source.at(a, j) + p.source.at(b, j)))
        .collect();
    StepCoeffs {
        s,
        ct,
        sig: (
            0.5 * (p.sigma.lo[a] + p.sigma.lo[b]),
            0.5 * (p.sigma.hi[a] + p.sigma.hi[b]),
        ),
        f,
    }
}

pub fn march_beam(p: &BeamProblem) -> Result<BeamField> {
    march_impl(p, None)
}

/// March with a source given per step at the step midpoint
/// (`(Nz-1) * Ny` values) instead of the averaged nodal source.
pub fn march_beam_midpoint_source(p: &BeamProblem, step_source: &[C64]) -> Result<BeamField> {
    if step_source.len() != (p.grid.nz - 1) * p.grid.ny {
        return Err(Error::Shape(format!(
            "step source has {} values, expected {}",
            step_source.len(),
            (p.grid.nz - 1) * p.grid.ny
        )));
    }
    march_impl(p, Some(step_source))
}

fn march_impl(p: &BeamProblem, step_source: Option<&[C64]>) -> Result<BeamField> {
    p.validate()?;
    let g = &p.grid;
    if g.nz < 3 {
        return Err(Error::Config("beam marching needs Nz >= 3".into()));
    }
    if g.ny < 2 {
        return Err(Error::Config("beam marching needs Ny >= 2".into()));
    }
    let (nz, ny) = (g.nz, g.ny);
    let om = p.omega;
    let inv_dy = 1.0 / g.dy;
    let mut u = ComplexField::zeros(g.shape());
    u.values[..ny].copy_from_slice(&p.h);

    let mut lower = vec![C64::new(0.0, 0.0); ny];
    let mut diag = vec![C64::new(0.0, 0.0); ny];
    let mut upper = vec![C64::new(0.0, 0.0); ny];
    let mut rhs = vec![C64::new(0.0, 0.0); ny];
    for n in 0..nz - 1 {
        let mut c = step_coeffs(p, n);
        if let Some(src) = step_source {
            c.f.copy_from_slice(&src[n * ny..(n + 1) * ny]);
        }
        let u0 = u.row(n).to_vec();
        let ku0 = apply_stiffness_y(g, &u0);
        for j in 0..ny {
            let w = g.wy(j);
            let mut bnd = 0.0;
            if j == 0 {
                bnd += c.sig.0;
            }
            if j == ny - 1 {
                bnd += c.sig.1;
            }
            let t = I * (2.0 * om * w * c.s[j] / g.dz);
            let a = I * (om * (bnd + w * c.ct[j]));
            let kd = if j == 0 || j == ny - 1 { inv_dy } else { 2.0 * inv_dy };
            diag[j] = t + 0.5 * (kd + a);
            lower[j] = if j > 0 { C64::new(-0.5 * inv_dy, 0.0) } else { C64::new(0.0, 0.0) };
            upper[j] = if j + 1 < ny { C64::new(-0.5 * inv_dy, 0.0) } else { C64::new(0.0, 0.0) };
            rhs[j] = t * u0[j] - 0.5 * (ku0[j] + a * u0[j]) + c.f[j] * w;
        }
        let u1 = solve_tridiagonal(&lower, &diag, &upper, &rhs).map_err(|piv| Error::Singular {
            context: format!("beam step {n}"),
            pivot: piv,
        })?;
        u.values[(n + 1) * ny..(n + 2) * ny].copy_from_slice(&u1);
    }
    if !u.is_finite() {
        return Err(Error::Solver("beam march produced non-finite values".into()));
    }
    Ok(ledger(p, u))
}

fn ledger(p: &BeamProblem, u: ComplexField) -> BeamField {
    let g = &p.grid;
    let mut energy = Vec::with_capacity(g.nz);
    let mut grad_energy = Vec::with_capacity(g.nz);
    let mut flux = Vec::with_capacity(g.nz);
    for i in 0..g.nz {
        let row = u.row(i);
        energy.push(
            (0..g.ny)
                .map(|j| g.wy(j) * p.slowness.s.at(i, j) * row[j].norm_sqr())
                .sum(),
        );
        grad_energy.push(grad_energy_y(g, row));
        flux.push(p.sigma.lo[i] * row[0].norm_sqr() + p.sigma.hi[i] * row[g.ny - 1].norm_sqr());
    }
    BeamField {
        u,
        energy,
        grad_energy,
        flux,
    }
}

/// Energy-balance residuals of a marched field.
///
/// `exact_*` test each step with the midpoint value and vanish up to
/// rounding. `consistency_*` evaluate the pointwise identities at interior
/// nodes with centred z-differences and decay like O(dz^2).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeamResiduals {
    pub exact_im: Vec<f64>,
    pub exact_re: Vec<f64>,
    pub consistency_im: Vec<f64>,
    pub consistency_re: Vec<f64>,
    pub exact_im_rel: f64,
    pub exact_re_rel: f64,
    pub consistency_im_rel: f64,
    pub consistency_re_rel: f64,
}

impl BeamResiduals {
    pub fn exact_max_rel(&self) -> f64 {
        self.exact_im_rel.max(self.exact_re_rel)
    }

    pub fn consistency_max_rel(&self) -> f64 {
        self.consistency_im_rel.max(self.consistency_re_rel)
    }
}

fn rel(res: &[f64], scale: &[f64]) -> f64 {
    let m = res.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let s = scale.iter().fold(0.0f64, |a, b| a.max(*b));
    if s == 0.0 {
        m
    } else {
        m / s
    }
}

pub fn beam_energy_residuals(b: &BeamField, p: &BeamProblem) -> BeamResiduals {
    let g = &p.grid;
    let (nz, ny, om) = (g.nz, g.ny, p.omega);
    let s = &p.slowness;
    let mut exact_im = Vec::with_capacity(nz - 1);
    let mut exact_re = Vec::with_capacity(nz - 1);
    let mut sc_im = Vec::with_capacity(nz - 1);
    let mut sc_re = Vec::with_capacity(nz - 1);
    for n in 0..nz - 1 {
        let c = step_coeffs(p, n);
        let u0 = b.u.row(n);
        let u1 = b.u.row(n + 1);
        let m: Vec<C64> = (0..ny).map(|j| 0.5 * (u0[j] + u1[j])).collect();
        let de = (b.energy[n + 1] - b.energy[n]) / g.dz;
        let mut ds_term = 0.0;
        let mut ct_term = 0.0;
        let mut src = C64::new(0.0, 0.0);
        let mut cross = C64::new(0.0, 0.0);
        for j in 0..ny {
            let w = g.wy(j);
            let dsj = w * (s.s.at(n + 1, j) - s.s.at(n, j));
            ds_term += 0.5 * dsj * (u1[j].norm_sqr() + u0[j].norm_sqr()) / g.dz;
            ct_term += w * c.ct[j] * m[j].norm_sqr();
            src += w * m[j].conj() * c.f[j];
            cross += w * c.s[j] * u0[j].conj() * u1[j];
        }
        let fl = c.sig.0 * m[0].norm_sqr() + c.sig.1 * m[ny - 1].norm_sqr();
        let terms_im = [om * de, om * fl, om * (ct_term - ds_term), -src.im];
        exact_im.push(terms_im.iter().sum());
        sc_im.push(terms_im.iter().map(|t| t.abs()).sum());
        let gm = grad_energy_y(g, &m);
        let terms_re = [gm, -2.0 * om * cross.im / g.dz, -src.re];
        exact_re.push(terms_re.iter().sum());
        sc_re.push(terms_re.iter().map(|t| t.abs()).sum());
    }

    let mut cons_im = Vec::new();
    let mut cons_re = Vec::new();
    let mut cc_im = Vec::new();
    let mut cc_re = Vec::new();
    for n in 1..nz - 1 {
        let un = b.u.row(n);
        let de = (b.energy[n + 1] - b.energy[n - 1]) / (2.0 * g.dz);
        let mut diff = 0.0;
        let mut src = C64::new(0.0, 0.0);
        let mut tr = 0.0;
        for j in 0..ny {
            let w = g.wy(j);
            let du = (b.u.at(n + 1, j) - b.u.at(n - 1, j)) / (2.0 * g.dz);
            diff += w * (s.ctilde.at(n, j) - s.dz_s.at(n, j)) * un[j].norm_sqr();
            src += w * un[j].conj() * p.source.at(n, j);
            tr += w * s.s.at(n, j) * (un[j].conj() * du).im;
        }
        let terms_im = [om * de, om * b.flux[n], om * diff, -src.im];
        cons_im.push(terms_im.iter().sum());
        cc_im.push(terms_im.iter().map(|t| t.abs()).sum());
        let terms_re = [b.grad_energy[n], -2.0 * om * tr, -src.re];
        cons_re.push(terms_re.iter().sum());
        cc_re.push(terms_re.iter().map(|t| t.abs()).sum());
    }
    BeamResiduals {
        exact_im_rel: rel(&exact_im, &sc_im),
        exact_re_rel: rel(&exact_re, &sc_re),
        consistency_im_rel: rel(&cons_im, &cc_im),
        consistency_re_rel: rel(&cons_re, &cc_re),
        exact_im,
        exact_re,
        consistency_im: cons_im,
        consistency_re: cons_re,
    }
}

/// Left and right sides of the a-priori beam estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GronwallReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
    pub s_sim: f64,
    pub s_plus: f64,
    pub beta: f64,
    pub mu: f64,
    pub rho: f64,
}

/// Gronwall constants with weight `rho = 1` and Young parameter `mu = 1`.
///
/// With `eta = |sqrt(s) u|^2 + |sqrt(s) u_z|^2` the proof gives
/// `eta' <= beta eta + alpha`; the gradient term is bounded through the real
/// energy identity by `1.5 omega eta + |f/sqrt(s)|^2 / (2 omega)`.
pub fn gronwall_bound_check(b: &BeamField, p: &BeamProblem) -> Result<GronwallReport> {
    let g = &p.grid;
    let (nz, ny) = (g.nz, g.ny);
    let om = p.omega.abs();
    let (mu, rho) = (1.0f64, 1.0f64);
    let sf = &p.slowness;
    let dct = discrete_gradient_z(g, &ComplexField::from_real(&sf.ctilde))?;
    let mut s_sim = 0.0f64;
    let mut s_plus = 0.0f64;
    let mut q = 0.0f64;
    for k in 0..g.len() {
        let s = sf.s.values[k];
        s_sim = s_sim.max(((sf.ctilde.values[k] - sf.dz_s.values[k]) / s).abs());
        s_plus = s_plus.max(((sf.ctilde.values[k] + sf.dz_s.values[k]) / s).abs());
        q = q.max((dct.values[k].re / s).abs());
    }
    let beta = s_sim.max(s_plus) + mu + 0.5 * rho.sqrt() * q;

    let fz = discrete_gradient_z(g, &p.source)?;
    let uz = discrete_gradient_z(g, &b.u)?;
    let weighted = |f: &ComplexField, i: usize| -> f64 {
        (0..ny)
            .map(|j| g.wy(j) * f.at(i, j).norm_sqr() / sf.s.at(i, j))
            .sum()
    };
    let alpha: Vec<f64> = (0..nz)
        .map(|i| (weighted(&p.source, i) + rho * weighted(&fz, i)) / (4.0 * om * om * mu))
        .collect();

    let lap_h = laplacian_row(g, &p.h, (p.sigma.lo[0], p.sigma.hi[0]), p.omega);
    let mut eta0 = 0.0;
    for j in 0..ny {
        let s0 = sf.s.at(0, j);
        let slope = (p.source.at(0, j) + lap_h[j] - I * (p.omega * sf.ctilde.at(0, j)) * p.h[j])
            / (2.0 * I * p.omega * s0.sqrt());
        eta0 += g.wy(j) * (s0 * p.h[j].norm_sqr() + rho * slope.norm_sqr());
    }

    // eta_b(z_i) = e^{beta z_i} eta0 + int_0^{z_i} e^{beta (z_i - a)} alpha(a) da
    let mut eta_b = vec![0.0; nz];
    let mut acc = 0.0;
    eta_b[0] = eta0;
    for i in 1..nz {
        let decay = (beta * g.dz).exp();
        acc = acc * decay + 0.5 * g.dz * (alpha[i - 1] * decay + alpha[i]);
        eta_b[i] = (beta * g.z(i)).exp() * eta0 + acc;
    }
    let fsup = (0..nz).map(|i| weighted(&p.source, i)).fold(0.0f64, f64::max);
    let eta_sup = eta_b.iter().fold(0.0f64, |a, b| a.max(*b));
    let rhs = 1.5 * om * eta_sup + fsup / (2.0 * om) + 2.0 * om * eta_sup;

    let grad_sup = b.grad_energy.iter().fold(0.0f64, |a, v| a.max(*v));
    let e_sup = b.energy.iter().fold(0.0f64, |a, v| a.max(*v));
    let ez_sup = (0..nz)
        .map(|i| (0..ny).map(|j| g.wy(j) * sf.s.at(i, j) * uz.at(i, j).norm_sqr()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let lhs = grad_sup + om * ez_sup + om * e_sup;
    Ok(GronwallReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        holds: lhs <= rhs,
        s_sim,
        s_plus,
        beta,
        mu,
        rho,
    })
}

/// Compares the first marched difference quotient with the slope obtained
/// by substituting the initial data into the equation. Returns the
/// discrepancy relative to the slope norm; expected O(dz).
pub fn initial_slope_check(b: &BeamField, p: &BeamProblem) -> f64 {
    let g = &p.grid;
    let lap_h = laplacian_row(g, &p.h, (p.sigma.lo[0], p.sigma.hi[0]), p.omega);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..g.ny {
        let s0 = p.slowness.s.at(0, j);
        let slope = (p.source.at(0, j) + lap_h[j] - I * (p.omega * p.slowness.ctilde.at(0, j)) * p.h[j])
            / (2.0 * I * p.omega * s0);
        let fd = (b.u.at(1, j) - b.u.at(0, j)) / g.dz;
        num += g.wy(j) * (fd - slope).norm_sqr();
        den += g.wy(j) * slope.norm_sqr();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
