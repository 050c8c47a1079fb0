//! Parameter-to-state maps for the paraxial and Helmholtz variants, their
//! linearization, the constant-speed paraxial transform and the
//! observation operator.

use crate::beam::{march_beam, march_beam_midpoint_source, BeamField, BeamProblem, Impedance};
use crate::error::{Error, Result};
use crate::grid::{discrete_gradient_z_real, ComplexField, Grid, Mesh, RealField, SlownessField};
use crate::linalg::BandLu;
use crate::wave::{
    assemble_perturbed, load_vector, perturbed_coefficient_apply, solve_helmholtz, solve_perturbed_schrodinger,
    HelmholtzFactor, HelmholtzProblem, PerturbedProblem,
};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Paraxial,
    Helmholtz,
}

#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub grid: Grid,
    pub omega1: f64,
    pub omega2: f64,
    pub eps_tilde: f64,
    pub variant: Variant,
    pub h1: Vec<C64>,
    pub h2: Vec<C64>,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Lateral impedance of the difference-frequency wave (paraxial) or
    /// the boundary impedance on the Helmholtz domain.
    pub sigma: f64,
    pub sigma0: f64,
    pub sigma_l: f64,
    pub beta: f64,
    pub b_damp: f64,
    pub c_background: f64,
    pub helm_nx: usize,
    pub helm_ny: usize,
    pub strict_smallness: bool,
}

impl ModelConfig {
    pub fn omega_d(&self) -> f64 {
        self.omega1 - self.omega2
    }

    pub fn omega_plus(&self) -> f64 {
        self.omega1 * self.omega2 * self.omega_d()
    }

    /// `kappa = omega1 omega2 / omega_d`, so that `omega_plus = omega_d^2 kappa`.
    pub fn kappa(&self) -> f64 {
        self.omega1 * self.omega2 / self.omega_d()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 > self.omega2 && self.omega2 > 0.0) || !self.omega1.is_finite() {
            return Err(Error::Config(format!(
                "need omega1 > omega2 > 0, got {} and {}",
                self.omega1, self.omega2
            )));
        }
        if !(self.eps_tilde > 0.0 && self.eps_tilde < 1.0) {
            return Err(Error::Config(format!("eps_tilde must lie in (0,1), got {}", self.eps_tilde)));
        }
        if self.h1.len() != self.grid.ny || self.h2.len() != self.grid.ny {
            return Err(Error::Shape("excitation profiles need one value per y node".into()));
        }
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("sigma0", self.sigma0),
            ("sigma_l", self.sigma_l),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.variant == Variant::Paraxial && !(self.sigma > 0.0) {
            return Err(Error::Config("paraxial lateral impedance must be positive".into()));
        }
        if self.sigma < 0.0 || self.beta < 0.0 || self.b_damp < 0.0 {
            return Err(Error::Config("sigma, beta and b_damp must be nonnegative".into()));
        }
        if !(self.c_background > 0.0) {
            return Err(Error::Config("background sound speed must be positive".into()));
        }
        Ok(())
    }

    pub fn transform(&self) -> Result<ParaxialTransform> {
        ParaxialTransform::new(self.grid, self.eps_tilde, self.c_background, self.helm_nx, self.helm_ny)
    }
}

// ---------------------------------------------------------------------------
// Paraxial transform

/// `z = eps x1`, `y = sqrt(eps) x'` with travel time `x1 / c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParaxialTransform {
    pub grid: Grid,
    pub mesh: Mesh,
    pub eps_tilde: f64,
    pub c_background: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Paraxial grid to the physical mesh.
    ToPhysical,
    ToParaxial,
}

impl ParaxialTransform {
    pub fn new(grid: Grid, eps_tilde: f64, c_background: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(eps_tilde > 0.0) || !(c_background > 0.0) {
            return Err(Error::Config("transform needs eps_tilde > 0 and c > 0".into()));
        }
        let r = eps_tilde.sqrt();
        let mesh = Mesh::rect(0.0, grid.lz / eps_tilde, nx, grid.y_lo / r, grid.y_hi / r, ny)?;
        Ok(Self {
            grid,
            mesh,
            eps_tilde,
            c_background,
        })
    }

    /// Node-for-node relabeling of the paraxial grid.
    pub fn matched(grid: Grid, eps_tilde: f64, c_background: f64) -> Result<Self> {
        Self::new(grid, eps_tilde, c_background, grid.nz, grid.ny)
    }

    /// Constant-speed transform from a slowness field; anything else is
    /// rejected.
    pub fn from_slowness(grid: Grid, slowness: &RealField, eps_tilde: f64, nx: usize, ny: usize) -> Result<Self> {
        let (lo, hi) = (slowness.min(), slowness.max());
        if hi - lo > 1e-14 * hi.abs() {
            return Err(Error::Config(
                "paraxial transform supports constant sound speed only".into(),
            ));
        }
        Self::new(grid, eps_tilde, 1.0 / lo, nx, ny)
    }

    pub fn to_paraxial(&self, x1: f64, x2: f64) -> (f64, f64) {
        (self.eps_tilde * x1, self.eps_tilde.sqrt() * x2)
    }

    pub fn to_physical(&self, z: f64, y: f64) -> (f64, f64) {
        (z / self.eps_tilde, y / self.eps_tilde.sqrt())
    }

    pub fn travel_time(&self, x1: f64) -> f64 {
        x1 / self.c_background
    }

    /// `P^{-1}`: samples a grid field at the preimage of each mesh node,
    /// zero outside the beam domain.
    pub fn pull_back(&self, field: &ComplexField) -> Result<ComplexField> {
        field.check_shape(self.grid.shape(), "pull_back")?;
        let gm = Mesh::from_grid(&self.grid);
        let m = &self.mesh;
        let mut out = ComplexField::zeros(m.shape());
        for i in 0..m.nx {
            for j in 0..m.ny {
                let (z, y) = self.to_paraxial(m.x(i), m.y(j));
                out.set(i, j, interpolate(&gm, &field.values, z, y).unwrap_or_default());
            }
        }
        Ok(out)
    }

    pub fn pull_back_real(&self, field: &RealField) -> Result<RealField> {
        Ok(self.pull_back(&ComplexField::from_real(field))?.map(|v| v.re))
    }

    /// `P`: samples a mesh field at the image of each grid node.
    pub fn push_forward(&self, field: &ComplexField) -> Result<ComplexField> {
        field.check_shape(self.mesh.shape(), "push_forward")?;
        let g = &self.grid;
        let mut out = ComplexField::zeros(g.shape());
        for i in 0..g.nz {
            for j in 0..g.ny {
                let (x1, x2) = self.to_physical(g.z(i), g.y(j));
                out.set(i, j, interpolate(&self.mesh, &field.values, x1, x2).unwrap_or_default());
            }
        }
        Ok(out)
    }

    fn phase(&self, x1: f64, omega_d: f64, sign: f64) -> C64 {
        C64::from_polar(1.0, sign * omega_d * self.travel_time(x1))
    }
}

/// Coordinate relabeling between the paraxial grid and the physical mesh.
/// With `omega_d` set, the travel-time phase is applied as in
/// `eta_check = exp(-i omega_d tau) P^{-1} eta`.
pub fn paraxial_map(
    field: &ComplexField,
    transform: &ParaxialTransform,
    direction: Direction,
    omega_d: Option<f64>,
) -> Result<ComplexField> {
    let m = &transform.mesh;
    match direction {
        Direction::ToPhysical => {
            let mut out = transform.pull_back(field)?;
            if let Some(om) = omega_d {
                for i in 0..m.nx {
                    let ph = transform.phase(m.x(i), om, -1.0);
                    for j in 0..m.ny {
                        let k = m.idx(i, j);
                        out.values[k] *= ph;
                    }
                }
            }
            Ok(out)
        }
        Direction::ToParaxial => {
            field.check_shape(m.shape(), "paraxial_map")?;
            let mut f = field.clone();
            if let Some(om) = omega_d {
                for i in 0..m.nx {
                    let ph = transform.phase(m.x(i), om, 1.0);
                    for j in 0..m.ny {
                        let k = m.idx(i, j);
                        f.values[k] *= ph;
                    }
                }
            }
            transform.push_forward(&f)
        }
    }
}

/// Bilinear interpolation on a tensor mesh; `None` outside the closure.
/// Coordinates within `1e-9` cells of a node snap onto it.
pub fn interpolate(mesh: &Mesh, values: &[C64], x: f64, y: f64) -> Option<C64> {
    let locate = |v: f64, lo: f64, h: f64, n: usize| -> Option<(usize, f64)> {
        let t = (v - lo) / h;
        let r = t.round();
        let t = if (t - r).abs() < 1e-9 { r } else { t };
        if t < 0.0 || t > (n - 1) as f64 {
            return None;
        }
        let i = (t.floor() as usize).min(n.saturating_sub(2));
        Some((i, t - i as f64))
    };
    let (i, fx) = locate(x, mesh.x_lo, mesh.dx, mesh.nx)?;
    if mesh.dim == 1 {
        return Some(values[i] * (1.0 - fx) + values[i + 1] * fx);
    }
    let (j, fy) = locate(y, mesh.y_lo, mesh.dy, mesh.ny)?;
    let v00 = values[mesh.idx(i, j)];
    let v10 = values[mesh.idx(i + 1, j)];
    let v01 = values[mesh.idx(i, j + 1)];
    let v11 = values[mesh.idx(i + 1, j + 1)];
    Some(v00 * ((1.0 - fx) * (1.0 - fy)) + v10 * (fx * (1.0 - fy)) + v01 * ((1.0 - fx) * fy) + v11 * (fx * fy))
}

// ---------------------------------------------------------------------------
// Observation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObsPoint {
    Node { index: usize },
    At { x: f64, y: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSpec {
    pub mesh: Mesh,
    pub points: Vec<ObsPoint>,
    /// Quadrature weights of the trace norm.
    pub weights: Vec<f64>,
    pub omega_d: f64,
}

impl ObservationSpec {
    /// The edge `x = x_hi` (the line z = L on the beam grid), with trapezoid weights.
    pub fn far_end(mesh: Mesh, omega_d: f64) -> Self {
        let points = mesh.right_edge().into_iter().map(|index| ObsPoint::Node { index }).collect();
        let weights = (0..mesh.ny).map(|j| mesh.wy(j)).collect();
        Self {
            mesh,
            points,
            weights,
            omega_d,
        }
    }

    /// The whole boundary, weighted by the boundary measure.
    pub fn boundary(mesh: Mesh, omega_d: f64) -> Self {
        let nodes = mesh.boundary_nodes();
        let weights = nodes.iter().map(|&k| mesh.boundary_weight(k)).collect();
        Self {
            mesh,
            points: nodes.into_iter().map(|index| ObsPoint::Node { index }).collect(),
            weights,
            omega_d,
        }
    }

    /// Every mesh node, weighted by the lumped volume measure.
    pub fn all_nodes(mesh: Mesh, omega_d: f64) -> Self {
        Self {
            mesh,
            points: (0..mesh.len()).map(|index| ObsPoint::Node { index }).collect(),
            weights: mesh.weights(),
            omega_d,
        }
    }

    /// Arbitrary receivers with unit weights.
    pub fn from_points(mesh: Mesh, points: Vec<ObsPoint>, omega_d: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("observation set is empty".into()));
        }
        let s = Self {
            mesh,
            weights: vec![1.0; points.len()],
            points,
            omega_d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_omega(&self, omega_d: f64) -> Self {
        let mut s = self.clone();
        s.omega_d = omega_d;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("observation set is empty".into()));
        }
        for p in &self.points {
            match *p {
                ObsPoint::Node { index } if index >= self.mesh.len() => {
                    return Err(Error::Config(format!("receiver node {index} out of range")));
                }
                ObsPoint::At { x, y } => {
                    let zero = vec![C64::new(0.0, 0.0); self.mesh.len()];
                    if interpolate(&self.mesh, &zero, x, y).is_none() {
                        return Err(Error::Config(format!("receiver ({x}, {y}) outside the domain")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Node indices when every receiver sits on a node.
    pub fn node_indices(&self) -> Option<Vec<usize>> {
        self.points
            .iter()
            .map(|p| match p {
                ObsPoint::Node { index } => Some(*index),
                ObsPoint::At { .. } => None,
            })
            .collect()
    }
}

/// `i omega_d tr_Gamma psi`.
pub fn observe(psi: &ComplexField, spec: &ObservationSpec) -> Result<Vec<C64>> {
    psi.check_shape(spec.mesh.shape(), "observe")?;
    let f = I * spec.omega_d;
    spec.points
        .iter()
        .map(|p| match *p {
            ObsPoint::Node { index } => psi
                .values
                .get(index)
                .map(|v| f * v)
                .ok_or_else(|| Error::Config(format!("receiver node {index} out of range"))),
            ObsPoint::At { x, y } => interpolate(&spec.mesh, &psi.values, x, y)
                .map(|v| f * v)
                .ok_or_else(|| Error::Config(format!("receiver ({x}, {y}) outside the domain"))),
        })
        .collect()
}

pub fn trace_norm(trace: &[C64], spec: &ObservationSpec) -> f64 {
    trace
        .iter()
        .zip(&spec.weights)
        .map(|(v, w)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// Forward map

#[derive(Clone, Debug)]
pub struct StateTriple {
    pub phi1: BeamField,
    pub phi2: BeamField,
    /// On the beam grid (paraxial) or on the transform mesh (Helmholtz).
    pub psi: ComplexField,
    pub variant: Variant,
}

pub fn beam_problems(slowness: &SlownessField, cfg: &ModelConfig) -> Result<(BeamProblem, BeamProblem)> {
    let g = cfg.grid;
    let p1 = BeamProblem::homogeneous(g, slowness.clone(), cfg.omega1, cfg.h1.clone(), cfg.sigma1)?;
    let p2 = BeamProblem::homogeneous(g, slowness.clone(), cfg.omega2, cfg.h2.clone(), cfg.sigma2)?;
    Ok((p1, p2))
}

fn product_conj(a: &ComplexField, b: &ComplexField) -> ComplexField {
    let mut out = a.clone();
    for (o, v) in out.values.iter_mut().zip(&b.values) {
        *o *= v.conj();
    }
    out
}

pub fn paraxial_psi_problem(
    slowness: &SlownessField,
    f: ComplexField,
    cfg: &ModelConfig,
) -> PerturbedProblem {
    let g = cfg.grid;
    PerturbedProblem {
        grid: g,
        slowness: slowness.clone(),
        b: cfg.eps_tilde,
        omega: cfg.omega_d(),
        f,
        sigma0: vec![cfg.sigma0; g.ny],
        sigma_l: vec![cfg.sigma_l; g.ny],
        sigma: Impedance::constant(g.nz, cfg.sigma),
    }
}

/// Helmholtz problem on the transform mesh with coefficient `s2` and source `f`.
pub fn helmholtz_psi_problem(s2: RealField, f: ComplexField, cfg: &ModelConfig, t: &ParaxialTransform) -> HelmholtzProblem {
    let n = t.mesh.len();
    HelmholtzProblem {
        mesh: t.mesh,
        s2,
        omega: cfg.omega_d(),
        f,
        h: vec![C64::new(0.0, 0.0); n],
        sigma: vec![cfg.sigma; n],
        beta: cfg.beta,
        b_damp: cfg.b_damp,
        s0_sq: 1.0 / (cfg.c_background * cfg.c_background),
    }
}

/// Difference-frequency problem of the paraxial variant for the beam
/// product `prod = phi1 conj(phi2)`.
pub fn paraxial_stage(slowness: &SlownessField, eta: &RealField, prod: &ComplexField, cfg: &ModelConfig) -> PerturbedProblem {
    let coef = I * (cfg.omega_plus() / cfg.eps_tilde);
    let f = ComplexField::from_fn(cfg.grid.shape(), |i, j| coef * eta.at(i, j) * prod.at(i, j));
    paraxial_psi_problem(slowness, f, cfg)
}

/// Difference-frequency problem of the Helmholtz variant on the
/// transform mesh for the beam product `prod`.
pub fn helmholtz_stage(slowness: &SlownessField, eta: &RealField, prod: &ComplexField, cfg: &ModelConfig) -> Result<HelmholtzProblem> {
    let t = cfg.transform()?;
    let s_m = t.pull_back_real(&slowness.s)?;
    let eta_c = paraxial_map(&ComplexField::from_real(eta), &t, Direction::ToPhysical, Some(cfg.omega_d()))?;
    let prod_m = t.pull_back(prod)?;
    let coef = I * cfg.omega_plus();
    let f = ComplexField::from_fn(t.mesh.shape(), |i, j| coef * eta_c.at(i, j) * prod_m.at(i, j));
    Ok(helmholtz_psi_problem(s_m.map(|v| v * v), f, cfg, &t))
}

pub fn beam_product(phi1: &BeamField, phi2: &BeamField) -> ComplexField {
    product_conj(&phi1.u, &phi2.u)
}

/// The two beams at `omega1`, `omega2`, then the difference-frequency wave.
pub fn forward_s(slowness: &SlownessField, eta: &RealField, cfg: &ModelConfig) -> Result<StateTriple> {
    cfg.validate()?;
    let g = cfg.grid;
    eta.check_shape(g.shape(), "eta")?;
    let (p1, p2) = beam_problems(slowness, cfg)?;
    let (b1, b2) = rayon::join(|| march_beam(&p1), || march_beam(&p2));
    let (phi1, phi2) = (b1?, b2?);
    let prod = product_conj(&phi1.u, &phi2.u);
    let psi = match cfg.variant {
        Variant::Paraxial => solve_perturbed_schrodinger(&paraxial_stage(slowness, eta, &prod, cfg), cfg.strict_smallness)?.u,
        Variant::Helmholtz => solve_helmholtz(&helmholtz_stage(slowness, eta, &prod, cfg)?)?.u,
    };
    Ok(StateTriple {
        phi1,
        phi2,
        psi,
        variant: cfg.variant,
    })
}

/// Midpoint sensitivity source `-i w (dz ds) phi - 2 i w ds dz phi` per step.
fn beam_sensitivity_source(grid: &Grid, ds: &RealField, dds: &RealField, phi: &ComplexField, omega: f64) -> Vec<C64> {
    let (nz, ny) = (grid.nz, grid.ny);
    let mut out = Vec::with_capacity((nz - 1) * ny);
    for n in 0..nz - 1 {
        for j in 0..ny {
            let dsm = 0.5 * (ds.at(n, j) + ds.at(n + 1, j));
            let ddm = 0.5 * (dds.at(n, j) + dds.at(n + 1, j));
            let pm = 0.5 * (phi.at(n, j) + phi.at(n + 1, j));
            let pz = (phi.at(n + 1, j) - phi.at(n, j)) / grid.dz;
            out.push(-I * omega * (ddm * pm + 2.0 * dsm * pz));
        }
    }
    out
}

/// Linearized states: the derivative of the discrete forward map in the
/// direction `(dslo, deta)`.
pub fn forward_ds(
    slowness: &SlownessField,
    eta: &RealField,
    dslo: &RealField,
    deta: &RealField,
    base: &StateTriple,
    cfg: &ModelConfig,
) -> Result<StateTriple> {
    cfg.validate()?;
    let g = cfg.grid;
    dslo.check_shape(g.shape(), "dslo")?;
    deta.check_shape(g.shape(), "deta")?;
    let dds = discrete_gradient_z_real(&g, dslo);
    let (mut p1, mut p2) = beam_problems(slowness, cfg)?;
    p1.h = vec![C64::new(0.0, 0.0); g.ny];
    p2.h = vec![C64::new(0.0, 0.0); g.ny];
    let s1 = beam_sensitivity_source(&g, dslo, &dds, &base.phi1.u, cfg.omega1);
    let s2 = beam_sensitivity_source(&g, dslo, &dds, &base.phi2.u, cfg.omega2);
    let (d1, d2) = rayon::join(
        || march_beam_midpoint_source(&p1, &s1),
        || march_beam_midpoint_source(&p2, &s2),
    );
    let (dphi1, dphi2) = (d1?, d2?);
    let (phi1, phi2) = (&base.phi1.u, &base.phi2.u);
    // d(phi1 conj phi2) and the model products
    let prod = product_conj(phi1, phi2);
    let dprod = ComplexField::from_fn(g.shape(), |i, j| {
        dphi1.u.at(i, j) * phi2.at(i, j).conj() + phi1.at(i, j) * dphi2.u.at(i, j).conj()
    });
    let omd = cfg.omega_d();
    let dpsi = match cfg.variant {
        Variant::Paraxial => {
            let coef = I * (cfg.omega_plus() / cfg.eps_tilde);
            let src = ComplexField::from_fn(g.shape(), |i, j| {
                coef * (deta.at(i, j) * prod.at(i, j) + eta.at(i, j) * dprod.at(i, j))
            });
            let mut rhs = load_vector(&g, &src);
            let dsc: Vec<C64> = dslo.values.iter().map(|v| C64::new(*v, 0.0)).collect();
            let ddc: Vec<C64> = dds.values.iter().map(|v| C64::new(*v, 0.0)).collect();
            let cterm = perturbed_coefficient_apply(&g, &dsc, &ddc, omd, &base.psi.values);
            for (r, c) in rhs.iter_mut().zip(cterm) {
                *r -= c;
            }
            let pp = paraxial_psi_problem(slowness, ComplexField::zeros(g.shape()), cfg);
            let a = assemble_perturbed(
                &g,
                &pp.slowness.s,
                &pp.slowness.ctilde,
                pp.b,
                pp.omega,
                &pp.sigma0,
                &pp.sigma_l,
                &pp.sigma,
            );
            let lu = BandLu::factor(&a, "linearized difference-frequency system")?;
            ComplexField::from_vec(g.shape(), lu.solve(&rhs))?
        }
        Variant::Helmholtz => {
            let t = cfg.transform()?;
            let m = t.mesh;
            let s_m = t.pull_back_real(&slowness.s)?;
            let ds_m = t.pull_back_real(dslo)?;
            let eta_c = paraxial_map(&ComplexField::from_real(eta), &t, Direction::ToPhysical, Some(omd))?;
            let deta_c = paraxial_map(&ComplexField::from_real(deta), &t, Direction::ToPhysical, Some(omd))?;
            let prod_m = t.pull_back(&prod)?;
            let dprod_m = t.pull_back(&dprod)?;
            let coef = I * cfg.omega_plus();
            let df = ComplexField::from_fn(m.shape(), |i, j| {
                coef * (deta_c.at(i, j) * prod_m.at(i, j) + eta_c.at(i, j) * dprod_m.at(i, j))
            });
            let s2 = s_m.map(|v| v * v);
            let hp = helmholtz_psi_problem(s2.clone(), df, cfg, &t);
            let ops = hp.operators()?;
            let mut rhs = hp.load();
            for k in 0..m.len() {
                let ds2 = 2.0 * s_m.values[k] * ds_m.values[k];
                rhs[k] += ops.m.get(k, k) * (omd * omd * ds2) * base.psi.values[k];
            }
            let fac = HelmholtzFactor::new(&ops, &s2.values, omd)?;
            ComplexField::from_vec(m.shape(), fac.solve(&rhs))?
        }
    };
    Ok(StateTriple {
        phi1: dphi1,
        phi2: dphi2,
        psi: dpsi,
        variant: cfg.variant,
    })
}

/// Observation spec matching the variant's default receiver line.
pub fn default_observation(cfg: &ModelConfig) -> Result<ObservationSpec> {
    let mesh = match cfg.variant {
        Variant::Paraxial => Mesh::from_grid(&cfg.grid),
        Variant::Helmholtz => cfg.transform()?.mesh,
    };
    Ok(ObservationSpec::far_end(mesh, cfg.omega_d()))
}
