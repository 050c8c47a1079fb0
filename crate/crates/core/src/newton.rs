//! Frozen Newton iteration for the multi-frequency Helmholtz model: the
//! regularization schedule, the stopping index, noise generation and the
//! run loop with its history.

use crate::aao::{check_floor, FrequencySet, HelmAao, HelmState, HelmY};
use crate::beam::{march_beam, BeamProblem};
use crate::error::{Error, Result};
use crate::forward::{ModelConfig, ObservationSpec, ParaxialTransform};
use crate::grid::{ComplexField, SlownessField};
use crate::linalg::{cdot, cnorm, csr_combine, csr_diag, gram_product, pcg_complex, BandLu, CsrMatrix};
use crate::wave::assemble_adm;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub alpha0: f64,
    pub theta: f64,
    pub max_iter: usize,
    pub c_estimate: f64,
    pub theta_discrepancy: f64,
    /// Unbounded when absent (`null` in JSON).
    #[serde(with = "unbounded")]
    pub trust_radius: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub preconditioner: Preconditioner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    BlockJacobi,
    Constraint,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            alpha0: 1e-2,
            theta: 2.0 / 3.0,
            max_iter: 20,
            c_estimate: 0.0,
            theta_discrepancy: 1.0,
            trust_radius: f64::INFINITY,
            cg_tol: 1e-10,
            cg_max_iter: 20_000,
            preconditioner: Preconditioner::Constraint,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be positive");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        if !(self.c_estimate >= 0.0) {
            return bad("c_estimate must be nonnegative");
        }
        if !(self.theta_discrepancy > 0.0) {
            return bad("theta_discrepancy must be positive");
        }
        if !(self.trust_radius > 0.0) {
            return bad("trust_radius must be positive");
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return bad("CG tolerance and iteration cap must be positive");
        }
        Ok(())
    }
}

/// `alpha0 theta^n`.
pub fn alpha_schedule(n: usize, cfg: &NewtonConfig) -> f64 {
    cfg.alpha0 * cfg.theta.powi(n as i32)
}

/// `delta sum_{j<n} c^j alpha_{n-j-1}^{-1/2}`.
pub fn stopping_sum(n: usize, delta: f64, cfg: &NewtonConfig) -> f64 {
    let mut acc = 0.0;
    let mut cj = 1.0;
    for j in 0..n {
        acc += cj / alpha_schedule(n - j - 1, cfg).sqrt();
        cj *= cfg.c_estimate;
    }
    delta * acc
}

/// Largest `n <= max_iter` whose stopping sum stays below `theta_discrepancy`.
pub fn stopping_index(delta: f64, cfg: &NewtonConfig) -> usize {
    if delta <= 0.0 {
        return cfg.max_iter;
    }
    let mut n = 0;
    while n < cfg.max_iter && stopping_sum(n + 1, delta, cfg) <= cfg.theta_discrepancy {
        n += 1;
    }
    n
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyData {
    pub blocks: Vec<Vec<C64>>,
    pub delta_rel: f64,
    /// Achieved `|y_delta - y|`.
    pub delta_abs: f64,
    pub seed: u64,
}

/// Complex Gaussian noise rescaled so that `|y_delta - y| = delta_rel |y|`
/// in the given norm.
pub fn add_noise(data: &[Vec<C64>], norm: impl Fn(&[Vec<C64>]) -> f64, delta_rel: f64, seed: u64) -> NoisyData {
    if delta_rel == 0.0 {
        return NoisyData {
            blocks: data.to_vec(),
            delta_rel,
            delta_abs: 0.0,
            seed,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Vec<C64>> = data
        .iter()
        .map(|b| {
            b.iter()
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect()
        })
        .collect();
    let target = delta_rel * norm(data);
    let scale = target / norm(&noise);
    let blocks = data
        .iter()
        .zip(&noise)
        .map(|(b, e)| b.iter().zip(e).map(|(v, n)| v + n * scale).collect())
        .collect::<Vec<Vec<C64>>>();
    let diff: Vec<Vec<C64>> = blocks
        .iter()
        .zip(data)
        .map(|(a, b): (&Vec<C64>, &Vec<C64>)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    NoisyData {
        delta_abs: norm(&diff),
        blocks,
        delta_rel,
        seed,
    }
}

// ---------------------------------------------------------------------------
// Model construction

/// `phi1 conj(phi2)` from beams at constant background slowness, pulled
/// back to the transform mesh.
pub fn beam_product_source(cfg: &ModelConfig) -> Result<(ParaxialTransform, Vec<C64>)> {
    cfg.validate()?;
    let g = cfg.grid;
    let t = cfg.transform()?;
    let s0 = SlownessField::constant(&g, 1.0 / cfg.c_background)?;
    let p1 = BeamProblem::homogeneous(g, s0.clone(), cfg.omega1, cfg.h1.clone(), cfg.sigma1)?;
    let p2 = BeamProblem::homogeneous(g, s0, cfg.omega2, cfg.h2.clone(), cfg.sigma2)?;
    let (b1, b2) = rayon::join(|| march_beam(&p1), || march_beam(&p2));
    let (b1, b2) = (b1?, b2?);
    let prod = ComplexField::from_fn(g.shape(), |i, j| b1.u.at(i, j) * b2.u.at(i, j).conj());
    let f = t.pull_back(&prod)?.values;
    Ok((t, f))
}

/// All-at-once Helmholtz operator on the transform mesh of `cfg`.
pub fn helmholtz_inverse_model(
    cfg: &ModelConfig,
    fs: FrequencySet,
    obs: &ObservationSpec,
    data: Option<Vec<Vec<C64>>>,
) -> Result<HelmAao> {
    let (t, f) = beam_product_source(cfg)?;
    let n = t.mesh.len();
    let s0 = 1.0 / cfg.c_background;
    let ops = assemble_adm(&t.mesh, &vec![cfg.sigma; n], cfg.beta, cfg.b_damp, s0 * s0)?;
    HelmAao::new(ops, f, fs, obs, data)
}

impl HelmAao {
    /// `A + i w D - w^2 M diag(s2)` for pair `m`.
    pub fn pde_matrix(&self, m: usize, s2: &[C64]) -> CsrMatrix {
        let (l, _) = self.fs.split(m);
        let w = self.fs.omega(m);
        let d: Vec<C64> = s2.iter().zip(self.mdiag()).map(|(s, md)| -(w * w) * md * s).collect();
        csr_combine(&[(C64::new(1.0, 0.0), self.stiff(l)), (C64::new(1.0, 0.0), &csr_diag(&d))])
    }

    /// State with `psi` solving the PDE rows for the given coefficients.
    pub fn consistent_state(&self, s2: Vec<Vec<C64>>, eta: Vec<C64>) -> Result<HelmState> {
        if s2.len() != self.n_pairs() {
            return Err(Error::Shape("one s2 copy per frequency pair expected".into()));
        }
        let mw = &self.ops.mass;
        let psi: Result<Vec<Vec<C64>>> = (0..self.n_pairs())
            .into_par_iter()
            .map(|m| {
                let a = self.pde_matrix(m, &s2[m]);
                let (w, kap) = (self.fs.omega(m), self.fs.kappa_of(m));
                let rhs: Vec<C64> = (0..self.n()).map(|i| I * kap * w * w * mw[i] * eta[i] * self.f[i]).collect();
                let lu = BandLu::factor(&a, &format!("Helmholtz pair {m}"))?;
                Ok(lu.solve(&rhs))
            })
            .collect();
        Ok(HelmState { s2, eta, psi: psi? })
    }

    /// Exact traces `i w tr psi` of a state, one block per pair.
    pub fn traces(&self, q: &HelmState) -> Vec<Vec<C64>> {
        (0..self.n_pairs()).map(|m| self.trace(m, &q.psi[m])).collect()
    }
}

// ---------------------------------------------------------------------------
// Frozen derivative and normal equations

/// The derivative at the base state, assembled and factored once.
#[derive(Clone, Debug)]
pub struct FrozenDerivative {
    pub q0: HelmState,
    h: Vec<CsrMatrix>,
    lu: Vec<BandLu>,
    /// `-w^2 M psi0` per pair.
    bcoef: Vec<Vec<C64>>,
    /// `-i w^2 kappa W f` per pair.
    ecoef: Vec<Vec<C64>>,
}

impl FrozenDerivative {
    pub fn assemble(aao: &HelmAao, q0: &HelmState, floor_rel: f64) -> Result<Self> {
        for (m, p) in q0.psi.iter().enumerate() {
            check_floor(&format!("psi0[{m}]"), p, floor_rel)?;
        }
        check_floor("f", &aao.f, 0.0)?;
        let h: Vec<CsrMatrix> = (0..aao.n_pairs()).into_par_iter().map(|m| aao.pde_matrix(m, &q0.s2[m])).collect();
        let lu: Result<Vec<BandLu>> = h
            .par_iter()
            .enumerate()
            .map(|(m, a)| BandLu::factor(a, &format!("frozen Helmholtz block {m}")))
            .collect();
        let lu = lu?;
        let mw = &aao.ops.mass;
        let bcoef = (0..aao.n_pairs())
            .map(|m| {
                let w = aao.fs.omega(m);
                (0..aao.n()).map(|i| -(w * w) * aao.mdiag()[i] * q0.psi[m][i]).collect()
            })
            .collect();
        let ecoef = (0..aao.n_pairs())
            .map(|m| {
                let (w, kap) = (aao.fs.omega(m), aao.fs.kappa_of(m));
                (0..aao.n()).map(|i| -I * (w * w * kap * mw[i]) * aao.f[i]).collect()
            })
            .collect();
        Ok(Self {
            q0: q0.clone(),
            h,
            lu,
            bcoef,
            ecoef,
        })
    }

    pub fn matrices(&self) -> &[CsrMatrix] {
        &self.h
    }

    /// Bitwise equality of the assembled blocks.
    pub fn same_operator(&self, other: &Self) -> bool {
        self.q0 == other.q0 && self.h == other.h && self.bcoef == other.bcoef && self.ecoef == other.ecoef
    }

    /// `H^{-H} r` using complex symmetry of the blocks.
    fn solve_adjoint(&self, m: usize, r: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = r.iter().map(|v| v.conj()).collect();
        self.lu[m].solve(&c).into_iter().map(|v| v.conj()).collect()
    }

    pub fn apply(&self, aao: &HelmAao, dq: &HelmState) -> HelmY {
        let blocks: Vec<(Vec<C64>, Vec<C64>)> = (0..aao.n_pairs())
            .into_par_iter()
            .map(|m| {
                let mut r = self.h[m].matvec(&dq.psi[m]);
                for i in 0..r.len() {
                    r[i] += self.bcoef[m][i] * dq.s2[m][i] + self.ecoef[m][i] * dq.eta[i];
                }
                (r, aao.trace(m, &dq.psi[m]))
            })
            .collect();
        let (pde, obs) = blocks.into_iter().unzip();
        HelmY { pde, obs }
    }

    /// `F'^H W_Y y`.
    pub fn adjoint_weighted(&self, aao: &HelmAao, y: &HelmY) -> HelmState {
        let mw = &aao.ops.mass;
        let n = aao.n();
        let parts: Vec<(Vec<C64>, Vec<C64>, Vec<C64>)> = (0..aao.n_pairs())
            .into_par_iter()
            .map(|m| {
                let mu = aao.fs.weight(m);
                let w = aao.fs.omega(m);
                let g: Vec<C64> = (0..n).map(|i| y.pde[m][i] * (mu / mw[i])).collect();
                let mut dpsi = self.h[m].matvec_adjoint(&g);
                for (t, &k) in aao.gamma.iter().enumerate() {
                    dpsi[k] += (I * w).conj() * y.obs[m][t] * (mu * aao.gamma_w[t]);
                }
                let ds: Vec<C64> = (0..n).map(|i| self.bcoef[m][i].conj() * g[i]).collect();
                let de: Vec<C64> = (0..n).map(|i| self.ecoef[m][i].conj() * g[i]).collect();
                (ds, de, dpsi)
            })
            .collect();
        let mut out = HelmState::zeros(aao.n_pairs(), n);
        for (m, (ds, de, dpsi)) in parts.into_iter().enumerate() {
            out.s2[m] = ds;
            out.psi[m] = dpsi;
            for i in 0..n {
                out.eta[i] += de[i];
            }
        }
        out
    }
}

/// Block preconditioner: exact `psi` blocks without the coefficient
/// coupling, and per-node dense blocks for `(s2 copies, eta)`.
struct BlockPrecond {
    psi: Vec<BandLu>,
    nodes: Vec<DMatrix<C64>>,
}

fn penalty_small_matrix(fs: &FrequencySet) -> DMatrix<f64> {
    let nk = fs.kappa.len();
    let nl = fs.omega_d.len();
    let np = nl * nk;
    let meas = fs.measure();
    let mut p = DMatrix::<f64>::zeros(np, np);
    for l in 0..nl {
        let mu = fs.mu[l];
        let mut rows = Vec::new();
        if nk > 1 {
            let mut v = vec![0.0; np];
            v[l * nk] = 1.0;
            v[l * nk + 1] = -1.0;
            rows.push(v);
        }
        let mut v = vec![0.0; np];
        v[l * nk] += 1.0;
        for l2 in 0..nl {
            v[l2 * nk] -= fs.mu[l2] / meas;
        }
        rows.push(v);
        for v in rows {
            for a in 0..np {
                for b in 0..np {
                    p[(a, b)] += mu * v[a] * v[b];
                }
            }
        }
    }
    p
}

impl BlockPrecond {
    fn build(aao: &HelmAao, fd: &FrozenDerivative, alpha: f64) -> Result<Self> {
        let n = aao.n();
        let mw = aao.ops.mass.clone();
        let winv: Vec<f64> = mw.iter().map(|w| 1.0 / w).collect();
        let g2 = aao.h2_matrix();
        let psi: Result<Vec<BandLu>> = (0..aao.n_pairs())
            .into_par_iter()
            .map(|m| {
                let mu = aao.fs.weight(m);
                let w = aao.fs.omega(m);
                let hh = gram_product(&fd.h[m], &winv, &fd.h[m]);
                let mut tr = vec![ZERO; n];
                for (t, &node) in aao.gamma.iter().enumerate() {
                    tr[node] += C64::new(w * w * aao.gamma_w[t], 0.0);
                }
                let tr = csr_diag(&tr);
                let b = csr_combine(&[(C64::new(mu, 0.0), &hh), (C64::new(mu, 0.0), &tr), (C64::new(mu * alpha, 0.0), g2)]);
                BandLu::factor(&b, &format!("preconditioner block {m}"))
            })
            .collect();
        let np = aao.n_pairs();
        let pz = penalty_small_matrix(&aao.fs);
        let nodes = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut b = DMatrix::<C64>::zeros(np + 1, np + 1);
                for a in 0..np {
                    for c in 0..np {
                        b[(a, c)] = C64::new(aao.penalty_weight * pz[(a, c)] * mw[i], 0.0);
                    }
                }
                for m in 0..np {
                    let mu = aao.fs.weight(m);
                    let bc = fd.bcoef[m][i];
                    let ec = fd.ecoef[m][i];
                    b[(m, m)] += bc.norm_sqr() * mu / mw[i] + alpha * mu * mw[i];
                    b[(m, np)] += bc.conj() * ec * (mu / mw[i]);
                    b[(np, m)] += ec.conj() * bc * (mu / mw[i]);
                    b[(np, np)] += ec.norm_sqr() * mu / mw[i];
                }
                b[(np, np)] += alpha * mw[i];
                b.try_inverse().unwrap_or_else(|| DMatrix::identity(np + 1, np + 1))
            })
            .collect();
        Ok(Self { psi: psi?, nodes })
    }

    fn apply(&self, np: usize, n: usize, r: &[C64]) -> Vec<C64> {
        let x = HelmState::unflatten(r, np, n);
        let psi: Vec<Vec<C64>> = (0..np).into_par_iter().map(|m| self.psi[m].solve(&x.psi[m])).collect();
        let mut s2 = vec![vec![ZERO; n]; np];
        let mut eta = vec![ZERO; n];
        for i in 0..n {
            let mut v = nalgebra::DVector::<C64>::zeros(np + 1);
            for m in 0..np {
                v[m] = x.s2[m][i];
            }
            v[np] = x.eta[i];
            let z = &self.nodes[i] * v;
            for m in 0..np {
                s2[m][i] = z[m];
            }
            eta[i] = z[np];
        }
        HelmState { s2, eta, psi }.flatten()
    }
}

/// Preconditioner in the variables `u = H dpsi + B ds + E deta`: exact
/// elimination of the PDE rows with the frozen factors, then a block
/// diagonal scaling by `W/mu` on `u` and by the regularization plus
/// penalty on the coefficients.
struct ConstraintPrecond {
    nodes: Vec<DMatrix<C64>>,
}

impl ConstraintPrecond {
    fn build(aao: &HelmAao, alpha: f64) -> Self {
        let np = aao.n_pairs();
        let mw = &aao.ops.mass;
        let pz = penalty_small_matrix(&aao.fs);
        let nodes = (0..aao.n())
            .into_par_iter()
            .map(|i| {
                let mut b = DMatrix::<C64>::zeros(np + 1, np + 1);
                for a in 0..np {
                    for c in 0..np {
                        b[(a, c)] = C64::new(aao.penalty_weight * pz[(a, c)] * mw[i], 0.0);
                    }
                    b[(a, a)] += alpha * aao.fs.weight(a) * mw[i];
                }
                b[(np, np)] += alpha * mw[i];
                b.try_inverse().unwrap_or_else(|| DMatrix::identity(np + 1, np + 1))
            })
            .collect();
        Self { nodes }
    }

    fn apply(&self, aao: &HelmAao, fd: &FrozenDerivative, r: &[C64]) -> Vec<C64> {
        let (np, n) = (aao.n_pairs(), aao.n());
        let x = HelmState::unflatten(r, np, n);
        let mw = &aao.ops.mass;
        let yu: Vec<Vec<C64>> = (0..np).into_par_iter().map(|m| fd.solve_adjoint(m, &x.psi[m])).collect();
        let mut ys = x.s2.clone();
        let mut ye = x.eta.clone();
        for m in 0..np {
            for i in 0..n {
                ys[m][i] -= fd.bcoef[m][i].conj() * yu[m][i];
                ye[i] -= fd.ecoef[m][i].conj() * yu[m][i];
            }
        }
        let mut zs = vec![vec![ZERO; n]; np];
        let mut ze = vec![ZERO; n];
        for i in 0..n {
            let mut v = nalgebra::DVector::<C64>::zeros(np + 1);
            for m in 0..np {
                v[m] = ys[m][i];
            }
            v[np] = ye[i];
            let z = &self.nodes[i] * v;
            for m in 0..np {
                zs[m][i] = z[m];
            }
            ze[i] = z[np];
        }
        let psi: Vec<Vec<C64>> = (0..np)
            .into_par_iter()
            .map(|m| {
                let mu = aao.fs.weight(m);
                let rhs: Vec<C64> = (0..n)
                    .map(|i| yu[m][i] * (mw[i] / mu) - fd.bcoef[m][i] * zs[m][i] - fd.ecoef[m][i] * ze[i])
                    .collect();
                fd.lu[m].solve(&rhs)
            })
            .collect();
        HelmState { s2: zs, eta: ze, psi }.flatten()
    }
}

fn y_norm_sq(aao: &HelmAao, y: &HelmY) -> f64 {
    aao.norm_y(y).total.powi(2)
}

/// `|F(q_n) - y + F'(q - q_n)|^2 + alpha |q - q0|_X^2 + |P q|_Z^2`.
pub fn step_objective(aao: &HelmAao, fd: &FrozenDerivative, res_n: &HelmY, q_n: &HelmState, q: &HelmState, alpha: f64) -> f64 {
    let lin = fd.apply(aao, &q.sub(q_n));
    let r = HelmY {
        pde: res_n.pde.iter().zip(&lin.pde).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect(),
        obs: res_n.obs.iter().zip(&lin.obs).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect(),
    };
    y_norm_sq(aao, &r) + alpha * aao.norm_x(&q.sub(&fd.q0)).powi(2) + aao.norm_z(&aao.penalty_apply(q)).powi(2)
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub q: HelmState,
    pub objective_before: f64,
    pub objective_after: f64,
    pub cg_iterations: usize,
    pub optimality_residual: f64,
    /// Fraction of the unconstrained step taken (1 unless the ball was hit).
    pub step_fraction: f64,
}

fn normal_apply(aao: &HelmAao, fd: &FrozenDerivative, alpha: f64, x: &[C64]) -> Vec<C64> {
    let (np, n) = (aao.n_pairs(), aao.n());
    let d = HelmState::unflatten(x, np, n);
    let a = fd.adjoint_weighted(aao, &fd.apply(aao, &d)).flatten();
    let g = aao.gram_x(&d).flatten();
    let p = aao.penalty_adjoint_weighted(&aao.penalty_apply(&d)).flatten();
    (0..x.len()).map(|k| a[k] + g[k] * alpha + p[k]).collect()
}

fn dense_fallback(aao: &HelmAao, fd: &FrozenDerivative, alpha: f64, rhs: &[C64]) -> Result<Vec<C64>> {
    let dim = rhs.len();
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for c in 0..dim {
        let mut e = vec![ZERO; dim];
        e[c] = C64::new(1.0, 0.0);
        let col = normal_apply(aao, fd, alpha, &e);
        for r in 0..dim {
            mat[(r, c)] = col[r];
        }
    }
    let b = nalgebra::DVector::from_column_slice(rhs);
    mat.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Solver("normal equations are singular".into()))
}

/// Dimension below which a failed CG solve is retried densely.
const DENSE_FALLBACK_DIM: usize = 3000;

/// One frozen Newton step from `q_n`, followed by the scale-back into
/// the trust ball around `q0` along the step direction.
pub fn newton_step(aao: &HelmAao, fd: &FrozenDerivative, q_n: &HelmState, alpha: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
    if !(alpha > 0.0) {
        return Err(Error::Config("alpha must be positive".into()));
    }
    let (np, n) = (aao.n_pairs(), aao.n());
    let res = aao.apply(q_n)?;
    let q0 = &fd.q0;
    let g1 = fd.adjoint_weighted(aao, &res).flatten();
    let g2 = aao.gram_x(&q_n.sub(q0)).flatten();
    let g3 = aao.penalty_adjoint_weighted(&aao.penalty_apply(q_n)).flatten();
    let rhs: Vec<C64> = (0..g1.len()).map(|k| -(g1[k] + g2[k] * alpha + g3[k])).collect();
    let x0 = vec![ZERO; rhs.len()];
    let out = match cfg.preconditioner {
        Preconditioner::BlockJacobi => {
            let pre = BlockPrecond::build(aao, fd, alpha)?;
            pcg_complex(|x| normal_apply(aao, fd, alpha, x), |r| pre.apply(np, n, r), &rhs, &x0, cfg.cg_tol, cfg.cg_max_iter)
        }
        Preconditioner::Constraint => {
            let pre = ConstraintPrecond::build(aao, alpha);
            pcg_complex(|x| normal_apply(aao, fd, alpha, x), |r| pre.apply(aao, fd, r), &rhs, &x0, cfg.cg_tol, cfg.cg_max_iter)
        }
    };
    let mut iterations = out.iterations;
    let mut dx = out.x;
    if !out.converged {
        log::warn!(
            "CG stopped at relative residual {:e} after {} iterations",
            out.relative_residual,
            out.iterations
        );
        if rhs.len() <= DENSE_FALLBACK_DIM {
            dx = dense_fallback(aao, fd, alpha, &rhs)?;
            iterations = 0;
        }
    }
    let nd = normal_apply(aao, fd, alpha, &dx);
    let rn = cnorm(&rhs);
    let opt = if rn == 0.0 {
        0.0
    } else {
        cnorm(&nd.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) / rn
    };
    if !(opt <= 1e-8) {
        return Err(Error::Solver(format!("normal equations solved only to relative residual {opt:e}")));
    }
    let d = HelmState::unflatten(&dx, np, n);
    // scale back along q_n + t d to the ball |q - q0|_X <= rho
    let mut t = 1.0;
    let full = q_n.axpy(C64::new(1.0, 0.0), &d);
    if cfg.trust_radius.is_finite() && aao.norm_x(&full.sub(q0)) > cfg.trust_radius {
        let e = q_n.sub(q0);
        let ge = aao.gram_x(&e).flatten();
        let gd = aao.gram_x(&d).flatten();
        let a = cdot(&d.flatten(), &gd).re;
        let b = 2.0 * cdot(&d.flatten(), &ge).re;
        let c = cdot(&e.flatten(), &ge).re - cfg.trust_radius.powi(2);
        t = if a > 0.0 {
            ((-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    let q = if t == 1.0 { full } else { q_n.axpy(C64::new(t, 0.0), &d) };
    let before = step_objective(aao, fd, &res, q_n, q_n, alpha);
    let after = step_objective(aao, fd, &res, q_n, &q, alpha);
    if !q.is_finite() || !after.is_finite() {
        return Err(Error::Solver("Newton step produced non-finite values".into()));
    }
    Ok(StepOutcome {
        q,
        objective_before: before,
        objective_after: after,
        cg_iterations: iterations,
        optimality_residual: opt,
        step_fraction: t,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub n: usize,
    pub alpha: f64,
    pub objective: f64,
    pub data_residual: f64,
    pub penalty: f64,
    /// `|q_n - q_true|_X` when the truth is known.
    pub err_x: Option<f64>,
    pub err_rel: Option<f64>,
    pub ball_distance: f64,
    pub step_fraction: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub history: Vec<HistoryRow>,
    pub n_star: usize,
    pub delta_rel: f64,
    pub config: NewtonConfig,
    #[serde(skip)]
    pub final_state: Option<HelmState>,
    /// Logged only; kept out of written outputs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ReconstructionResult {
    pub fn final_err_rel(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.err_rel)
    }

    pub fn ball_active(&self) -> bool {
        self.history.iter().any(|r| r.step_fraction < 1.0)
    }
}

/// Runs the frozen iteration for `n*(delta_rel)` steps.
pub fn run_inversion(
    aao: &HelmAao,
    q0: &HelmState,
    truth: Option<&HelmState>,
    cfg: &NewtonConfig,
    delta_rel: f64,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let fd = FrozenDerivative::assemble(aao, q0, crate::aao::FLOOR_REL)?;
    let n_star = stopping_index(delta_rel, cfg);
    let truth_norm = truth.map(|t| aao.norm_x(t));
    let row = |n: usize, q: &HelmState, frac: f64, cg: usize| -> Result<HistoryRow> {
        let alpha = alpha_schedule(n, cfg);
        let res = aao.apply(q)?;
        let data_residual = aao.norm_y(&res).total;
        let penalty = aao.norm_z(&aao.penalty_apply(q));
        let ball = aao.norm_x(&q.sub(q0));
        let err = truth.map(|t| aao.norm_x(&q.sub(t)));
        Ok(HistoryRow {
            n,
            alpha,
            objective: data_residual.powi(2) + alpha * ball.powi(2) + penalty.powi(2),
            data_residual,
            penalty,
            err_x: err,
            err_rel: err.zip(truth_norm).map(|(e, t)| e / t),
            ball_distance: ball,
            step_fraction: frac,
            cg_iterations: cg,
        })
    };
    let mut q = q0.clone();
    let mut history = vec![row(0, &q, 1.0, 0)?];
    for n in 0..n_star {
        let alpha = alpha_schedule(n, cfg);
        let step = newton_step(aao, &fd, &q, alpha, cfg).map_err(|e| Error::Solver(format!("Newton step {n}: {e}")))?;
        if step.objective_after > step.objective_before + 1e-12 * step.objective_before.max(1.0) {
            log::warn!(
                "step {n}: objective rose from {:e} to {:e}",
                step.objective_before,
                step.objective_after
            );
        }
        q = step.q;
        let r = row(n + 1, &q, step.step_fraction, step.cg_iterations)?;
        log::info!(
            "newton {}: alpha {:.3e} residual {:.3e} penalty {:.3e} err {:?} cg {}",
            r.n,
            alpha,
            r.data_residual,
            r.penalty,
            r.err_rel,
            r.cg_iterations
        );
        history.push(r);
    }
    let wall = start.elapsed().as_secs_f64();
    log::info!("inversion finished in {wall:.2} s");
    Ok(ReconstructionResult {
        history,
        n_star,
        delta_rel,
        config: cfg.clone(),
        final_state: Some(q),
        wall_time_s: wall,
    })
}

/// Largest sampled ratio `|r(q) - (q - q0)|_X / |q - q0|_X` over
/// perturbations of size `radius`.
pub fn estimate_c(aao: &HelmAao, q0: &HelmState, directions: &[HelmState], radius: f64) -> Result<f64> {
    let mut c: f64 = 0.0;
    for d in directions {
        let nd = aao.norm_x(d);
        if nd == 0.0 {
            continue;
        }
        let q = q0.axpy(C64::new(radius / nd, 0.0), d);
        let (lhs, _) = aao.remainder_closeness(&q, q0, crate::aao::FLOOR_REL)?;
        c = c.max(lhs / radius);
    }
    Ok(c)
}
