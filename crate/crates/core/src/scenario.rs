//! Scenario files: grid, model, ground-truth presets, receivers,
//! frequencies and solver settings, with a content hash.

use crate::aao::{FrequencySet, HelmAao, HelmState};
use crate::error::{Error, Result};
use crate::forward::{ModelConfig, ObsPoint, ObservationSpec, ParaxialTransform, Variant};
use crate::grid::{Grid, Mesh, RealField, SlownessField};
use crate::newton::NewtonConfig;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lz: f64,
    pub nz: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Excitation {
    Gaussian { center: f64, width: f64, amplitude: f64 },
    Constant { value: f64 },
}

impl Excitation {
    pub fn profile(&self, grid: &Grid) -> Vec<C64> {
        (0..grid.ny)
            .map(|j| match *self {
                Excitation::Gaussian {
                    center,
                    width,
                    amplitude,
                } => C64::new(amplitude * (-((grid.y(j) - center) / width).powi(2)).exp(), 0.0),
                Excitation::Constant { value } => C64::new(value, 0.0),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub omega1: f64,
    pub omega2: f64,
    pub eps_tilde: f64,
    pub variant: Variant,
    #[serde(default = "one")]
    pub c_background: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub sigma_l: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub b_damp: f64,
    #[serde(default)]
    pub strict_smallness: bool,
    pub excitation: Excitation,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { nx: 32, ny: 16 }
    }
}

/// Coefficient presets in paraxial coordinates `(z, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Constant {
        value: f64,
    },
    /// Widths along `z` and `y`.
    GaussianBump {
        base: f64,
        center: [f64; 2],
        width: [f64; 2],
        amplitude: f64,
    },
    /// Two smoothed discs.
    TwoInclusions {
        base: f64,
        centers: [[f64; 2]; 2],
        radius: f64,
        amplitudes: [f64; 2],
    },
}

impl Preset {
    pub fn eval(&self, z: f64, y: f64) -> f64 {
        match self {
            Preset::Constant { value } => *value,
            Preset::GaussianBump {
                base,
                center,
                width,
                amplitude,
            } => base + amplitude * (-((z - center[0]) / width[0]).powi(2) - ((y - center[1]) / width[1]).powi(2)).exp(),
            Preset::TwoInclusions {
                base,
                centers,
                radius,
                amplitudes,
            } => {
                let mut v = *base;
                for (c, a) in centers.iter().zip(amplitudes) {
                    let r = ((z - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt();
                    v += a * 0.5 * (1.0 - ((r - radius) / (0.2 * radius)).tanh());
                }
                v
            }
        }
    }

    /// Background value (the preset far from its features).
    pub fn base(&self) -> f64 {
        match self {
            Preset::Constant { value } => *value,
            Preset::GaussianBump { base, .. } | Preset::TwoInclusions { base, .. } => *base,
        }
    }

    pub fn on_grid(&self, grid: &Grid) -> RealField {
        RealField::from_fn(grid.shape(), |i, j| self.eval(grid.z(i), grid.y(j)))
    }

    /// Values on the Helmholtz mesh, evaluated at the paraxial image of each node.
    pub fn on_mesh(&self, t: &ParaxialTransform) -> Vec<f64> {
        let m = &t.mesh;
        (0..m.len())
            .map(|k| {
                let (z, y) = t.to_paraxial(m.x(k / m.ny), m.y(k % m.ny));
                self.eval(z, y)
            })
            .collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match self {
            Preset::Constant { value } => value.is_finite(),
            Preset::GaussianBump { base, width, amplitude, .. } => {
                base.is_finite() && width[0] > 0.0 && width[1] > 0.0 && amplitude.is_finite()
            }
            Preset::TwoInclusions { base, radius, .. } => base.is_finite() && *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {what} preset")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub slowness: Preset,
    pub eta: Preset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationKind {
    #[default]
    FarEnd,
    Boundary,
    AllNodes,
    /// Node-snapped receivers given in mesh coordinates.
    Points { points: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySpec {
    pub omega_d: Vec<f64>,
    pub kappa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    /// Truth plus the given smooth offsets, scaled to a relative X distance.
    TruthOffset {
        distance: f64,
        slowness_sq: Preset,
        eta: Preset,
    },
    /// Constant background coefficients.
    Background,
}

impl Default for InitialGuess {
    fn default() -> Self {
        InitialGuess::TruthOffset {
            distance: 0.1,
            slowness_sq: Preset::GaussianBump {
                base: 0.0,
                center: [0.3, 0.0],
                width: [0.4, 0.9],
                amplitude: 0.2,
            },
            eta: Preset::GaussianBump {
                base: 0.0,
                center: [0.5, 0.22],
                width: [0.4, 0.9],
                amplitude: 0.5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSpec {
    pub config: NewtonConfig,
    pub penalty_weight: f64,
    pub initial: InitialGuess,
}

impl Default for InversionSpec {
    fn default() -> Self {
        Self {
            config: NewtonConfig::default(),
            penalty_weight: 1.0,
            initial: InitialGuess::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub sigma: f64,
    pub beta: f64,
    pub b_damp: f64,
    pub n_modes: usize,
    /// Number of modes in the injectivity probe.
    pub probe_modes: usize,
}

impl Default for SpectralSpec {
    fn default() -> Self {
        Self {
            lx: 2.0,
            ly: 1.0,
            nx: 25,
            ny: 13,
            sigma: 0.0,
            beta: 0.0,
            b_damp: 0.1,
            n_modes: 20,
            probe_modes: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub helmholtz_mesh: MeshSpec,
    pub truth: TruthSpec,
    #[serde(default)]
    pub observation: ObservationKind,
    pub frequencies: FrequencySpec,
    #[serde(default)]
    pub inversion: InversionSpec,
    #[serde(default)]
    pub spectral: SpectralSpec,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical serialization (field order of the types, shortest
    /// round-trip floats).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config()?.validate()?;
        self.truth.slowness.validate("slowness")?;
        self.truth.eta.validate("eta")?;
        let g = self.grid()?;
        let s = self.truth.slowness.on_grid(&g);
        if s.values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("truth slowness must be positive".into()));
        }
        self.frequency_set()?;
        self.inversion.config.validate()?;
        if !(self.inversion.penalty_weight > 0.0) {
            return Err(Error::Config("penalty_weight must be positive".into()));
        }
        if let InitialGuess::TruthOffset { distance, .. } = self.inversion.initial {
            if !(distance >= 0.0) {
                return Err(Error::Config("initial distance must be nonnegative".into()));
            }
        }
        let sp = &self.spectral;
        if !(sp.lx > 0.0 && sp.ly >= 0.0) || sp.nx < 2 || sp.n_modes == 0 || sp.probe_modes == 0 {
            return Err(Error::Config("invalid spectral settings".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.lz, g.nz, g.y_lo, g.y_hi, g.ny)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let grid = self.grid()?;
        let m = &self.model;
        let h = m.excitation.profile(&grid);
        Ok(ModelConfig {
            grid,
            omega1: m.omega1,
            omega2: m.omega2,
            eps_tilde: m.eps_tilde,
            variant: m.variant,
            h1: h.clone(),
            h2: h,
            sigma1: m.sigma1,
            sigma2: m.sigma2,
            sigma: m.sigma,
            sigma0: m.sigma0,
            sigma_l: m.sigma_l,
            beta: m.beta,
            b_damp: m.b_damp,
            c_background: m.c_background,
            helm_nx: self.helmholtz_mesh.nx,
            helm_ny: self.helmholtz_mesh.ny,
            strict_smallness: m.strict_smallness,
        })
    }

    pub fn frequency_set(&self) -> Result<FrequencySet> {
        FrequencySet::uniform(self.frequencies.omega_d.clone(), self.frequencies.kappa.clone())
    }

    pub fn slowness(&self) -> Result<SlownessField> {
        let g = self.grid()?;
        SlownessField::new(&g, self.truth.slowness.on_grid(&g))
    }

    pub fn eta(&self) -> Result<RealField> {
        Ok(self.truth.eta.on_grid(&self.grid()?))
    }

    /// Receivers on `mesh` at difference frequency `omega_d`.
    pub fn observation(&self, mesh: Mesh, omega_d: f64) -> Result<ObservationSpec> {
        Ok(match &self.observation {
            ObservationKind::FarEnd => ObservationSpec::far_end(mesh, omega_d),
            ObservationKind::Boundary => ObservationSpec::boundary(mesh, omega_d),
            ObservationKind::AllNodes => ObservationSpec::all_nodes(mesh, omega_d),
            ObservationKind::Points { points } => {
                let pts = points
                    .iter()
                    .map(|p| {
                        let i = ((p[0] - mesh.x_lo) / mesh.dx).round();
                        let j = if mesh.dim == 1 { 0.0 } else { ((p[1] - mesh.y_lo) / mesh.dy).round() };
                        if i < 0.0 || j < 0.0 || i as usize >= mesh.nx || j as usize >= mesh.ny {
                            return Err(Error::Config(format!("receiver ({}, {}) outside the domain", p[0], p[1])));
                        }
                        Ok(ObsPoint::Node {
                            index: mesh.idx(i as usize, j as usize),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ObservationSpec::from_points(mesh, pts, omega_d)?
            }
        })
    }

    /// Multi-frequency Helmholtz operator with optional data.
    pub fn helmholtz_aao(&self, data: Option<Vec<Vec<C64>>>) -> Result<HelmAao> {
        let cfg = self.model_config()?;
        let t = cfg.transform()?;
        let obs = self.observation(t.mesh, cfg.omega_d())?;
        let mut aao = crate::newton::helmholtz_inverse_model(&cfg, self.frequency_set()?, &obs, data)?;
        aao.penalty_weight = self.inversion.penalty_weight;
        Ok(aao)
    }

    /// Ground-truth all-at-once state: `s^2` on every copy, `eta` pulled
    /// back, consistent `psi`.
    pub fn helmholtz_truth(&self, aao: &HelmAao) -> Result<HelmState> {
        let t = self.model_config()?.transform()?;
        let s2: Vec<C64> = self.truth.slowness.on_mesh(&t).iter().map(|s| C64::new(s * s, 0.0)).collect();
        let eta: Vec<C64> = self.truth.eta.on_mesh(&t).iter().map(|v| C64::new(*v, 0.0)).collect();
        aao.consistent_state(vec![s2; aao.n_pairs()], eta)
    }

    /// Initial guess for the inversion together with its relative distance.
    pub fn helmholtz_initial(&self, aao: &HelmAao, truth: &HelmState) -> Result<(HelmState, f64)> {
        let t = self.model_config()?.transform()?;
        let tn = aao.norm_x(truth);
        match &self.inversion.initial {
            InitialGuess::Background => {
                let s0 = self.truth.slowness.base();
                let s2 = vec![C64::new(s0 * s0, 0.0); aao.n()];
                let eta = vec![C64::new(self.truth.eta.base(), 0.0); aao.n()];
                let q0 = aao.consistent_state(vec![s2; aao.n_pairs()], eta)?;
                let d = aao.norm_x(&q0.sub(truth)) / tn;
                Ok((q0, d))
            }
            InitialGuess::TruthOffset {
                distance,
                slowness_sq,
                eta,
            } => {
                let ds = slowness_sq.on_mesh(&t);
                let de = eta.on_mesh(&t);
                let make = |a: f64| -> Result<HelmState> {
                    let s2: Vec<C64> = truth.s2[0].iter().zip(&ds).map(|(s, d)| s + a * d).collect();
                    let e: Vec<C64> = truth.eta.iter().zip(&de).map(|(s, d)| s + a * d).collect();
                    aao.consistent_state(vec![s2; aao.n_pairs()], e)
                };
                if *distance == 0.0 {
                    return Ok((truth.clone(), 0.0));
                }
                let dist = |a: f64| -> Result<f64> { Ok(aao.norm_x(&make(a)?.sub(truth)) / tn) };
                // secant on a -> distance(a) - target
                let (mut a0, mut a1) = (0.5, 1.0);
                let (mut f0, mut f1) = (dist(a0)? - distance, dist(a1)? - distance);
                for _ in 0..30 {
                    if f1.abs() <= 1e-8 * distance || f1 == f0 {
                        break;
                    }
                    let a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
                    a0 = a1;
                    f0 = f1;
                    a1 = a2;
                    f1 = dist(a1)? - distance;
                }
                let q0 = make(a1)?;
                let d = aao.norm_x(&q0.sub(truth)) / tn;
                Ok((q0, d))
            }
        }
    }
}

/// The bundled default scenario.
pub fn default_scenario() -> Scenario {
    Scenario::from_json(DEFAULT_SCENARIO).expect("default scenario is valid")
}

pub const DEFAULT_SCENARIO: &str = r#"{
  "name": "default",
  "grid": { "lz": 1.0, "nz": 101, "y_lo": -1.0, "y_hi": 1.0, "ny": 41 },
  "model": {
    "omega1": 20.0, "omega2": 19.0, "eps_tilde": 0.2, "variant": "helmholtz",
    "c_background": 1.0,
    "sigma1": 1.0, "sigma2": 1.0, "sigma": 1.0, "sigma0": 1.0, "sigma_l": 1.0,
    "beta": 0.0, "b_damp": 0.1, "strict_smallness": false,
    "excitation": { "kind": "gaussian", "center": 0.0, "width": 0.4, "amplitude": 1.0 }
  },
  "helmholtz_mesh": { "nx": 32, "ny": 16 },
  "truth": {
    "slowness": { "kind": "gaussian_bump", "base": 1.0, "center": [0.5, 0.0], "width": [0.3, 0.67], "amplitude": 0.1 },
    "eta": { "kind": "gaussian_bump", "base": 1.0, "center": [0.7, 0.0], "width": [0.3, 0.67], "amplitude": 0.5 }
  },
  "observation": { "kind": "all_nodes" },
  "frequencies": { "omega_d": [0.5, 0.7, 0.9, 1.1, 1.3, 1.5], "kappa": [2.0, 5.0] },
  "inversion": { "config": { "alpha0": 0.01, "theta": 0.5, "max_iter": 6 } }
}"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_canonical_json() {
        let s = default_scenario();
        let again = Scenario::from_json(&s.canonical_json()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.hash(), again.hash());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = DEFAULT_SCENARIO.replacen("\"name\"", "\"nmae\"", 1);
        assert!(matches!(Scenario::from_json(&bad), Err(Error::Config(_))));
    }
}
