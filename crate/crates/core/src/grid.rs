//! Tensor grids, nodal fields, trapezoid quadrature and the discrete inner
//! products used by the solvers and the inversion.

use crate::error::{Error, Result};
use crate::linalg::{BandLu, Triplets};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Uniform tensor grid on (0, Lz) x (yLo, yHi). Node (i, j) sits at
/// `(i*dz, yLo + j*dy)` and is stored at flat index `i*Ny + j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lz: f64,
    pub nz: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
    pub dz: f64,
    pub dy: f64,
}

pub fn build_grid(lz: f64, nz: usize, y_lo: f64, y_hi: f64, ny: usize) -> Result<Grid> {
    Grid::new(lz, nz, y_lo, y_hi, ny)
}

impl Grid {
    pub fn new(lz: f64, nz: usize, y_lo: f64, y_hi: f64, ny: usize) -> Result<Self> {
        if !(lz > 0.0) || !lz.is_finite() {
            return Err(Error::Config(format!("Lz must be positive, got {lz}")));
        }
        if !(y_hi > y_lo) || !y_lo.is_finite() || !y_hi.is_finite() {
            return Err(Error::Config(format!(
                "need yHi > yLo, got [{y_lo}, {y_hi}]"
            )));
        }
        if nz < 2 || ny < 2 {
            return Err(Error::Config(format!(
                "need at least two nodes per axis, got Nz={nz}, Ny={ny}"
            )));
        }
        Ok(Self {
            lz,
            nz,
            y_lo,
            y_hi,
            ny,
            dz: lz / (nz - 1) as f64,
            dy: (y_hi - y_lo) / (ny - 1) as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nz * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn z(&self, i: usize) -> f64 {
        i as f64 * self.dz
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_lo + j as f64 * self.dy
    }

    pub fn wz(&self, i: usize) -> f64 {
        trapezoid_weight(i, self.nz, self.dz)
    }

    pub fn wy(&self, j: usize) -> f64 {
        trapezoid_weight(j, self.ny, self.dy)
    }

    pub fn shape(&self) -> Shape {
        Shape(self.nz, self.ny)
    }

    /// Same geometry with `2N-1` nodes per axis.
    pub fn refined(&self) -> Self {
        Self::new(self.lz, 2 * self.nz - 1, self.y_lo, self.y_hi, 2 * self.ny - 1).unwrap()
    }

    pub fn area(&self) -> f64 {
        self.lz * (self.y_hi - self.y_lo)
    }
}

#[inline]
pub fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i + 1 == n {
        0.5 * h
    } else {
        h
    }
}

/// 1-D P1 stiffness on a uniform axis as (lower, diag, upper).
pub fn stiffness_1d(n: usize, h: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for e in 0..n - 1 {
        di[e] += 1.0 / h;
        di[e + 1] += 1.0 / h;
        up[e] -= 1.0 / h;
        lo[e + 1] -= 1.0 / h;
    }
    (lo, di, up)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape(pub usize, pub usize);

impl Shape {
    pub fn len(&self) -> usize {
        self.0 * self.1
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nodal grid function stored row-major (first index slowest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    pub shape: Shape,
    pub values: Vec<T>,
}

pub type ComplexField = Field<C64>;
pub type RealField = Field<f64>;

impl<T: Copy + Default> Field<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            values: vec![T::default(); shape.len()],
        }
    }

    pub fn constant(shape: Shape, v: T) -> Self {
        Self {
            shape,
            values: vec![v; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for shape {}x{}",
                values.len(),
                shape.0,
                shape.1
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                values.push(f(i, j));
            }
        }
        Self { shape, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.shape.1 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let n1 = self.shape.1;
        self.values[i * n1 + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n1 = self.shape.1;
        &self.values[i * n1..(i + 1) * n1]
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn check_shape(&self, shape: Shape, what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!(
                "{what}: field {}x{} on grid {}x{}",
                self.shape.0, self.shape.1, shape.0, shape.1
            )));
        }
        Ok(())
    }
}

impl ComplexField {
    pub fn from_real(r: &RealField) -> Self {
        r.map(|v| C64::new(v, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map(|v| v * a)
    }

    pub fn axpy(&self, a: C64, other: &Self) -> Self {
        Field {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(v.norm()))
    }

    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

impl RealField {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}

/// Slowness s = 1/c with its z-derivative and the zeroth-order coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlownessField {
    pub s: RealField,
    pub dz_s: RealField,
    pub ctilde: RealField,
}

impl SlownessField {
    /// Builds `dz_s` by finite differences and binds `ctilde = dz_s`.
    pub fn new(grid: &Grid, s: RealField) -> Result<Self> {
        s.check_shape(grid.shape(), "slowness")?;
        if let Some(v) = s.values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("slowness must be positive and finite, found {v}")));
        }
        let dz_s = discrete_gradient_z_real(grid, &s);
        Ok(Self {
            ctilde: dz_s.clone(),
            s,
            dz_s,
        })
    }

    pub fn constant(grid: &Grid, v: f64) -> Result<Self> {
        Self::new(grid, RealField::constant(grid.shape(), v))
    }

    pub fn with_ctilde(mut self, ctilde: RealField) -> Result<Self> {
        ctilde.check_shape(self.s.shape, "ctilde override")?;
        self.ctilde = ctilde;
        Ok(self)
    }

    pub fn is_paraxial_bound(&self) -> bool {
        self.ctilde == self.dz_s
    }

    pub fn max_inv(&self) -> f64 {
        1.0 / self.s.min()
    }
}

/// Nonlinearity coefficient eta and, when populated, its transform on the
/// Helmholtz domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityField {
    pub eta: RealField,
    pub eta_check: Option<ComplexField>,
}

impl NonlinearityField {
    pub fn new(eta: RealField) -> Result<Self> {
        if !eta.is_finite() {
            return Err(Error::Config("nonlinearity field has non-finite entries".into()));
        }
        Ok(Self {
            eta,
            eta_check: None,
        })
    }
}

/// Second-order z-derivative: central in the interior, one-sided
/// three-point stencils at the ends (two-point when Nz = 2).
pub fn discrete_gradient_z(grid: &Grid, a: &ComplexField) -> Result<ComplexField> {
    a.check_shape(grid.shape(), "gradient_z")?;
    Ok(gradient_z_generic(grid, a))
}

pub fn discrete_gradient_z_real(grid: &Grid, a: &RealField) -> RealField {
    gradient_z_generic(grid, a)
}

fn gradient_z_generic<T>(grid: &Grid, a: &Field<T>) -> Field<T>
where
    T: Copy + Default + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (nz, h) = (grid.nz, grid.dz);
    Field::from_fn(grid.shape(), |i, j| {
        if nz == 2 {
            (a.at(1, j) - a.at(0, j)) * (1.0 / h)
        } else if i == 0 {
            (a.at(1, j) * 4.0 - a.at(0, j) * 3.0 - a.at(2, j)) * (0.5 / h)
        } else if i == nz - 1 {
            (a.at(nz - 1, j) * 3.0 - a.at(nz - 2, j) * 4.0 + a.at(nz - 3, j)) * (0.5 / h)
        } else {
            (a.at(i + 1, j) - a.at(i - 1, j)) * (0.5 / h)
        }
    })
}

/// Transverse Laplacian in weak form: `-W^{-1} (K + i omega B) a` per z-row,
/// with lumped weights W and the Robin term B on the two transverse ends.
/// In the interior this is the central second difference.
pub fn discrete_laplacian_y(
    grid: &Grid,
    a: &ComplexField,
    sigma: (f64, f64),
    omega: f64,
) -> Result<ComplexField> {
    a.check_shape(grid.shape(), "laplacian_y")?;
    if grid.ny < 3 {
        return Err(Error::Shape("transverse Laplacian needs Ny >= 3".into()));
    }
    let mut out = ComplexField::zeros(grid.shape());
    for i in 0..grid.nz {
        let row = laplacian_row(grid, a.row(i), sigma, omega);
        out.values[i * grid.ny..(i + 1) * grid.ny].copy_from_slice(&row);
    }
    Ok(out)
}

pub(crate) fn laplacian_row(grid: &Grid, u: &[C64], sigma: (f64, f64), omega: f64) -> Vec<C64> {
    let ny = grid.ny;
    let ku = apply_stiffness_y(grid, u);
    let mut out = vec![C64::new(0.0, 0.0); ny];
    for j in 0..ny {
        let mut v = ku[j];
        if j == 0 {
            v += C64::new(0.0, omega * sigma.0) * u[0];
        }
        if j == ny - 1 {
            v += C64::new(0.0, omega * sigma.1) * u[ny - 1];
        }
        out[j] = -v / grid.wy(j);
    }
    out
}

pub(crate) fn apply_stiffness_y(grid: &Grid, u: &[C64]) -> Vec<C64> {
    let ny = grid.ny;
    let inv = 1.0 / grid.dy;
    let mut out = vec![C64::new(0.0, 0.0); ny];
    for e in 0..ny - 1 {
        let d = (u[e + 1] - u[e]) * inv;
        out[e] -= d;
        out[e + 1] += d;
    }
    out
}

/// Transverse stiffness energy `u^H K u` of one row.
pub(crate) fn grad_energy_y(grid: &Grid, u: &[C64]) -> f64 {
    let inv = 1.0 / grid.dy;
    (0..grid.ny - 1)
        .map(|e| (u[e + 1] - u[e]).norm_sqr() * inv)
        .sum()
}

/// Cumulative trapezoid along z for each transverse node.
pub fn cumulative_trapezoid_z(grid: &Grid, a: &ComplexField) -> ComplexField {
    let mut out = ComplexField::zeros(grid.shape());
    for j in 0..grid.ny {
        let mut acc = C64::new(0.0, 0.0);
        for i in 1..grid.nz {
            acc += (a.at(i - 1, j) + a.at(i, j)) * (0.5 * grid.dz);
            out.set(i, j, acc);
        }
    }
    out
}

/// Descriptor of a discrete inner product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    /// Trapezoid L2 over the grid.
    L2,
    /// Trapezoid L2 with a positive nodal weight.
    WeightedL2 { weight: Vec<f64> },
    /// Norm of the Riesz representer in (H1)*: `(W a)^H (K + W)^{-1} (W b)`.
    H1Dual,
    /// Trapezoid L2 plus the discrete z-derivative energy.
    H1z,
    /// Trapezoid L2 along `z = Lz`.
    BoundaryL2,
}

/// Inner products on a fixed grid. The Riesz map for the dual norm is
/// factored once at construction.
#[derive(Clone, Debug)]
pub struct SpaceWeights {
    pub grid: Grid,
    pub x_spec: Vec<Space>,
    pub y_spec: Vec<Space>,
    pub z_spec: Vec<Space>,
    riesz: BandLu,
}

impl SpaceWeights {
    pub fn new(grid: Grid, x_spec: Vec<Space>, y_spec: Vec<Space>, z_spec: Vec<Space>) -> Result<Self> {
        for s in x_spec.iter().chain(&y_spec).chain(&z_spec) {
            if let Space::WeightedL2 { weight } = s {
                if weight.len() != grid.len() || weight.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::Config("weighted L2 needs one positive weight per node".into()));
                }
            }
        }
        let riesz = BandLu::factor(&riesz_matrix(&grid), "Riesz map")?;
        Ok(Self {
            grid,
            x_spec,
            y_spec,
            z_spec,
            riesz,
        })
    }

    /// Plain L2 everywhere.
    pub fn l2(grid: Grid) -> Result<Self> {
        Self::new(grid, vec![Space::L2], vec![Space::L2], vec![Space::L2])
    }

    pub fn inner(&self, a: &ComplexField, b: &ComplexField, spec: &Space) -> Result<C64> {
        inner_product_with(&self.grid, a, b, spec, Some(&self.riesz))
    }

    pub fn norm(&self, a: &ComplexField, spec: &Space) -> Result<f64> {
        Ok(self.inner(a, a, spec)?.re.max(0.0).sqrt())
    }
}

/// `K + W` for the (H1)* Riesz map with natural boundary terms.
fn riesz_matrix(grid: &Grid) -> crate::linalg::CsrMatrix {
    let n = grid.len();
    let mut t = Triplets::new(n, n);
    for i in 0..grid.nz {
        for j in 0..grid.ny {
            let k = grid.idx(i, j);
            let w = grid.wz(i) * grid.wy(j);
            t.push(k, k, C64::new(w, 0.0));
            if j + 1 < grid.ny {
                let c = grid.wz(i) / grid.dy;
                let k2 = grid.idx(i, j + 1);
                t.push(k, k, C64::new(c, 0.0));
                t.push(k2, k2, C64::new(c, 0.0));
                t.push(k, k2, C64::new(-c, 0.0));
                t.push(k2, k, C64::new(-c, 0.0));
            }
            if i + 1 < grid.nz {
                let c = grid.wy(j) / grid.dz;
                let k2 = grid.idx(i + 1, j);
                t.push(k, k, C64::new(c, 0.0));
                t.push(k2, k2, C64::new(c, 0.0));
                t.push(k, k2, C64::new(-c, 0.0));
                t.push(k2, k, C64::new(-c, 0.0));
            }
        }
    }
    t.to_csr()
}

/// Conjugate-linear in `a`, linear in `b`.
pub fn inner_product(grid: &Grid, a: &ComplexField, b: &ComplexField, spec: &Space) -> Result<C64> {
    inner_product_with(grid, a, b, spec, None)
}

fn inner_product_with(
    grid: &Grid,
    a: &ComplexField,
    b: &ComplexField,
    spec: &Space,
    riesz: Option<&BandLu>,
) -> Result<C64> {
    a.check_shape(grid.shape(), "inner product (left)")?;
    b.check_shape(grid.shape(), "inner product (right)")?;
    let l2 = |w: &dyn Fn(usize, usize) -> f64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..grid.nz {
            for j in 0..grid.ny {
                acc += a.at(i, j).conj() * b.at(i, j) * w(i, j);
            }
        }
        acc
    };
    match spec {
        Space::L2 => Ok(l2(&|i, j| grid.wz(i) * grid.wy(j))),
        Space::WeightedL2 { weight } => {
            if weight.len() != grid.len() {
                return Err(Error::Config("weight length does not match grid".into()));
            }
            Ok(l2(&|i, j| grid.wz(i) * grid.wy(j) * weight[grid.idx(i, j)]))
        }
        Space::H1z => {
            let mut acc = l2(&|i, j| grid.wz(i) * grid.wy(j));
            for j in 0..grid.ny {
                for i in 0..grid.nz - 1 {
                    let da = a.at(i + 1, j) - a.at(i, j);
                    let db = b.at(i + 1, j) - b.at(i, j);
                    acc += da.conj() * db * (grid.wy(j) / grid.dz);
                }
            }
            Ok(acc)
        }
        Space::BoundaryL2 => {
            let i = grid.nz - 1;
            Ok((0..grid.ny)
                .map(|j| a.at(i, j).conj() * b.at(i, j) * grid.wy(j))
                .sum())
        }
        Space::H1Dual => {
            let owned;
            let lu = match riesz {
                Some(lu) => lu,
                None => {
                    owned = BandLu::factor(&riesz_matrix(grid), "Riesz map")?;
                    &owned
                }
            };
            let wb: Vec<C64> = (0..grid.len())
                .map(|k| b.values[k] * grid.wz(k / grid.ny) * grid.wy(k % grid.ny))
                .collect();
            let rb = lu.solve(&wb);
            Ok((0..grid.len())
                .map(|k| (a.values[k] * grid.wz(k / grid.ny) * grid.wy(k % grid.ny)).conj() * rb[k])
                .sum())
        }
    }
}

/// `printf("%.17g")` formatting, so values round-trip bit-exactly.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        strip_zeros(&s)
    } else {
        let m = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        t.trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct GridSidecar<'a> {
    #[serde(rename = "Lz")]
    lz: f64,
    #[serde(rename = "Nz")]
    nz: usize,
    #[serde(rename = "yLo")]
    y_lo: f64,
    #[serde(rename = "yHi")]
    y_hi: f64,
    #[serde(rename = "Ny")]
    ny: usize,
    dz: f64,
    dy: f64,
    name: &'a str,
    config_hash: &'a str,
}

/// Writes `z,y,re,im` rows in node order.
pub fn write_field_csv<W: Write>(mut w: W, grid: &Grid, field: &ComplexField) -> Result<()> {
    field.check_shape(grid.shape(), "csv export")?;
    writeln!(w, "z,y,re,im")?;
    for i in 0..grid.nz {
        for j in 0..grid.ny {
            let v = field.at(i, j);
            writeln!(
                w,
                "{},{},{},{}",
                fmt_g17(grid.z(i)),
                fmt_g17(grid.y(j)),
                fmt_g17(v.re),
                fmt_g17(v.im)
            )?;
        }
    }
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save_field(
    dir: &std::path::Path,
    stem: &str,
    grid: &Grid,
    field: &ComplexField,
    config_hash: &str,
) -> Result<()> {
    let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    let mut bw = std::io::BufWriter::new(f);
    write_field_csv(&mut bw, grid, field)?;
    bw.flush()?;
    let side = GridSidecar {
        lz: grid.lz,
        nz: grid.nz,
        y_lo: grid.y_lo,
        y_hi: grid.y_hi,
        ny: grid.ny,
        dz: grid.dz,
        dy: grid.dy,
        name: stem,
        config_hash,
    };
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`].
pub fn read_field_csv(text: &str, grid: &Grid) -> Result<ComplexField> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("z,y,re,im") {
        return Err(Error::Config("field csv must start with header z,y,re,im".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Config(format!("field csv line {} has {} columns", n + 2, cols.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("field csv line {}: {e}", n + 2)))
        };
        values.push(C64::new(parse(cols[2])?, parse(cols[3])?));
    }
    ComplexField::from_vec(grid.shape(), values)
}

/// Tensor-product mesh for the Helmholtz domain. `dim == 1` is an interval
/// (one node per column, `ny == 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub dim: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Mesh {
    pub fn line(x_lo: f64, x_hi: f64, nx: usize) -> Result<Self> {
        if !(x_hi > x_lo) || nx < 2 {
            return Err(Error::Config(format!("bad interval [{x_lo}, {x_hi}] with {nx} nodes")));
        }
        Ok(Self {
            dim: 1,
            x_lo,
            x_hi,
            nx,
            y_lo: 0.0,
            y_hi: 0.0,
            ny: 1,
            dx: (x_hi - x_lo) / (nx - 1) as f64,
            dy: 0.0,
        })
    }

    pub fn rect(x_lo: f64, x_hi: f64, nx: usize, y_lo: f64, y_hi: f64, ny: usize) -> Result<Self> {
        if !(x_hi > x_lo) || !(y_hi > y_lo) || nx < 2 || ny < 2 {
            return Err(Error::Config(format!(
                "bad rectangle [{x_lo},{x_hi}]x[{y_lo},{y_hi}] with {nx}x{ny} nodes"
            )));
        }
        Ok(Self {
            dim: 2,
            x_lo,
            x_hi,
            nx,
            y_lo,
            y_hi,
            ny,
            dx: (x_hi - x_lo) / (nx - 1) as f64,
            dy: (y_hi - y_lo) / (ny - 1) as f64,
        })
    }

    pub fn from_grid(g: &Grid) -> Self {
        Self::rect(0.0, g.lz, g.nz, g.y_lo, g.y_hi, g.ny).unwrap()
    }

    /// The same rectangle viewed as a [`Grid`] (x1 takes the role of z).
    pub fn as_grid(&self) -> Option<Grid> {
        if self.dim == 2 && self.x_lo == 0.0 {
            Grid::new(self.x_hi, self.nx, self.y_lo, self.y_hi, self.ny).ok()
        } else {
            None
        }
    }

    pub fn refined(&self) -> Self {
        if self.dim == 1 {
            Self::line(self.x_lo, self.x_hi, 2 * self.nx - 1).unwrap()
        } else {
            Self::rect(self.x_lo, self.x_hi, 2 * self.nx - 1, self.y_lo, self.y_hi, 2 * self.ny - 1).unwrap()
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Shape {
        Shape(self.nx, self.ny)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            self.y_lo + j as f64 * self.dy
        }
    }

    pub fn wx(&self, i: usize) -> f64 {
        trapezoid_weight(i, self.nx, self.dx)
    }

    pub fn wy(&self, j: usize) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            trapezoid_weight(j, self.ny, self.dy)
        }
    }

    /// Lumped volume weight of node k.
    pub fn weight(&self, k: usize) -> f64 {
        self.wx(k / self.ny) * self.wy(k % self.ny)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    /// Trapezoid boundary measure of node k (zero for interior nodes).
    pub fn boundary_weight(&self, k: usize) -> f64 {
        let (i, j) = (k / self.ny, k % self.ny);
        if self.dim == 1 {
            return if i == 0 || i + 1 == self.nx { 1.0 } else { 0.0 };
        }
        let mut w = 0.0;
        if j == 0 || j + 1 == self.ny {
            w += self.wx(i);
        }
        if i == 0 || i + 1 == self.nx {
            w += self.wy(j);
        }
        w
    }

    pub fn boundary_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.boundary_weight(k)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.boundary_weight(k) > 0.0).collect()
    }

    /// Nodes of the edge `x = x_hi`.
    pub fn right_edge(&self) -> Vec<usize> {
        (0..self.ny).map(|j| self.idx(self.nx - 1, j)).collect()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_lo + self.x_hi),
            if self.dim == 1 { 0.0 } else { 0.5 * (self.y_lo + self.y_hi) },
        )
    }
}
