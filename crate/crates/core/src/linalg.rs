//! Small dense/sparse kernels: complex tridiagonal and banded LU solves,
//! a CSR matrix, and preconditioned conjugate gradients.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

const PIVOT_EPS: f64 = 1e-300;

/// Thomas algorithm for a complex tridiagonal system.
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is unused),
/// `upper[i]` multiplies `x[i+1]` (so `upper[n-1]` is unused).
pub fn solve_tridiagonal(
    lower: &[C64],
    diag: &[C64],
    upper: &[C64],
    rhs: &[C64],
) -> std::result::Result<Vec<C64>, f64> {
    let n = diag.len();
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut piv = diag[0];
    if piv.norm() < PIVOT_EPS {
        return Err(piv.norm());
    }
    c[0] = if n > 1 { upper[0] / piv } else { C64::new(0.0, 0.0) };
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv.norm() < PIVOT_EPS {
            return Err(piv.norm());
        }
        if i + 1 < n {
            c[i] = upper[i] / piv;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

/// Compressed sparse row matrix with complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

/// Triplet accumulator; duplicates are summed in insertion order.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != C64::new(0.0, 0.0) {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_csr(mut self) -> CsrMatrix {
        // stable sort keeps summation order deterministic
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }
}

impl CsrMatrix {
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
        y
    }

    /// y = A^H x
    pub fn matvec_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[k]] += self.data[k].conj() * x[i];
            }
        }
        y
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        for k in self.indptr[i]..self.indptr[i + 1] {
            if self.indices[k] == j {
                return self.data[k];
            }
        }
        C64::new(0.0, 0.0)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                m = m.max((self.data[k] - self.get(j, i)).norm());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn to_dense_real(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::<f64>::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                d[(i, self.indices[k])] = self.data[k].re;
            }
        }
        d
    }
}

/// Banded LU with partial pivoting (column-major band storage, fill-in
/// of `kl` extra superdiagonals).
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix, context: &str) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Shape(format!(
                "band LU needs a square matrix, got {}x{}",
                a.nrows, a.ncols
            )));
        }
        let n = a.nrows;
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n];
        for i in 0..n {
            for k in a.indptr[i]..a.indptr[i + 1] {
                let j = a.indices[k];
                ab[(kv + i - j) + j * ldab] = a.data[k];
            }
        }
        let mut lu = Self {
            n,
            kl,
            kv,
            ldab,
            ab,
            ipiv: vec![0; n],
        };
        lu.factorize(context)?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        (self.kv + i - j) + j * self.ldab
    }

    fn factorize(&mut self, context: &str) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let scale = self.ab.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = -1.0f64;
            for p in 0..=km {
                let v = self.ab[self.at(j + p, j)].norm();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            self.ipiv[j] = j + jp;
            if best <= PIVOT_EPS.max(scale * 1e-14) {
                return Err(Error::Singular {
                    context: format!("{context}, column {j}"),
                    pivot: best,
                });
            }
            ju = ju.max((j + self.kv - kl + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let (a, b) = (self.at(j, c), self.at(j + jp, c));
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let piv = self.ab[self.at(j, j)];
                let inv = C64::new(1.0, 0.0) / piv;
                for p in 1..=km {
                    let idx = self.at(j + p, j);
                    self.ab[idx] *= inv;
                }
                for c in (j + 1)..=ju {
                    let ujc = self.ab[self.at(j, c)];
                    if ujc == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for p in 1..=km {
                        let l = self.ab[self.at(j + p, j)];
                        let idx = self.at(j + p, c);
                        self.ab[idx] -= l * ujc;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut b = rhs.to_vec();
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            for q in 1..=km {
                b[j + q] -= self.ab[self.at(j + q, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.at(j, j)];
            let bj = b[j];
            let lo = j.saturating_sub(self.kv);
            for i in lo..j {
                b[i] -= self.ab[self.at(i, j)] * bj;
            }
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Solve `A x = b` and return `x` with the relative residual.
pub fn direct_solve(a: &CsrMatrix, b: &[C64], context: &str) -> Result<(Vec<C64>, f64)> {
    let lu = BandLu::factor(a, context)?;
    let x = lu.solve(b);
    let r = relative_residual(a, &x, b);
    Ok((x, r))
}

pub fn relative_residual(a: &CsrMatrix, x: &[C64], b: &[C64]) -> f64 {
    let ax = a.matvec(x);
    let num: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for an SPD operator.
pub fn pcg<A, P>(apply: A, precond: P, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> CgOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let bnorm = dot(b, b).sqrt();
    let mut x = x0.to_vec();
    if bnorm == 0.0 {
        return CgOutcome {
            x: vec![0.0; b.len()],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        it += 1;
        if rel <= tol {
            break;
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        x,
        iterations: it,
        relative_residual: rel,
        converged: rel <= tol,
    }
}

/// Complex variant of [`pcg`] for a Hermitian positive definite operator.
pub fn pcg_complex<A, P>(apply: A, precond: P, b: &[C64], x0: &[C64], tol: f64, max_iter: usize) -> CgOutcomeC
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
{
    let bnorm = cnorm(b);
    let mut x = x0.to_vec();
    if bnorm == 0.0 {
        return CgOutcomeC {
            x: vec![C64::new(0.0, 0.0); b.len()],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let ax = apply(&x);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = cdot(&r, &z).re;
    let mut rel = cnorm(&r) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        let ap = apply(&p);
        let pap = cdot(&p, &ap).re;
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        rel = cnorm(&r) / bnorm;
        it += 1;
        if rel <= tol {
            break;
        }
        z = precond(&r);
        let rz_new = cdot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + p[i] * beta;
        }
    }
    CgOutcomeC {
        x,
        iterations: it,
        relative_residual: rel,
        converged: rel <= tol,
    }
}

/// Sparse `A^H diag(d) B` for matrices with the same row count.
pub fn gram_product(a: &CsrMatrix, d: &[f64], b: &CsrMatrix) -> CsrMatrix {
    assert_eq!(a.nrows, b.nrows);
    assert_eq!(d.len(), a.nrows);
    let mut t = Triplets::new(a.ncols, b.ncols);
    for r in 0..a.nrows {
        for p in a.indptr[r]..a.indptr[r + 1] {
            let ca = a.data[p].conj() * d[r];
            for q in b.indptr[r]..b.indptr[r + 1] {
                t.push(a.indices[p], b.indices[q], ca * b.data[q]);
            }
        }
    }
    t.to_csr()
}

/// `sum_k c_k M_k` for matrices of equal shape.
pub fn csr_combine(terms: &[(C64, &CsrMatrix)]) -> CsrMatrix {
    let (nr, nc) = (terms[0].1.nrows, terms[0].1.ncols);
    let mut t = Triplets::new(nr, nc);
    for (c, m) in terms {
        assert_eq!((m.nrows, m.ncols), (nr, nc));
        for i in 0..nr {
            for p in m.indptr[i]..m.indptr[i + 1] {
                t.push(i, m.indices[p], *c * m.data[p]);
            }
        }
    }
    t.to_csr()
}

/// Diagonal matrix.
pub fn csr_diag(d: &[C64]) -> CsrMatrix {
    let mut t = Triplets::new(d.len(), d.len());
    for (i, v) in d.iter().enumerate() {
        t.push(i, i, *v);
    }
    t.to_csr()
}

#[derive(Clone, Debug)]
pub struct CgOutcomeC {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}
