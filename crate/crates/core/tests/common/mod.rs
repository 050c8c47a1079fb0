#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vibrox::forward::{ModelConfig, Variant};
use vibrox::grid::{ComplexField, Grid, Shape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_field(rng: &mut ChaCha8Rng, shape: Shape) -> ComplexField {
    ComplexField::from_vec(shape, random_vec(rng, shape.len())).unwrap()
}

pub fn field(g: &Grid, f: impl Fn(f64, f64) -> C64) -> ComplexField {
    ComplexField::from_fn(g.shape(), |i, j| f(g.z(i), g.y(j)))
}

pub fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Least-squares slope of `log e` against `log h`.
pub fn loglog_slope(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Smallest pairwise slope of consecutive points.
pub fn min_pair_slope(h: &[f64], e: &[f64]) -> f64 {
    (1..h.len())
        .map(|k| (e[k] / e[k - 1]).ln() / (h[k] / h[k - 1]).ln())
        .fold(f64::INFINITY, f64::min)
}

pub fn gaussian_profile(g: &Grid, width: f64) -> Vec<C64> {
    (0..g.ny)
        .map(|j| C64::new((-(g.y(j) / width).powi(2)).exp(), 0.0))
        .collect()
}

/// Nondimensional two-beam configuration on `g`.
pub fn model(g: Grid, variant: Variant) -> ModelConfig {
    let h = gaussian_profile(&g, 0.4);
    ModelConfig {
        grid: g,
        omega1: 20.0,
        omega2: 19.0,
        eps_tilde: 0.2,
        variant,
        h1: h.clone(),
        h2: h,
        sigma1: 1.0,
        sigma2: 1.0,
        sigma: 1.0,
        sigma0: 1.0,
        sigma_l: 1.0,
        beta: 0.0,
        b_damp: 0.1,
        c_background: 1.0,
        helm_nx: 24,
        helm_ny: 12,
        strict_smallness: false,
    }
}
