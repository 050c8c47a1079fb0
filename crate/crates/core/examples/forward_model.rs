//! Both beams, the difference-frequency wave and its traces for the two
//! model variants.

use vibrox::forward::{forward_s, observe, ModelConfig, ObservationSpec, Variant};
use vibrox::grid::{Grid, Mesh, RealField, SlownessField};
use vibrox::C64;

fn config(grid: Grid, variant: Variant) -> ModelConfig {
    let h: Vec<C64> = (0..grid.ny).map(|j| C64::new((-(grid.y(j) / 0.4).powi(2)).exp(), 0.0)).collect();
    ModelConfig {
        grid,
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
        helm_nx: 32,
        helm_ny: 16,
        strict_smallness: false,
    }
}

fn main() -> vibrox::Result<()> {
    let g = Grid::new(1.0, 101, -1.0, 1.0, 41)?;
    let s = RealField::from_fn(g.shape(), |i, j| {
        1.0 + 0.1 * (-((g.z(i) - 0.5) / 0.3).powi(2) - (g.y(j) / 0.67).powi(2)).exp()
    });
    let slowness = SlownessField::new(&g, s)?;
    let eta = RealField::from_fn(g.shape(), |i, j| {
        1.0 + 0.5 * (-((g.z(i) - 0.7) / 0.3).powi(2) - (g.y(j) / 0.67).powi(2)).exp()
    });
    for variant in [Variant::Paraxial, Variant::Helmholtz] {
        let cfg = config(g, variant);
        let st = forward_s(&slowness, &eta, &cfg)?;
        let mesh = match variant {
            Variant::Paraxial => Mesh::from_grid(&g),
            Variant::Helmholtz => cfg.transform()?.mesh,
        };
        let obs = ObservationSpec::far_end(mesh, cfg.omega_d());
        let tr = observe(&st.psi, &obs)?;
        let peak = tr.iter().map(|v| v.norm()).fold(0.0, f64::max);
        println!(
            "{variant:?}: max |phi1| {:.3}, max |psi| {:.3e}, {} receivers, peak trace {:.3e}",
            st.phi1.u.max_abs(),
            st.psi.max_abs(),
            tr.len(),
            peak
        );
    }
    Ok(())
}
