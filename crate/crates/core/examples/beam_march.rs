//! Marches a Gaussian beam through a slowness bump and prints the energy
//! identity residuals and the Gronwall bound.

use vibrox::beam::{beam_energy_residuals, gronwall_bound_check, march_beam, BeamProblem};
use vibrox::grid::{Grid, RealField, SlownessField};
use vibrox::C64;

fn main() -> vibrox::Result<()> {
    let g = Grid::new(1.0, 201, -1.0, 1.0, 101)?;
    let s = RealField::from_fn(g.shape(), |i, j| {
        1.0 + 0.1 * (-((g.z(i) - 0.5) / 0.3).powi(2) - (g.y(j) / 0.67).powi(2)).exp()
    });
    let slowness = SlownessField::new(&g, s)?;
    let h: Vec<C64> = (0..g.ny).map(|j| C64::new((-(g.y(j) / 0.4).powi(2)).exp(), 0.0)).collect();
    let p = BeamProblem::homogeneous(g, slowness, 20.0, h, 1.0)?;
    let b = march_beam(&p)?;

    let r = beam_energy_residuals(&b, &p);
    println!("energy identity residual {:.3e}", r.exact_max_rel());
    let gr = gronwall_bound_check(&b, &p)?;
    println!("Gronwall bound holds: {}", gr.holds);
    for n in (0..g.nz).step_by(50) {
        println!("z = {:.2}  |phi|^2 = {:.6}", g.z(n), b.energy[n]);
    }
    Ok(())
}
