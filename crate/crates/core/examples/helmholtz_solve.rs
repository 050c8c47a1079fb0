//! Impedance Helmholtz problem on a rectangle: solve, check the weak-form
//! identities, then sweep the frequency.

use vibrox::grid::{ComplexField, Mesh, RealField};
use vibrox::wave::{frequency_sweep_bound, helmholtz_energy_residuals, solve_helmholtz, HelmholtzProblem};
use vibrox::C64;

fn main() -> vibrox::Result<()> {
    let m = Mesh::rect(0.0, 2.0, 121, -0.5, 0.5, 61)?;
    let s2 = RealField::from_fn(m.shape(), |i, j| 1.0 + 0.2 * (m.x(i) * m.y(j)).sin());
    let f = ComplexField::from_fn(m.shape(), |i, j| {
        C64::new((-((m.x(i) - 1.0).powi(2) + m.y(j).powi(2)) / 0.05).exp(), 0.0)
    });
    let mut p = HelmholtzProblem::impedance(m, s2, 6.0, f, 1.0);
    p.b_damp = 0.1;

    let sol = solve_helmholtz(&p)?;
    let r = helmholtz_energy_residuals(&sol.u, &p)?;
    println!("{} nodes, solve residual {:.2e}", m.len(), sol.residual);
    println!("real line {:.2e}, imaginary line {:.2e}", r.re_rel, r.im_rel);

    let sweep = frequency_sweep_bound(&p, &[4.0, 8.0, 16.0])?;
    for row in &sweep.rows {
        println!("{row:?}");
    }
    println!("fitted constant {:.3e}, bound holds: {}", sweep.c_fit, sweep.holds);
    Ok(())
}
