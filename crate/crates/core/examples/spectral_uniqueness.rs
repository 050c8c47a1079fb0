//! Joint eigensystem of the damped operators and the uniqueness checks
//! built on it, including the two counterexamples.

use vibrox::bench::spectral_summary;
use vibrox::scenario::default_scenario;

fn main() -> vibrox::Result<()> {
    let s = spectral_summary(&default_scenario())?;
    println!("{}x{} mesh, residual {:.1e}", s.nx, s.ny, s.max_residual);
    for (k, g) in s.groups.iter().enumerate().take(8) {
        println!("group {k}: lambda {:>9.4} rho {:>8.4} mu {:.4} multiplicity {}", g.lambda, g.rho, g.mu, g.multiplicity);
    }
    println!("distinct groups: {}", s.distinctness.pass);
    println!("boundary traces independent: {} (margin {:.3})", s.trace_boundary.pass, s.trace_boundary.min_margin);
    println!("single centre receiver independent: {}", s.trace_nodal_point.pass);
    println!("probe singular values {:.3e} .. {:.3e}", s.probe.smallest, s.probe.largest);
    println!("equal-kappa collapse ratio {:.1e}", s.collapse_ratio);
    Ok(())
}
