//! Multi-frequency all-at-once model: range invariance residual, Taylor
//! remainder and closeness of the remainder map to the identity.

use vibrox::aao::{FrequencySet, FLOOR_REL};
use vibrox::bench::{range_invariance_residual, taylor_bilinear_mismatch};
use vibrox::scenario::default_scenario;
use vibrox::C64;

fn main() -> vibrox::Result<()> {
    let sc = default_scenario();
    let cfg = sc.model_config()?;
    let t = cfg.transform()?;
    let fs = FrequencySet::uniform(vec![0.5, 0.9, 1.3], vec![2.0, 5.0])?;
    let obs = vibrox::forward::ObservationSpec::boundary(t.mesh, 1.0);
    let aao = vibrox::newton::helmholtz_inverse_model(&cfg, fs, &obs, None)?;
    let truth = sc.helmholtz_truth(&aao)?;
    let (q0, dist) = sc.helmholtz_initial(&aao, &truth)?;
    println!("{} unknowns, base state at relative distance {dist:.3}", (2 * aao.n_pairs() + 1) * aao.n());
    println!("range invariance residual {:.2e}", range_invariance_residual(&aao, &truth, &q0)?);
    println!("Taylor bilinear mismatch  {:.2e}", taylor_bilinear_mismatch(&aao, &q0, &truth.sub(&q0))?);
    let d = truth.sub(&q0);
    for t in [1.0, 0.1, 0.01] {
        let q = q0.axpy(C64::new(t, 0.0), &d);
        let (close, _) = aao.remainder_closeness(&q, &q0, FLOOR_REL)?;
        println!("t = {t:<5} |r(q) - (q - q0)|_X = {close:.3e}");
    }
    Ok(())
}
