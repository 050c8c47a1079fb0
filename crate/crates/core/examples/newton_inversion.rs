//! Frozen Newton reconstruction from exact and noisy synthetic data on the
//! bundled default scenario.

use vibrox::newton::run_inversion;
use vibrox::scenario::default_scenario;

fn main() -> vibrox::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VIBROX_LOG", "info")).init();
    let sc = default_scenario();
    let clean = sc.helmholtz_aao(None)?;
    let truth = sc.helmholtz_truth(&clean)?;
    let (q0, dist) = sc.helmholtz_initial(&clean, &truth)?;
    let cfg = vibrox::newton::NewtonConfig {
        c_estimate: 0.0,
        theta_discrepancy: 0.25,
        ..sc.inversion.config.clone()
    };
    println!("initial relative distance {:.1}%", 100.0 * dist);

    for delta in [0.0, 0.01] {
        let noisy = vibrox::newton::add_noise(&clean.traces(&truth), |b| clean.trace_norm(b), delta, 1);
        let aao = sc.helmholtz_aao(Some(noisy.blocks))?;
        let res = run_inversion(&aao, &q0, Some(&truth), &cfg, delta)?;
        println!("delta = {delta}: n* = {}", res.n_star);
        for r in &res.history {
            println!(
                "  n {:>2}  alpha {:.2e}  rel error {:.3}%  data residual {:.3e}",
                r.n,
                r.alpha,
                100.0 * r.err_rel.unwrap_or(f64::NAN),
                r.data_residual
            );
        }
    }
    Ok(())
}
