//! Loads a scenario file (the bundled default when no path is given) and
//! runs forward, synth and verify into a temporary directory.

use vibrox::bench::{cmd_forward, cmd_synth, cmd_verify, RunOptions};
use vibrox::scenario::{default_scenario, Scenario};

fn main() -> vibrox::Result<()> {
    let sc = match std::env::args().nth(1) {
        Some(p) => Scenario::load(p.as_ref())?,
        None => default_scenario(),
    };
    let out = std::env::temp_dir().join(format!("vibrox-{}", &sc.hash()[..12]));
    let mut opts = RunOptions::new(&out);
    opts.deltas = vec![0.01];
    opts.seed = 7;

    let f = cmd_forward(&sc, &opts)?;
    println!("forward: trace norm {:.3e} over {} receivers", f.trace_norm, f.receivers);
    if sc.model.variant == vibrox::forward::Variant::Helmholtz {
        let m = cmd_synth(&sc, &opts)?;
        println!("synth: {} frequency pairs, delta_abs {:.3e}", m.pairs.len(), m.delta_abs);
    }
    match cmd_verify(&sc, &opts) {
        Ok(r) => println!("verify: {} checks pass", r.checks.len()),
        Err(e) => println!("verify: {e}"),
    }
    println!("outputs in {}", out.display());
    Ok(())
}
