use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vibrox::bench::{cmd_forward, cmd_invert, cmd_spectral, cmd_synth, cmd_verify, RunOptions};
use vibrox::scenario::{default_scenario, Scenario};
use vibrox::Error;

#[derive(Parser, Debug)]
#[command(name = "vibrox", version, about = "Vibro-acoustic forward simulation and frozen Newton inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON file; the bundled default when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Relative noise level(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_value = "0")]
    delta: Vec<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Treat a violated smallness condition as an error.
    #[arg(long, global = true)]
    strict_smallness: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Beams, difference-frequency wave and traces.
    Forward,
    /// Multi-frequency synthetic measurement.
    Synth,
    /// Frozen Newton reconstruction.
    Invert {
        /// measurement.json from `synth` instead of fresh synthetic data.
        #[arg(long)]
        measurement: Option<PathBuf>,
    },
    /// Named consistency checks.
    Verify,
    /// Joint eigensystem and uniqueness probes.
    Spectral,
}

fn run(cli: Cli) -> Result<(), Error> {
    let scenario = match &cli.scenario {
        Some(p) => Scenario::load(p)?,
        None => default_scenario(),
    };
    let mut opts = RunOptions::new(&cli.out);
    opts.deltas = cli.delta.clone();
    opts.seed = cli.seed;
    opts.strict_smallness = cli.strict_smallness;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Forward => {
            let s = cmd_forward(&scenario, &opts)?;
            log::info!("forward: trace norm {:e} over {} receivers", s.trace_norm, s.receivers);
        }
        Command::Synth => {
            let m = cmd_synth(&scenario, &opts)?;
            log::info!("synth: {} pairs, delta_abs {:e}", m.pairs.len(), m.delta_abs);
        }
        Command::Invert { measurement } => {
            opts.measurement = measurement;
            let s = cmd_invert(&scenario, &opts)?;
            for r in &s.runs {
                log::info!("invert: delta {} n* {} final error {:?}", r.delta_rel, r.n_star, r.final_err_rel);
            }
        }
        Command::Verify => {
            let r = cmd_verify(&scenario, &opts)?;
            log::info!("verify: {} checks passed", r.checks.len());
        }
        Command::Spectral => {
            let s = cmd_spectral(&scenario, &opts)?;
            log::info!("spectral: {} groups, collapse ratio {:e}", s.groups.len(), s.collapse_ratio);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VIBROX_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
