use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ri_thermalizer::experiments::{
    emit_csv, parse_config, run_sweep_with_threads, run_validation, Engine, ExperimentError,
};
use ri_thermalizer::spectral::{lambda_closed, lambda_numeric, xi_closed, xi_numeric};

const THREADS_ENV: &str = "RI_THERMALIZER_THREADS";

#[derive(Parser)]
#[command(
    name = "ri-thermalizer",
    version,
    about = "Collision-model thermalization sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep described by a config file and emit CSV.
    Sweep {
        config: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's engine (brute_force, recursion, ode_sl).
        #[arg(long)]
        engine: Option<Engine>,
        /// Worker threads; the environment variable RI_THERMALIZER_THREADS wins.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Run the oracle cross-checks.
    Validate,
    /// Print closed-form and numerical eigenvalues of the population maps.
    Spectra {
        d: usize,
        p_a: f64,
        /// `J tau` for the discrete map, also used as `Gamma` for the generator.
        x: f64,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, ExperimentError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            ExperimentError::config(0, THREADS_ENV, format!("`{v}` is not a thread count"))
        }),
        Err(_) => Ok(flag),
    }
}

fn sweep(
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    engine: Option<Engine>,
    parallel: Option<usize>,
) -> Result<(), ExperimentError> {
    let text = std::fs::read_to_string(&config)?;
    let mut spec = parse_config(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(e) = engine {
        spec.engine = e;
        // re-run the engine compatibility checks on the overridden spec
        let mut patched = text
            .lines()
            .filter(|l| {
                !l.split('#')
                    .next()
                    .unwrap_or("")
                    .trim_start()
                    .starts_with("engine")
            })
            .collect::<Vec<_>>()
            .join("\n");
        patched.push_str(&format!("\nengine = {}\n", engine_name(e)));
        let mut checked = parse_config(&patched)?;
        checked.seed = spec.seed;
        spec = checked;
    }
    let records = run_sweep_with_threads(&spec, threads(parallel)?)?;
    match out {
        Some(path) => emit_csv(&records, BufWriter::new(File::create(path)?)),
        None => emit_csv(&records, io::stdout().lock()),
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::BruteForce => "brute_force",
        Engine::Recursion => "recursion",
        Engine::OdeSL => "ode_sl",
    }
}

fn spectra(d: usize, p_a: f64, x: f64) -> Result<(), String> {
    if d < 2 || !(0.0..=1.0).contains(&p_a) {
        return Err("need d >= 2 and 0 <= pA <= 1".into());
    }
    let mut out = io::stdout().lock();
    let mut table = |name: &str, mut closed: Vec<f64>, numeric: Vec<f64>| {
        closed.sort_by(|a, b| b.total_cmp(a));
        let _ = writeln!(out, "{name}: k, closed, numeric, |diff|");
        for (k, (c, n)) in closed.iter().zip(&numeric).enumerate() {
            let _ = writeln!(out, "  {k}, {c:.15e}, {n:.15e}, {:.3e}", (c - n).abs());
        }
    };
    let xn = xi_numeric(d, p_a, x).map_err(|e| e.to_string())?;
    table("xi (stochastic map, J tau)", xi_closed(d, p_a, x), xn);
    let ln = lambda_numeric(d, p_a, x).map_err(|e| e.to_string())?;
    table("lambda (generator, Gamma)", lambda_closed(d, p_a, x), ln);
    Ok(())
}

fn exit_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::ConfigInvalid { .. } => 2,
        ExperimentError::Io(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep {
            config,
            out,
            seed,
            engine,
            parallel,
        } => match sweep(config, out, seed, engine, parallel) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
        Command::Validate => {
            let checks = run_validation();
            for c in &checks {
                println!(
                    "{} {}: worst {:.3e} (tolerance {:.0e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance
                );
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Spectra { d, p_a, x } => match spectra(d, p_a, x) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
