use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracspde::config::{parse_config, parse_tolerance, Command, ExperimentConfig, Overrides};
use fracspde::verify::Suite;
use fracspde::{execute, RunError};

/// Numerical experiments for time-fractional stochastic heat equations.
#[derive(Debug, Parser)]
#[command(name = "fracspde", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON config; command-line flags take precedence over its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Override a named tolerance; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tolerance)]
    tol: Vec<(String, f64)>,
    /// Suite for `verify`.
    #[arg(long, value_enum)]
    suite: Option<Suite>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if cli.suite.is_some() && cli.command != Command::Verify {
        return Err(RunError::Config("--suite only applies to verify".into()));
    }
    let o = Overrides {
        seed: cli.seed,
        replicas: cli.replicas,
        output_dir: cli.out.clone(),
        tolerances: cli.tol.clone(),
        suite: cli.suite,
    };
    cfg.resolve(cli.command, &o)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| execute(&cfg));
    match result {
        Ok(rep) => {
            for c in &rep.checks {
                println!(
                    "{} {}: value {:e}, expected {:e}, tolerance {:e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.check,
                    c.value,
                    c.expected,
                    c.tolerance
                );
            }
            ExitCode::from(rep.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("fracspde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
