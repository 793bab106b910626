use std::path::{Path, PathBuf};
use std::process::ExitCode as ProcessExit;

use clap::{Parser, Subcommand};

use coldjc::config::{Method, RunConfig};
use coldjc::runner::{self, ExitCode};

/// Quantized-motion Jaynes-Cummings simulator.
///
/// Log level is taken from `COLDJC_LOG` (e.g. `info`, `debug`).
#[derive(Parser)]
#[command(name = "coldjc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a configured scenario and write time series.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's method.
        #[arg(long)]
        method: Option<Method>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite; nonzero exit on any failure.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for `verify.json`; defaults to the config's output directory if set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a scenario on doubled truncations up to the caps; exit 2 if not converged.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "max-cm")]
        max_cm: usize,
        #[arg(long = "max-field")]
        max_field: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::from_path(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::Validation
    })
}

fn fail(e: coldjc::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::for_error(&e)
}

fn execute(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            method,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(m) = method {
                cfg.method = m;
            }
            cfg.validate().map_err(fail)?;
            let out = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(cfg.name()));
            let summary = runner::run(&cfg, &out).map_err(fail)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for case in &summary.cases {
                for d in &case.deviations {
                    println!(
                        "{}: {} vs {} max|d sigma_z| = {:.3e}, min fidelity = {:.12}",
                        case.label, d.a, d.b, d.max_sigma_z_deviation, d.min_fidelity
                    );
                }
            }
            for f in &summary.failures {
                eprintln!("FAIL {f}");
            }
            println!("wrote {}", out.display());
            Ok(summary.exit_code())
        }
        Command::Verify { config, out } => {
            let cfg = match &config {
                Some(p) => load(p)?,
                None => runner::default_verify_config(),
            };
            let report = runner::verify(&cfg).map_err(fail)?;
            print!("{}", report.render());
            if let Some(dir) = out.or_else(|| cfg.output.clone()) {
                let path = runner::write_verify_report(&report, &dir).map_err(fail)?;
                println!("wrote {}", path.display());
            }
            Ok(report.exit_code())
        }
        Command::Converge {
            config,
            max_cm,
            max_field,
            out,
        } => {
            let cfg = load(&config)?;
            let report = runner::converge(&cfg, max_cm, max_field).map_err(fail)?;
            print!("{}", report.render());
            if let Some(dir) = out.or_else(|| cfg.output.clone()) {
                let path = runner::write_converge_report(&report, &dir).map_err(fail)?;
                println!("wrote {}", path.display());
            }
            Ok(if report.converged {
                ExitCode::Success
            } else {
                ExitCode::Verification
            })
        }
    }
}

fn main() -> ProcessExit {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COLDJC_LOG", "warn")).init();
    let code = match Cli::try_parse() {
        Ok(cli) => execute(cli).unwrap_or_else(|c| c),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::Validation
            } else {
                ExitCode::Success
            }
        }
    };
    ProcessExit::from(code as u8)
}
