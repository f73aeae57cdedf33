use clap::Parser;
use degwave::config::{parse_config, ExperimentKind};
use degwave::runner::{exit_code_for, run, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments for the degenerate/singular wave equation:
/// inequality suites, identity refinement studies, observability sweeps,
/// spectral reports, and HUM boundary control synthesis.
#[derive(Parser)]
#[command(name = "degwave", version, about)]
struct Cli {
    /// Experiment kind: hardy | identities | observability | hum | eigen
    kind: String,
    /// Path to the experiment config (key=value lines or one JSON object)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts and the summary
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match ExperimentKind::parse(&cli.kind) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("degwave: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("degwave: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("degwave: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if config.kind != kind {
        eprintln!(
            "degwave: config declares kind '{}' but '{}' was requested",
            config.kind.name(),
            kind.name()
        );
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let out_dir = cli
        .out
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match run(&config, &out_dir) {
        Ok(code) => {
            println!("degwave: {} finished (exit {code})", kind.name());
            println!("degwave: artifacts in {}", out_dir.display());
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("degwave: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
