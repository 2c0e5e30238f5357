use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nring_lab::direct::ScheduleKind;
use nring_lab::runner::{self, Format, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use nring_lab::Error;

/// Numerical experiments on the stability of n-ring homomorphisms and
/// derivations.
#[derive(Parser, Debug)]
#[command(name = "nring-lab", version)]
struct Cli {
    /// Output format; defaults to the config's `format`, then json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the timestamp so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Override the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a built-in experiment or a TOML configuration file.
    Run { target: String },
    /// List the built-in experiments.
    List,
    /// Run one of the counterexample experiments.
    Counterexample {
        #[arg(value_parser = ["luminet", "nilpotent"])]
        name: String,
    },
    /// Print the direct-method trace of a map at a point.
    Limit {
        /// Comma-separated coordinates.
        #[arg(allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value = "hyers", value_parser = runner::LIMIT_MAPS)]
        map: String,
        #[arg(long, value_enum, default_value = "dyadic")]
        kind: Kind,
        #[arg(long, default_value_t = 60)]
        m_max: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Kind {
    Dyadic,
    Integer,
}

fn emit(cli: &Cli, text: &str, default_out: Option<&str>) -> Result<(), Error> {
    match cli.out.as_deref().map(PathBuf::from).or(default_out.map(PathBuf::from)) {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_target(cli: &Cli, target: &str) -> Result<bool, Error> {
    let mut cfg = runner::load_config(target)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let result = runner::run(&cfg)?;
    let format = cli.format.unwrap_or(result.settings.format);
    let text = result.render(format, !cli.no_timestamp)?;
    emit(cli, &text, result.settings.output.as_deref())?;
    Ok(result.passed())
}

fn dispatch(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::Run { target } => run_target(cli, target),
        Command::Counterexample { name } => run_target(cli, name),
        Command::List => {
            emit(cli, &(runner::list_experiments().join("\n") + "\n"), None)?;
            Ok(true)
        }
        Command::Limit { point, map, kind, m_max, tol } => {
            let kind = match kind {
                Kind::Dyadic => ScheduleKind::Dyadic,
                Kind::Integer => ScheduleKind::Integer,
            };
            let point = runner::parse_point(point)?;
            let trace = runner::limit_trace(map, &point, kind, *m_max, *tol, cli.seed.unwrap_or(7))?;
            emit(cli, &(serde_json::to_string_pretty(&trace)? + "\n"), None)?;
            Ok(trace.is_converged())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::from(EXIT_PASS as u8),
        Ok(false) => ExitCode::from(EXIT_FAIL as u8),
        Err(e) => {
            eprintln!("nring-lab: {e}");
            let code = runner::exit_code(&e);
            debug_assert!(code == EXIT_FAIL || code == EXIT_CONFIG);
            ExitCode::from(code as u8)
        }
    }
}
