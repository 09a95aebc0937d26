use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polarirs::harness::{analytic_records, emit_csv, preset, run_sweep, write_csv, RateRecord, SimConfig, PRESETS};
use polarirs::validation::run_checks;

#[derive(Parser)]
#[command(name = "polarirs", version, about = "Dual-polarized IRS-assisted MIMO-NOMA simulator")]
#[command(after_help = "Worker threads are taken from the POLARIRS_WORKERS environment variable.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep described by a JSON config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Closed-form rates over the config's grid.
    Analytic {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Quick self-checks of the build.
    Validate,
    /// Run one of the bundled presets.
    Sweep {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset: String,
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Trials per grid point (replaces any per-L counts).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, config: &mut SimConfig) {
        if let Some(t) = self.trials {
            config.trials = t;
            config.trials_by_elements.clear();
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
    }
}

fn output(records: &[RateRecord], path: Option<&PathBuf>) -> polarirs::Result<()> {
    match path {
        Some(p) => {
            emit_csv(records, p)?;
            eprintln!("wrote {} rows to {}", records.len(), p.display());
            Ok(())
        }
        None => write_csv(records, std::io::stdout().lock()),
    }
}

fn simulate(mut config: SimConfig, opts: &Overrides) -> polarirs::Result<()> {
    opts.apply(&mut config);
    let records = run_sweep(&config)?;
    output(&records, opts.output.as_ref())
}

fn execute(cli: Cli) -> polarirs::Result<bool> {
    match cli.command {
        Command::Run { config, opts } => simulate(SimConfig::load(&config)?, &opts).map(|_| true),
        Command::Sweep { preset: name, opts } => simulate(preset(&name)?, &opts).map(|_| true),
        Command::Analytic { config, output: out } => {
            let records = analytic_records(&SimConfig::load(&config)?)?;
            output(&records, out.as_ref()).map(|_| true)
        }
        Command::Validate => {
            let checks = run_checks();
            for c in &checks {
                println!("{:<28} {}  {}", c.name, if c.passed { "ok" } else { "FAILED" }, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
