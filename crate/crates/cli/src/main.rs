use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
mod output;
mod scenario;

use scenario::{GridSpec, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] gndline_core::Error),
}

impl CliError {
    /// 2 for numerical or infeasible results, 1 for everything the user can
    /// fix in the command line or the scenario.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gndline",
    version,
    about = "Simulate ground-line common-mode injection against sensor front ends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,

    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,

    /// Suppress the summary printed to stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Frequency response of the coupling, conversion or combined stage
    Frc {
        #[command(flatten)]
        common: Common,

        #[arg(long, value_enum, default_value_t = FrcWhich::Coupling)]
        which: FrcWhich,

        /// Frequency grid as start,stop,points,log|lin
        #[arg(long, value_parser = GridSpec::parse_flag)]
        grid: Option<GridSpec>,
    },
    /// Design an attack signal and report its effect (waveform goes to --out)
    Attack {
        #[command(flatten)]
        common: Common,

        /// Must match the scenario's attack method when given
        #[arg(long, value_enum)]
        method: Option<AttackMethod>,

        /// Metrics CSV path
        #[arg(long)]
        metrics: PathBuf,

        /// Also write the waveform as 16-bit PCM (with a .rate sidecar)
        #[arg(long)]
        pcm: Option<PathBuf>,
    },
    /// Frequency or amplitude sweep of the victim pipeline
    Sweep {
        #[command(flatten)]
        common: Common,

        /// Frequency grid as start,stop,points,log|lin
        #[arg(long, value_parser = GridSpec::parse_flag)]
        grid: Option<GridSpec>,
    },
    /// Detection, randomized-sampling defense or symmetry what-if tables
    Guard {
        #[command(flatten)]
        common: Common,

        #[arg(long, value_enum)]
        what: GuardWhat,

        /// Frequency grid for the what-if table, as start,stop,points,log|lin
        #[arg(long, value_parser = GridSpec::parse_flag)]
        grid: Option<GridSpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrcWhich {
    Coupling,
    Conversion,
    Endtoend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackMethod {
    Ac,
    Pulse,
    Dc,
    Tone,
}

impl AttackMethod {
    fn name(&self) -> &'static str {
        match self {
            AttackMethod::Ac => "ac",
            AttackMethod::Pulse => "pulse",
            AttackMethod::Dc => "dc",
            AttackMethod::Tone => "tone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuardWhat {
    Detect,
    Defense,
    Whatif,
}

/// Stderr summary sink that honours `--quiet`.
pub struct Report {
    quiet: bool,
}

impl Report {
    pub fn line(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GNDLINE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("GNDLINE_THREADS must be a count, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load(common: &Common) -> Result<(Scenario, Report), CliError> {
    let mut scenario = Scenario::from_path(&common.scenario)?;
    if let Some(seed) = common.seed {
        scenario = scenario.with_seed(seed);
    }
    let report = Report {
        quiet: common.quiet,
    };
    report.line(format!(
        "scenario `{}` (seed {})",
        scenario.name, scenario.seed
    ));
    Ok((scenario, report))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Frc {
            common,
            which,
            grid,
        } => {
            let (s, report) = load(&common)?;
            commands::frc(&s, which, grid.as_ref(), &common.out, &report)
        }
        Command::Attack {
            common,
            method,
            metrics,
            pcm,
        } => {
            let (s, report) = load(&common)?;
            let attack = s
                .attack
                .clone()
                .ok_or_else(|| CliError::Config("scenario has no `attack` section".into()))?;
            if let Some(m) = method {
                if m.name() != attack.method() {
                    return Err(CliError::Usage(format!(
                        "--method {} but the scenario defines a `{}` attack",
                        m.name(),
                        attack.method()
                    )));
                }
            }
            commands::attack(&s, &attack, &common.out, &metrics, pcm.as_deref(), &report)
        }
        Command::Sweep { common, grid } => {
            let (s, report) = load(&common)?;
            commands::sweep(&s, grid.as_ref(), &common.out, &report)
        }
        Command::Guard { common, what, grid } => {
            let (s, report) = load(&common)?;
            commands::guard(&s, what, grid.as_ref(), &common.out, &report)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
