use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use esmpc_cli::config::{parse_dither, Overrides};
use esmpc_cli::{load_scenario, run_many, run_to_dir, scenario_listing, validate_report, CliError, ScenarioFile};

#[derive(Parser)]
#[command(name = "esmpc", version, about = "Servo MPC with extremum-seeking model learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more scenarios and write trace.csv, learning.csv,
    /// summary.txt, scenario.toml and plot.py.
    Run {
        /// Canned scenario name or path to a scenario file. Repeatable.
        #[arg(long, short, required = true)]
        scenario: Vec<String>,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Worker threads when several scenarios are given.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print the resolved configuration and check every invariant.
    Validate {
        #[arg(long, short)]
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// List canned scenarios, or print one as a scenario file.
    Scenarios {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Slack penalty weight.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Gear ratio for plant and model.
    #[arg(long, allow_negative_numbers = true)]
    gear: Option<f64>,
    /// Closed-loop steps per learning iteration.
    #[arg(long = "n-e")]
    n_e: Option<usize>,
    /// Threshold as a multiple of the nominal cost.
    #[arg(long, allow_negative_numbers = true)]
    epsilon_factor: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    control_horizon: Option<usize>,
    /// Skip measuring the nominal cost.
    #[arg(long, allow_negative_numbers = true)]
    q_nominal: Option<f64>,
    /// Length of runs without learning.
    #[arg(long)]
    steps: Option<usize>,
    /// PARAM:AMPLITUDE:OMEGA, repeatable; replaces the scenario's dithers.
    #[arg(long)]
    dither: Vec<String>,
    #[arg(long)]
    no_learning: bool,
}

impl OverrideArgs {
    fn resolve(&self) -> Result<Overrides, CliError> {
        Ok(Overrides {
            rho: self.rho,
            gear: self.gear,
            n_e: self.n_e,
            epsilon_factor: self.epsilon_factor,
            max_iterations: self.max_iterations,
            control_horizon: self.control_horizon,
            horizon: self.horizon,
            q_nominal: self.q_nominal,
            steps: self.steps,
            dither: self.dither.iter().map(|d| parse_dither(d)).collect::<Result<_, _>>()?,
            no_learning: self.no_learning,
        })
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            jobs,
            overrides,
        } => {
            let o = overrides.resolve()?;
            let scenarios = scenario
                .iter()
                .map(|s| load_scenario(s, &o))
                .collect::<Result<Vec<_>, _>>()?;
            if scenarios.len() == 1 {
                let report = run_to_dir(&scenarios[0], &out)?;
                print!("{}", report.to_summary());
                return Ok(());
            }
            let mut worst: Option<CliError> = None;
            for (dir, result) in run_many(&scenarios, &out, jobs) {
                match result {
                    Ok(r) => println!("{}: ok ({} steps)", dir.display(), r.steps),
                    Err(e) => {
                        eprintln!("{}: {e}", dir.display());
                        if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                            worst = Some(e);
                        }
                    }
                }
            }
            worst.map_or(Ok(()), Err)
        }
        Command::Validate { scenario, overrides } => {
            let s = load_scenario(&scenario, &overrides.resolve()?)?;
            let (report, violations) = validate_report(&s);
            print!("{report}");
            if violations.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(violations.join("\n")))
            }
        }
        Command::Scenarios { show } => {
            match show {
                None => print!("{}", scenario_listing()),
                Some(name) => {
                    let s = load_scenario(&name, &Overrides::default())?;
                    print!("{}", ScenarioFile::from_scenario(&s).to_toml());
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
