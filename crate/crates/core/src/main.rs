use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stratcontrol::cli::{self, emit, RunConfig, ScenarioSpec};

#[derive(Parser)]
#[command(name = "stratctl", version, about = "Control data and retractions for stratified subsets of R^n")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON configuration and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides STRATCTL_OUT and the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in scenarios.
    ListScenarios {
        #[arg(long)]
        json: bool,
        #[arg(long)]
        no_color: bool,
    },
    /// Build verified control data and print the verification suites.
    Verify {
        #[arg(long)]
        scenario: String,
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the retraction on samples of the union of the unit tubulars.
    Retract {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write report.json and trajectories.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cfg: RunConfig, out: Option<PathBuf>) -> ExitCode {
    match cli::run(&cfg, out.as_deref()) {
        Ok(report) => {
            emit(&cli::summary(&report));
            if let Some(dir) = out.filter(|_| !report.artifacts.is_empty()) {
                emit(&format!("wrote {} files to {}\n", report.artifacts.len(), dir.display()));
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("stratctl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config, out, seed } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("stratctl: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dir = cli::output_dir(out, &cfg);
            execute(cfg, Some(dir))
        }
        Command::ListScenarios { json, no_color } => {
            use std::io::IsTerminal;
            let color = !no_color && std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
            emit(&cli::list_scenarios(json, color));
            ExitCode::SUCCESS
        }
        Command::Verify { scenario, suites, samples, seed, tol } => {
            let mut cfg = RunConfig {
                scenario: ScenarioSpec::Named(scenario),
                samples,
                suites: Some(if suites.is_empty() {
                    ["adjusted", "tangential", "precommutative", "commutative", "equivariant"]
                        .map(String::from)
                        .to_vec()
                } else {
                    suites
                }),
                ..Default::default()
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(tol) = tol {
                cfg.tolerances.verify = tol;
            }
            execute(cfg, None)
        }
        Command::Retract { scenario, samples, seed, out } => {
            let mut cfg = RunConfig {
                scenario: ScenarioSpec::Named(scenario),
                samples,
                suites: Some(vec!["retraction".into()]),
                ..Default::default()
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            execute(cfg, out)
        }
    }
}
