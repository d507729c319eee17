use clap::{Parser, Subcommand, ValueEnum};
use reltrace_cli::commands::{cmd_energy, cmd_plates, cmd_xi, Overrides, PlatesArgs};
use reltrace_cli::config::RunConfig;
use reltrace_cli::verify::{cmd_verify, Level, Mutation, VerifyOptions};
use reltrace_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "reltrace",
    version,
    about = "Relative spectral functions and Casimir energies of 2D obstacles"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    kappa_min: Option<f64>,
    #[arg(long, global = true)]
    kappa_max: Option<f64>,
    /// Relative tolerance of the κ integration.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate Ξ(iκ) on the configured grid.
    Xi,
    /// Casimir energy of the configured geometry.
    Energy,
    /// Parallel point plates, optionally thickened into dielectric slabs.
    Plates {
        #[arg(long, default_value_t = 1.0)]
        gap: f64,
        #[arg(long, default_value_t = 0.0)]
        mass: f64,
        #[arg(long)]
        thickness: Option<f64>,
        /// Interior to exterior κ ratio of the slabs.
        #[arg(long, default_value_t = 2.0)]
        contrast: f64,
    },
    /// Run the verification suites.
    Verify {
        #[arg(value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
        /// Seed of the randomized suites; defaults to the config's `seed`, else 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        #[arg(long, hide = true, value_enum)]
        mutate: Option<MutationArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MutationArg {
    FlipN,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    RunConfig::load(path)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let ov = Overrides {
        out: cli.out.clone(),
        kappa_min: cli.kappa_min,
        kappa_max: cli.kappa_max,
        tol: cli.tol,
    };
    match &cli.command {
        Command::Xi => {
            let report = cmd_xi(&load_config(&cli)?, &ov)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
        }
        Command::Energy => {
            let report = cmd_energy(&load_config(&cli)?, &ov)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Plates {
            gap,
            mass,
            thickness,
            contrast,
        } => {
            let args = PlatesArgs {
                gap: *gap,
                mass: *mass,
                thickness: *thickness,
                contrast: *contrast,
                tol: cli.tol,
            };
            let report = cmd_plates(&args)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Verify {
            level,
            seed,
            json,
            mutate,
        } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let seed = match (seed, &cli.config) {
                (Some(s), _) => *s,
                (None, Some(_)) => load_config(&cli)?.seed,
                (None, None) => 0,
            };
            let opts = VerifyOptions {
                level,
                seed,
                mutation: mutate.map(|MutationArg::FlipN| Mutation::FlipHypersingularSign),
            };
            let report = cmd_verify(&opts)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                print!("{}", report.render());
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(
                    dir.join("verify.json"),
                    serde_json::to_string_pretty(&report).expect("serializable"),
                )?;
            }
            if !report.passed {
                return Err(CliError::VerifyFailed(report.failures().join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.exit_code() == reltrace_cli::error::EXIT_NUMERICAL {
                eprintln!("{}", e.diagnostic());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
