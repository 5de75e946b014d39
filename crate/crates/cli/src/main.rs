use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use estimands::runner::{self, Overrides};
use estimands::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Run estimand-driven evaluation experiments.
#[derive(Parser)]
#[command(name = "estimands", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and its estimand without running anything.
    Validate(Common),
    /// Run the experiment and write report.json, table.csv and friends.
    Run(Common),
    /// Re-render table.csv from an existing report.json and print it.
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Replications or simulations, overriding the config.
    #[arg(long, value_name = "N")]
    replications: Option<usize>,
    /// Output directory (default: the config's `output`, else `out/<kind>`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replications: self.replications,
            output: self.out.clone(),
        }
    }

    fn config(&self) -> Result<&Path, Failure> {
        self.config
            .as_deref()
            .ok_or_else(|| Failure::config(["--config is required".to_string()]))
    }
}

struct Failure {
    code: u8,
    lines: Vec<String>,
}

impl Failure {
    fn config(lines: impl IntoIterator<Item = String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            lines: lines.into_iter().collect(),
        }
    }

    fn runtime(e: Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            lines: vec![e.to_string()],
        }
    }
}

fn config_failure(e: Error) -> Failure {
    match e {
        Error::InvalidEstimand(issues) => Failure::config(issues),
        other => Failure::config([other.to_string()]),
    }
}

fn output_dir(config: &runner::ExperimentConfig) -> PathBuf {
    config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(config.kind.name()))
}

fn validate(args: &Common) -> Result<(), Failure> {
    let path = args.config()?;
    let mut config = runner::load_config(path).map_err(config_failure)?;
    config.apply(&args.overrides());
    let issues = config.issues(path.parent().unwrap_or(Path::new("")));
    if !issues.is_empty() {
        return Err(Failure::config(issues));
    }
    println!("{}: ok", path.display());
    Ok(())
}

fn run(args: &Common) -> Result<(), Failure> {
    let prepared = runner::prepare(args.config()?, &args.overrides()).map_err(config_failure)?;
    let report = runner::execute(&prepared, args.threads).map_err(Failure::runtime)?;
    let dir = output_dir(&prepared.config);
    for path in runner::write_outputs(&report, &dir).map_err(Failure::runtime)? {
        println!("wrote {}", path.display());
    }
    print!("{}", runner::render_table(&report));
    Ok(())
}

fn report(args: &Common) -> Result<(), Failure> {
    let dir = match (&args.out, &args.config) {
        (Some(d), _) => d.clone(),
        (None, Some(p)) => {
            let mut config = runner::load_config(p).map_err(config_failure)?;
            config.apply(&args.overrides());
            output_dir(&config)
        }
        (None, None) => return Err(Failure::config(["report needs --out or --config".to_string()])),
    };
    let report = runner::read_report(&dir.join("report.json")).map_err(config_failure)?;
    let table = runner::render_table(&report);
    let path = dir.join("table.csv");
    std::fs::write(&path, &table).map_err(|e| Failure::runtime(Error::Io { path, source: e }))?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            for line in f.lines {
                eprintln!("error: {line}");
            }
            ExitCode::from(f.code)
        }
    }
}
