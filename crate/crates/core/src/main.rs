use basinscope::harness::chunks::RunOptions;
use basinscope::harness::config::ExperimentConfig;
use basinscope::harness::{analyze_pipeline, report_pipeline, run_pipeline, verify, HarnessError};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "basinscope", version, about = "Map the explanation basins reached by repeated training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated split seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    splits: Option<Vec<u64>>,
    /// Runs per split, overriding the config.
    #[arg(long)]
    runs: Option<usize>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply_overrides(self.output.clone(), self.splits.clone(), self.runs)?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train and explain every run, then analyse and report.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Worker threads (defaults to the available cores).
        #[arg(long, env = "BASINSCOPE_JOBS")]
        jobs: Option<usize>,
        /// Keep runs already present in existing chunks.
        #[arg(long)]
        resume: bool,
    },
    /// Aggregate existing chunks and write the report.
    Analyze {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Re-render tables and figures from a saved report.
    Report {
        /// Experiment config whose output directory holds the report.
        #[arg(long, required_unless_present = "output")]
        config: Option<PathBuf>,
        /// Directory holding report.json.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the oracle suites.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn execute(command: Command) -> Result<(), HarnessError> {
    let out = match command {
        Command::Run { exp, jobs, resume } => {
            let cfg = exp.load()?;
            let jobs = jobs
                .filter(|&j| j > 0)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            run_pipeline(&cfg, &RunOptions { jobs, resume })?
        }
        Command::Analyze { exp } => analyze_pipeline(&exp.load()?)?,
        Command::Report { config, output } => {
            let dir = match (output, config) {
                (Some(o), _) => o,
                (None, Some(c)) => ExperimentConfig::load(&c)?.output_dir,
                (None, None) => unreachable!("clap requires one of them"),
            };
            report_pipeline(&dir)?
        }
        Command::Verify { seed } => {
            let outcomes = verify::run_all(seed);
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(HarnessError::Verify(failed.join(", ")));
            }
            return Ok(());
        }
    };
    if let Some(p) = &out.envelope_path {
        println!("{}", p.display());
    }
    for f in &out.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
